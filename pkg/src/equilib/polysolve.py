"""Two-sided polynomial-inequality feasibility over a polytope.

Given polynomials p_1..p_m and a bounded region, either return a point
where every p_i <= 0 (re-verified exactly), or certify that no point
satisfies every p_i <= -eps.  The engine is interval branch-and-prune with
outward-rounded arithmetic; it is deterministic and reports an honest
BudgetExceeded instead of ever guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, EmptyPolytope
from .grid import Box, Polytope, project  # noqa: F401  (project is part of this API)
from .taylor import Polynomial, lipschitz_axis_bounds

DEFAULT_BUDGET = 10**6
_INF = math.inf


def _down(v: float) -> float:
    return math.nextafter(v, -_INF) if math.isfinite(v) else v


def _up(v: float) -> float:
    return math.nextafter(v, _INF) if math.isfinite(v) else v


@dataclass(frozen=True)
class Interval:
    """Closed interval with outward-rounded endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval with lo > hi")

    @staticmethod
    def point(v: float) -> "Interval":
        return Interval(v, v)

    def __add__(self, other) -> "Interval":
        other = _as_interval(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> "Interval":
        return self + (-_as_interval(other))

    def __mul__(self, other) -> "Interval":
        other = _as_interval(other)
        prods = [
            self.lo * other.lo, self.lo * other.hi,
            self.hi * other.lo, self.hi * other.hi,
        ]
        return Interval(_down(min(prods)), _up(max(prods)))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Interval":
        if n < 0:
            raise ValueError("negative powers unsupported")
        if n == 0:
            return Interval(1.0, 1.0)
        lo, hi = self.lo**n, self.hi**n
        if n % 2 == 0:
            top = _up(max(lo, hi))
            if self.lo <= 0.0 <= self.hi:
                return Interval(0.0, top)
            return Interval(_down(min(lo, hi)), top)
        return Interval(_down(lo), _up(hi))

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _as_interval(v) -> Interval:
    return v if isinstance(v, Interval) else Interval.point(float(v))


@dataclass(frozen=True)
class SolveOutcome:
    """Found(point, residuals) or Infeasible(threshold)."""

    found: bool
    point: tuple[float, ...] | None = None
    residuals: tuple[float, ...] | None = None
    threshold: float | None = None

    @staticmethod
    def found_at(point, residuals) -> "SolveOutcome":
        return SolveOutcome(
            found=True,
            point=tuple(float(v) for v in point),
            residuals=tuple(float(v) for v in residuals),
        )

    @staticmethod
    def infeasible(eps: float) -> "SolveOutcome":
        return SolveOutcome(found=False, threshold=float(eps))


def eval_poly_interval(poly: Polynomial, box: Box) -> Interval:
    """Rigorous enclosure of poly's range over box.

    Centered form: substitute x_j = mid_j + u_j with u_j symmetric, expand
    each monomial by the binomial theorem in interval arithmetic, and use
    the even-power rule so squares never dip below zero.
    """
    zero = (0,) * len(box.lo)
    if all(s == zero for s in poly.coeffs):
        c = poly.coeffs.get(zero, 0.0)
        return Interval(c, c)
    mid = box.center
    half = box.widths / 2.0
    total = Interval(0.0, 0.0)
    for s, c in poly.coeffs.items():
        mono = Interval(1.0, 1.0)
        for j, sj in enumerate(s):
            if sj == 0:
                continue
            u = Interval(-half[j], half[j])
            axis = Interval(0.0, 0.0)
            for i in range(sj + 1):
                coef = math.comb(sj, i) * mid[j] ** (sj - i)
                axis = axis + (u**i) * coef
            mono = mono * axis
        total = total + mono * c
    return total


def _poly_data(polys: Sequence[Polynomial], root: Box):
    data = []
    for p in polys:
        S, c = p.arrays()
        lips = lipschitz_axis_bounds(p, root)
        scale = float(np.abs(c).sum()) + 1.0
        data.append((S, c, lips, scale))
    return data


def _fast_enclosure(S, c, lips, scale, lo, hi):
    """Midpoint-Lipschitz enclosure; rigorous given lips valid on the root box."""
    mid = (lo + hi) / 2.0
    monos = np.prod(np.where(S > 0, mid[None, :] ** S, 1.0), axis=1)
    val = float(c @ monos)
    slack = 1e-12 * (float(np.abs(c) @ np.abs(monos)) + 1.0)
    margin = float(lips @ ((hi - lo) / 2.0)) + slack
    return val - margin, val + margin


def solve_system(
    polys: Sequence[Polynomial],
    X: Polytope | None,
    box: Box,
    eps: float,
    budget: int = DEFAULT_BUDGET,
) -> SolveOutcome:
    """Branch-and-prune feasibility for {p_i(x) <= 0, x in X ∩ box}.

    Returns Found with a point whose true residuals are <= 1e-12, or
    Infeasible certifying that no x in X ∩ box has every p_i(x) <= -eps.
    Deterministic: widest axis bisected (ties to the lowest index), lower
    half explored first, first acceptance wins.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = box.d
    if X is None:
        X = Polytope.from_box(box)
    data = _poly_data(polys, box)
    lip_sum = max((float(l.sum()) for _, _, l, _ in data), default=0.0)
    width_min = _INF if lip_sum == 0.0 else eps / (2.0 * lip_sum)
    stack = [(np.array(box.lo, dtype=float), np.array(box.hi, dtype=float))]
    processed = 0
    while stack:
        lo, hi = stack.pop()
        processed += 1
        if processed > budget:
            raise BudgetExceeded(
                f"subdivision budget {budget} exhausted", cell=Box(tuple(lo), tuple(hi))
            )
        mid = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        # Sound polytope rejection: some half-space excludes the whole box.
        row_mins = X.A @ mid - np.abs(X.A) @ half
        if np.any(row_mins > X.b + 1e-12):
            continue
        enclosures = [_fast_enclosure(*pd, lo, hi) for pd in data]
        if all(ub <= 0.0 for _, ub in enclosures):
            candidate = _accept(polys, X, lo, hi)
            if candidate is not None:
                return candidate
            # Box provably satisfies the system but holds no X point.
            continue
        if any(lb > -eps for lb, _ in enclosures):
            continue
        w = hi - lo
        j = int(np.argmax(w))
        if w[j] <= width_min:
            continue
        m = (lo[j] + hi[j]) / 2.0
        upper_lo = lo.copy()
        upper_lo[j] = m
        lower_hi = hi.copy()
        lower_hi[j] = m
        stack.append((upper_lo, hi))
        stack.append((lo, lower_hi))
    return SolveOutcome.infeasible(eps)


def _accept(polys, X, lo, hi) -> SolveOutcome | None:
    cell = X.with_box(Box(tuple(lo), tuple(hi)))
    try:
        z = cell.interior_point()
    except EmptyPolytope:
        return None
    z = np.clip(z, lo, hi)
    residuals = [p(z) for p in polys]
    if all(r <= 1e-12 for r in residuals):
        return SolveOutcome.found_at(z, residuals)
    return None
