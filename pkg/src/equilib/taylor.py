"""Certified per-cell Taylor models of charge-potential derivatives.

A model is a polynomial in local coordinates u = (x - anchor) / scale plus
a certified supremum bound on |true - polynomial| over the cell.  Degrees
come from the well-behaved exponent B and the error budget; coefficients
come from the exact symbolic derivative expansions; the remainder is the
Lagrange bound evaluated through the k! 2^k q / r^(k+1) derivative bound at
the cell's distance to each charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegreeOverflow
from .grid import Box
from .potential import (
    ChargeSystem,
    MultiIndex,
    _unit_expansion,
    derivative_bound,
    derivative_terms,
    evaluate_expansion,
    mi_factorial,
    multi_indices_upto,
)

MAX_DEGREE = 150


class Polynomial:
    """Sparse multivariate polynomial with MultiIndex-keyed coefficients."""

    def __init__(self, d: int, coeffs: dict[MultiIndex, float] | None = None):
        self.d = d
        self.coeffs: dict[MultiIndex, float] = {}
        for s, c in (coeffs or {}).items():
            if c != 0.0:
                self.coeffs[tuple(int(v) for v in s)] = float(c)
        self._arrays: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def degree(self) -> int:
        return max((sum(s) for s in self.coeffs), default=0)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(exponent matrix, coefficient vector), cached."""
        if self._arrays is None:
            if self.coeffs:
                S = np.array(sorted(self.coeffs), dtype=np.int64)
                c = np.array([self.coeffs[tuple(s)] for s in S], dtype=float)
            else:
                S = np.zeros((1, self.d), dtype=np.int64)
                c = np.zeros(1)
            self._arrays = (S, c)
        return self._arrays

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        S, c = self.arrays()
        with np.errstate(divide="ignore", invalid="ignore"):
            monos = np.prod(np.where(S > 0, x[None, :] ** S, 1.0), axis=1)
        return float(c @ monos)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        S, c = self.arrays()
        monos = np.ones((pts.shape[0], S.shape[0]))
        for j in range(self.d):
            pj = pts[:, j]
            maxp = int(S[:, j].max(initial=0))
            pows = np.ones((maxp + 1, pts.shape[0]))
            for p in range(1, maxp + 1):
                pows[p] = pows[p - 1] * pj
            monos *= pows[S[:, j]].T
        return monos @ c

    def constant_shifted(self, delta: float) -> "Polynomial":
        out = dict(self.coeffs)
        zero = (0,) * self.d
        out[zero] = out.get(zero, 0.0) + delta
        return Polynomial(self.d, out)

    def negated(self) -> "Polynomial":
        return Polynomial(self.d, {s: -c for s, c in self.coeffs.items()})

    def gradient(self) -> list["Polynomial"]:
        grads = []
        for j in range(self.d):
            g: dict[MultiIndex, float] = {}
            for s, c in self.coeffs.items():
                if s[j] > 0:
                    s2 = tuple(v - (1 if i == j else 0) for i, v in enumerate(s))
                    g[s2] = g.get(s2, 0.0) + c * s[j]
            grads.append(Polynomial(self.d, g))
        return grads

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        small, big = (self, other) if len(self.coeffs) <= len(other.coeffs) else (other, self)
        shape = tuple(
            max((s[j] for s in self.coeffs), default=0)
            + max((s[j] for s in other.coeffs), default=0)
            + 1
            for j in range(self.d)
        )
        dense = np.zeros(shape)
        Sb, cb = big.arrays()
        for s, c in small.coeffs.items():
            idx = tuple(Sb[:, j] + s[j] for j in range(self.d))
            np.add.at(dense, idx, c * cb)
        out = {
            tuple(int(v) for v in s): float(dense[tuple(s)])
            for s in np.argwhere(dense != 0.0)
        }
        return Polynomial(self.d, out)


@dataclass(frozen=True)
class TaylorModel:
    """Polynomial in u = (x - anchor)/scale with certified sup error on cell."""

    anchor: tuple[float, ...]
    poly: Polynomial
    err: float
    cell: Box
    scale: tuple[float, ...]

    def to_local(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.array(self.anchor)) / np.array(self.scale)

    def __call__(self, x) -> float:
        return self.poly(self.to_local(x))


def taylor_degree(B: float, eps: float) -> int:
    """Expansion order k = max(1, ceil(B + log2(8/eps))); degree is k - 1."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(1, math.ceil(B + math.log2(8.0 / eps)))


class SeriesFunction:
    """D^offset of a charge-system potential, with exact partials and bounds."""

    def __init__(self, sys: ChargeSystem, offset: MultiIndex | None = None):
        self.sys = sys
        self.offset = tuple(offset) if offset is not None else (0,) * sys.d
        if len(self.offset) != sys.d:
            raise ValueError("offset dimension mismatch")

    def partial(self, s: MultiIndex, x) -> float:
        full = tuple(a + b for a, b in zip(s, self.offset))
        return sum(
            evaluate_expansion(derivative_terms(c, full), x) for c in self.sys.charges
        )

    def __call__(self, x) -> float:
        return self.partial((0,) * self.sys.d, x)

    def sup_partial_bound(self, k: int, box: Box) -> float:
        """Upper bound on every order-k partial of this function over box."""
        total = 0.0
        korder = k + sum(self.offset)
        for c in self.sys.charges:
            r = box.min_distance(c.position)
            if r <= 0:
                return math.inf
            total += derivative_bound(c, korder, r)
        return total


@lru_cache(maxsize=8)
def _flat_tables(d: int, kmax: int):
    """Flattened symbolic expansion tables for all multi-indices |s| <= kmax."""
    if kmax > MAX_DEGREE:
        raise DegreeOverflow(f"requested order {kmax} exceeds cap {MAX_DEGREE}")
    mi_list = list(multi_indices_upto(d, kmax))
    mi_index = {s: i for i, s in enumerate(mi_list)}
    out_rows: list[int] = []
    spow_rows: list[MultiIndex] = []
    tpow_rows: list[int] = []
    kappa_rows: list[float] = []
    for i, s in enumerate(mi_list):
        for sprime, tprime, kappa in _unit_expansion(d, s):
            out_rows.append(i)
            spow_rows.append(sprime)
            tpow_rows.append(tprime)
            kappa_rows.append(float(kappa))
    return {
        "mi_list": mi_list,
        "mi_index": mi_index,
        "out": np.array(out_rows, dtype=np.int64),
        "spow": np.array(spow_rows, dtype=np.int64).reshape(len(out_rows), d),
        "tpow": np.array(tpow_rows, dtype=np.int64),
        "kappa": np.array(kappa_rows, dtype=float),
        "sfact": np.array([float(mi_factorial(s)) for s in mi_list]),
    }


def derivative_values(sys: ChargeSystem, anchor, kmax: int) -> tuple[list, np.ndarray]:
    """(multi-index list, D^s f(anchor) for every |s| <= kmax), vectorized."""
    tab = _flat_tables(sys.d, kmax)
    anchor = np.asarray(anchor, dtype=float)
    total = np.zeros(len(tab["mi_list"]))
    tmax = int(tab["tpow"].max(initial=1))
    for c in sys.charges:
        dx = anchor - np.array(c.position)
        r = float(np.linalg.norm(dx))
        if r == 0.0:
            raise DegreeOverflow("expansion anchored on a charge position")
        vals = tab["kappa"].copy()
        for j in range(sys.d):
            maxp = int(tab["spow"][:, j].max(initial=0))
            pows = np.power(dx[j], np.arange(maxp + 1)) if maxp >= 0 else np.ones(1)
            vals *= pows[tab["spow"][:, j]]
        rinv = np.power(1.0 / r, np.arange(tmax + 1))
        vals *= rinv[tab["tpow"]]
        total += c.q * np.bincount(tab["out"], weights=vals, minlength=len(total))
    if not np.all(np.isfinite(total)):
        raise DegreeOverflow("derivative values overflow double precision")
    return tab["mi_list"], total


def model_coefficients(
    sys: ChargeSystem, anchor, k: int, offset: MultiIndex, scale
) -> dict[MultiIndex, float]:
    """Taylor coefficients of D^offset f about anchor, degree k-1, u-scaled."""
    d = sys.d
    kmax = k - 1 + sum(offset)
    mi_list, vals = derivative_values(sys, anchor, kmax)
    index = _flat_tables(d, kmax)["mi_index"]
    scale = np.asarray(scale, dtype=float)
    coeffs: dict[MultiIndex, float] = {}
    for s in multi_indices_upto(d, k - 1):
        full = tuple(a + b for a, b in zip(s, offset))
        c = vals[index[full]] / mi_factorial(s)
        c *= float(np.prod(scale ** np.array(s)))
        if not math.isfinite(c):
            raise DegreeOverflow("model coefficient overflow")
        if c != 0.0:
            coeffs[s] = c
    return coeffs


def _cell_radii(anchor, cell: Box) -> np.ndarray:
    a = np.asarray(anchor, dtype=float)
    return np.maximum(np.array(cell.hi) - a, a - np.array(cell.lo)).clip(min=0.0)


def expand(g, anchor, k: int, cell: Box, scale=None) -> TaylorModel:
    """Degree k-1 Taylor model of g about anchor, certified over cell.

    g must expose exact partials: either a SeriesFunction (fast path) or any
    object with partial(s, x) and sup_partial_bound(k, box).  The err field
    is the Lagrange remainder bound plus a slack covering coefficient and
    evaluation rounding.
    """
    anchor = tuple(float(v) for v in anchor)
    d = len(anchor)
    if scale is None:
        scale = (1.0,) * d
    scale = tuple(float(v) for v in scale)
    if k < 1:
        raise ValueError("expansion order must be >= 1")
    if k > MAX_DEGREE:
        raise DegreeOverflow(f"expansion order {k} exceeds cap {MAX_DEGREE}")
    if isinstance(g, SeriesFunction):
        coeffs = model_coefficients(g.sys, anchor, k, g.offset, scale)
    else:
        coeffs = {}
        for s in multi_indices_upto(d, k - 1):
            c = g.partial(s, anchor) / mi_factorial(s)
            c *= float(np.prod(np.array(scale) ** np.array(s)))
            if c != 0.0:
                coeffs[s] = c
    poly = Polynomial(d, coeffs)
    radii = _cell_radii(anchor, cell)
    mk = g.sup_partial_bound(k, cell)
    remainder = mk * float(np.sum(radii)) ** k / math.factorial(k)
    radii_u = radii / np.array(scale)
    S, c = poly.arrays()
    mono_caps = np.prod(np.where(S > 0, radii_u[None, :] ** S, 1.0), axis=1)
    slack = 1e-13 * (float(np.abs(c) @ mono_caps) + 1e-30)
    err = remainder + slack
    if not math.isfinite(err):
        raise DegreeOverflow("remainder bound is not finite")
    return TaylorModel(anchor=anchor, poly=poly, err=err, cell=cell, scale=scale)


def lipschitz_axis_bounds(poly: Polynomial, box: Box) -> np.ndarray:
    """Per-axis bounds on sup |d poly / d x_j| over box via coefficient sums."""
    m = np.maximum(np.abs(np.array(box.lo)), np.abs(np.array(box.hi)))
    S, c = poly.arrays()
    out = np.zeros(box.d)
    for j in range(box.d):
        mask = S[:, j] > 0
        if not np.any(mask):
            continue
        Sj = S[mask].copy()
        Sj[:, j] -= 1
        monos = np.prod(np.where(Sj > 0, m[None, :] ** Sj, 1.0), axis=1)
        out[j] = float(np.abs(c[mask] * S[mask][:, j]) @ monos)
    return out


def lipschitz_bound(poly: Polynomial, box: Box) -> float:
    """L >= sup over box of the Euclidean norm of poly's gradient."""
    return float(np.linalg.norm(lipschitz_axis_bounds(poly, box)))
