"""Point-charge systems and exact derivatives of the 1/r potential.

A configuration of n signed point charges in d dimensions induces the
potential  f(x) = sum_i q_i / ||x - a_i||.  Every partial derivative of a
single-charge term is a finite sum of terms

    kappa * (x - a)^s' / ||x - a||^t'

with integer kappa (times q), which this module manipulates symbolically.
Only evaluation rounds; differentiation is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import DegreeOverflow, SingularPoint

# Points closer than this (in normalized units) to a charge count as singular.
SINGULAR_GUARD = 1e-14

# Symbolic expansion tables above this order are refused outright; the
# float conversion of kappa / s! stays finite well past it, this is a
# sanity cap for runaway degree requests.
MAX_EXPANSION_ORDER = 160

MultiIndex = tuple[int, ...]


def mi_order(s: MultiIndex) -> int:
    return sum(s)


def mi_factorial(s: MultiIndex) -> int:
    out = 1
    for sj in s:
        out *= math.factorial(sj)
    return out


def multi_indices(d: int, k: int) -> Iterator[MultiIndex]:
    """All multi-indices of exact order k in d variables, lexicographic."""
    if d == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in multi_indices(d - 1, k - first):
            yield (first,) + rest


def multi_indices_upto(d: int, k: int) -> Iterator[MultiIndex]:
    for order in range(k + 1):
        yield from multi_indices(d, order)


@dataclass(frozen=True)
class Charge:
    """A point charge: signed strength q at position a."""

    q: float
    position: tuple[float, ...]

    def __post_init__(self):
        if self.q == 0:
            raise ValueError("charge strength must be nonzero")
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError("charge position must be finite")
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "q", float(self.q))

    @property
    def d(self) -> int:
        return len(self.position)


class ChargeSystem:
    """A charge configuration plus its normalization constants.

    The stored charges keep their original units.  ``normalized()`` returns
    the rescaled system with min |q_i| = 1 and minimum pairwise
    max-coordinate separation 1, together with the scale factors needed to
    map solver outputs back.
    """

    def __init__(self, charges: Sequence[Charge], d: int | None = None):
        charges = list(charges)
        if not charges:
            raise ValueError("need at least one charge")
        if d is None:
            d = charges[0].d
        if not (1 <= d <= 4):
            raise ValueError("dimension must be between 1 and 4")
        for c in charges:
            if c.d != d:
                raise ValueError("charge dimension mismatch")
        for i in range(len(charges)):
            for j in range(i + 1, len(charges)):
                if charges[i].position == charges[j].position:
                    raise ValueError("charge positions must be pairwise distinct")
        self.d = d
        self.charges = tuple(charges)
        self.scale_q = min(abs(c.q) for c in charges)
        if len(charges) >= 2:
            self.scale_x = min(
                max(abs(a.position[j] - b.position[j]) for j in range(d))
                for i, a in enumerate(charges)
                for b in charges[i + 1 :]
            )
        else:
            self.scale_x = 1.0
        if self.scale_x == 0:
            # Distinct positions can still tie on every coordinate only if
            # equal, which was rejected above.
            raise ValueError("degenerate charge separation")

    @property
    def n(self) -> int:
        return len(self.charges)

    @property
    def q_max(self) -> float:
        return max(abs(c.q) for c in self.charges)

    @property
    def a_max(self) -> float:
        if self.n < 2:
            return 0.0
        return max(
            abs(a.position[j] - b.position[j])
            for i, a in enumerate(self.charges)
            for b in self.charges[i + 1 :]
            for j in range(self.d)
        )

    def is_normalized(self) -> bool:
        return self.scale_q == 1.0 and self.scale_x == 1.0

    def normalized(self) -> "ChargeSystem":
        """The rescaled copy of this system (identity if already normalized)."""
        if self.is_normalized():
            return self
        charges = [
            Charge(c.q / self.scale_q, tuple(p / self.scale_x for p in c.position))
            for c in self.charges
        ]
        ns = ChargeSystem(charges, self.d)
        return ns

    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.charges], dtype=float)

    def strengths(self) -> np.ndarray:
        return np.array([c.q for c in self.charges], dtype=float)

    def __repr__(self):
        return f"ChargeSystem(d={self.d}, n={self.n}, q_max={self.q_max})"


@dataclass(frozen=True)
class PolyTerm:
    """One term kappa * (x-a)^num / ||x-a||^den_pow of a derivative expansion."""

    kappa: float
    num: MultiIndex
    den_pow: int

    def __post_init__(self):
        if self.den_pow % 2 == 0 or self.den_pow <= 0:
            raise ValueError("effective denominator degree must be odd and positive")


@dataclass(frozen=True)
class DerivativeExpansion:
    """Exact symbolic form of D^s applied to a single-charge potential."""

    charge: Charge
    order: MultiIndex
    terms: tuple[PolyTerm, ...]

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate_expansion(self, x)


def _check_not_singular(x: np.ndarray, positions: np.ndarray, guard: float) -> None:
    if positions.size and np.min(np.max(np.abs(x - positions), axis=1)) < guard:
        raise SingularPoint("evaluation point coincides with a charge position")


def _guard_for(sys: ChargeSystem) -> float:
    return SINGULAR_GUARD * max(1.0, sys.scale_x)


def eval_potential(sys: ChargeSystem, x: Sequence[float]) -> float:
    """Evaluate f(x) = sum_i q_i / ||x - a_i||."""
    x = np.asarray(x, dtype=float)
    pos = sys.positions()
    _check_not_singular(x, pos, _guard_for(sys))
    r = np.linalg.norm(x - pos, axis=1)
    return float(np.sum(sys.strengths() / r))


def eval_gradient(sys: ChargeSystem, x: Sequence[float]) -> np.ndarray:
    """Gradient of the potential; component l is sum_i -q_i (x_l - a_il) / r_i^3."""
    x = np.asarray(x, dtype=float)
    pos = sys.positions()
    _check_not_singular(x, pos, _guard_for(sys))
    diff = x - pos
    r3 = np.sum(diff * diff, axis=1) ** 1.5
    return -np.sum(sys.strengths()[:, None] * diff / r3[:, None], axis=0)


@lru_cache(maxsize=None)
def _unit_expansion(d: int, order: MultiIndex) -> tuple[tuple[MultiIndex, int, int], ...]:
    """Terms ((s', t'), kappa) of D^order (1/r) for a unit charge at the origin.

    Differentiating kappa (x)^s' / r^t' by x_j yields at most two terms:
    kappa*s'_j (x)^(s'-e_j) / r^t'  and  -kappa*t' (x)^(s'+e_j) / r^(t'+2).
    Terms with identical (s', t') are merged with exact integer arithmetic.
    """
    k = sum(order)
    if k > MAX_EXPANSION_ORDER:
        raise DegreeOverflow(f"derivative order {k} exceeds cap {MAX_EXPANSION_ORDER}")
    if k == 0:
        return ((((0,) * d), 1, 1),)
    j = next(i for i, sj in enumerate(order) if sj > 0)
    parent_order = tuple(sj - (1 if i == j else 0) for i, sj in enumerate(order))
    parent = _unit_expansion(d, parent_order)
    merged: dict[tuple[MultiIndex, int], int] = {}
    for sprime, tprime, kappa in parent:
        if sprime[j] > 0:
            key = (
                tuple(sj - (1 if i == j else 0) for i, sj in enumerate(sprime)),
                tprime,
            )
            merged[key] = merged.get(key, 0) + kappa * sprime[j]
        key = (
            tuple(sj + (1 if i == j else 0) for i, sj in enumerate(sprime)),
            tprime + 2,
        )
        merged[key] = merged.get(key, 0) - kappa * tprime
    return tuple(
        (sprime, tprime, kappa)
        for (sprime, tprime), kappa in sorted(merged.items())
        if kappa != 0
    )


def derivative_terms(charge: Charge, order: MultiIndex) -> DerivativeExpansion:
    """Exact symbolic expansion of D^order applied to q / ||x - a||."""
    order = tuple(int(s) for s in order)
    if any(s < 0 for s in order):
        raise ValueError("multi-index entries must be nonnegative")
    if len(order) != charge.d:
        raise ValueError("multi-index dimension mismatch")
    terms = []
    for sprime, tprime, kappa in _unit_expansion(charge.d, order):
        terms.append(PolyTerm(kappa=kappa * charge.q, num=sprime, den_pow=tprime))
    return DerivativeExpansion(charge=charge, order=order, terms=tuple(terms))


def evaluate_expansion(exp: DerivativeExpansion, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    a = np.asarray(exp.charge.position, dtype=float)
    dx = x - a
    r2 = float(np.dot(dx, dx))
    if r2 == 0.0:
        raise SingularPoint("expansion evaluated at the charge position")
    r = math.sqrt(r2)
    total = 0.0
    for term in exp.terms:
        mono = 1.0
        for dj, sj in zip(dx, term.num):
            if sj:
                mono *= dj**sj
        total += term.kappa * mono / r**term.den_pow
    return total


def derivative_bound(charge: Charge, k: int, r: float) -> float:
    """Certified bound k! 2^k |q| / r^(k+1) on any k-th partial at distance >= r."""
    if r <= 0:
        raise ValueError("distance must be positive")
    if k < 0:
        raise ValueError("order must be nonnegative")
    return math.factorial(k) * 2.0**k * abs(charge.q) / r ** (k + 1)


def max_partial(sys: ChargeSystem, x: Sequence[float], k: int) -> float:
    """M^(k)(x): max magnitude over all order-k partials, from exact expansions."""
    best = 0.0
    for s in multi_indices(sys.d, k):
        val = sum(evaluate_expansion(derivative_terms(c, s), x) for c in sys.charges)
        best = max(best, abs(val))
    return best


def hessian(sys: ChargeSystem, x: Sequence[float]) -> np.ndarray:
    """Symmetric matrix of second partials, assembled from exact expansions."""
    x = np.asarray(x, dtype=float)
    _check_not_singular(x, sys.positions(), _guard_for(sys))
    d = sys.d
    H = np.zeros((d, d))
    for j in range(d):
        for l in range(j, d):
            s = tuple(
                (2 if (i == j == l) else 1 if i in (j, l) else 0) for i in range(d)
            )
            val = sum(
                evaluate_expansion(derivative_terms(c, s), x) for c in sys.charges
            )
            H[j, l] = H[l, j] = val
    return H


def _cofactor_det(m: np.ndarray) -> float:
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    if n == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * m[0, j] * _cofactor_det(minor)
    return total


def hessian_det(sys: ChargeSystem, x: Sequence[float]) -> float:
    """Determinant of the Hessian by cofactor expansion (exact arithmetic order)."""
    return _cofactor_det(hessian(sys, x))
