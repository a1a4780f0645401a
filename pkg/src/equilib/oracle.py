"""Independent ground-truth generators for testing the solvers.

Nothing here shares code with the certified pipeline: dense grid scans,
the classical two-charge bisection, nested central finite differences, and
damped Newton refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularHessian, TooFine
from .grid import Polytope
from .potential import ChargeSystem, MultiIndex, eval_gradient, eval_potential, hessian

SCAN_CAP = 10**8


@dataclass(frozen=True)
class ScanReport:
    h: float
    threshold: float
    points: tuple[tuple[float, ...], ...]
    min_grad_norm: float

    def serialize(self) -> str:
        lines = [f"h={self.h:.12g} threshold={self.threshold:.12g}"]
        lines.append(f"min_grad_norm={self.min_grad_norm:.12g}")
        for p in self.points:
            lines.append(" ".join(f"{v:.12f}" for v in p))
        return "\n".join(lines) + "\n"


def brute_force_scan(
    sys: ChargeSystem, X: Polytope, threshold: float, h: float
) -> ScanReport:
    """Exhaustive uniform-grid scan of ||grad f||_inf over X minus charge guards."""
    if h <= 0:
        raise ValueError("spacing must be positive")
    bbox = X.bounding_box()
    d = sys.d
    counts = [max(1, int(math.floor((bbox.hi[j] - bbox.lo[j]) / h)) + 1) for j in range(d)]
    total = 1
    for c in counts:
        total *= c
    if total > SCAN_CAP:
        raise TooFine(f"scan would need {total} grid points (cap {SCAN_CAP})")
    axes = [bbox.lo[j] + h * np.arange(counts[j]) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    inside = np.all(pts @ X.A.T <= X.b + 1e-12, axis=1)
    pts = pts[inside]
    pos = sys.positions()
    qs = sys.strengths()
    guard = 1e-12
    grad = np.zeros_like(pts)
    near = np.zeros(pts.shape[0], dtype=bool)
    for i in range(sys.n):
        diff = pts - pos[i]
        r2 = np.sum(diff * diff, axis=1)
        near |= r2 < guard**2
        r3 = np.where(r2 > 0, r2**1.5, np.inf)
        grad -= qs[i] * diff / r3[:, None]
    norms = np.max(np.abs(grad), axis=1)
    norms[near] = np.inf
    hits = pts[norms <= threshold]
    order = np.lexsort(tuple(hits[:, j] for j in range(d - 1, -1, -1))) if len(hits) else []
    hits = hits[order] if len(hits) else hits
    return ScanReport(
        h=h,
        threshold=threshold,
        points=tuple(tuple(float(v) for v in p) for p in hits),
        min_grad_norm=float(np.min(norms)) if len(norms) else math.inf,
    )


def two_charge_bisect(q1: float, q2: float, separation: float, tol: float = 1e-12) -> float:
    """Axial equilibrium position between two positive charges, by bisection.

    Solves q1/x^2 = q2/(sep - x)^2 on (0, sep); the interval halves exactly
    each iteration.
    """
    if q1 <= 0 or q2 <= 0:
        raise ValueError("bisection assumes positive charges")
    if separation <= 0:
        raise ValueError("separation must be positive")

    def force(x: float) -> float:
        return q1 / x**2 - q2 / (separation - x) ** 2

    lo, hi = separation * 1e-12, separation * (1 - 1e-12)
    flo = force(lo)
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        fm = force(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2.0


def _nested_central(sys: ChargeSystem, x: np.ndarray, s: tuple[int, ...], h: float) -> float:
    def rec(s_rem: tuple[int, ...], pt: np.ndarray) -> float:
        for j, sj in enumerate(s_rem):
            if sj > 0:
                e = np.zeros(sys.d)
                e[j] = h
                s_next = tuple(v - (1 if i == j else 0) for i, v in enumerate(s_rem))
                return (rec(s_next, pt + e) - rec(s_next, pt - e)) / (2.0 * h)
        return eval_potential(sys, pt)

    return rec(s, x)


def finite_difference(sys: ChargeSystem, x, s: MultiIndex, h: float | None = None) -> float:
    """Richardson-extrapolated nested central differences for D^s f, |s| <= 4.

    The step balances h^2 truncation against eps/h^|s| cancellation; the
    h vs h/2 extrapolation removes the leading truncation term, which keeps
    order-4 partials accurate to a few 1e-5 relative.
    """
    x = np.asarray(x, dtype=float)
    order = sum(s)
    if order > 4:
        raise ValueError("finite differences capped at |s| <= 4")
    if h is None:
        r = min(np.linalg.norm(x - np.array(c.position)) for c in sys.charges)
        h = 0.5 * r * 1e-16 ** (1.0 / (order + 4))
    d1 = _nested_central(sys, x, tuple(s), h)
    d2 = _nested_central(sys, x, tuple(s), h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def newton_refine(
    sys: ChargeSystem, x0, max_iters: int = 50, tol: float = 1e-12
) -> tuple[np.ndarray, bool, int]:
    """Damped Newton iteration on grad f; (point, converged, iterations)."""
    x = np.asarray(x0, dtype=float).copy()
    for it in range(max_iters):
        g = eval_gradient(sys, x)
        if float(np.max(np.abs(g))) <= tol:
            return x, True, it
        H = hessian(sys, x)
        det = float(np.linalg.det(H))
        if not math.isfinite(det) or abs(det) < 1e-300:
            raise SingularHessian("Hessian not invertible during refinement")
        step = np.linalg.solve(H, g)
        t = 1.0
        base = float(np.max(np.abs(g)))
        for _ in range(40):
            trial = x - t * step
            try:
                gt = eval_gradient(sys, trial)
            except Exception:
                t /= 2.0
                continue
            if float(np.max(np.abs(gt))) < base:
                x = trial
                break
            t /= 2.0
        else:
            return x, False, it + 1
    g = eval_gradient(sys, x)
    return x, float(np.max(np.abs(g))) <= tol, max_iters
