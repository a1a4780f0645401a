"""Variable-coarseness grids around charge singularities.

Pipeline geometry: exclusion boxes certified free of near-equilibria,
splitting hyperplanes through every charge's box faces, per-axis cut
schedules that refine exponentially toward each charge, and enumeration
of the minimal grid cells inside a bounded polytope domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyPolytope, TooFewCharges, UnboundedDomain
from .potential import ChargeSystem

CUT_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by per-axis lower and upper corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("corner dimension mismatch")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("box has lo > hi")

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.hi) + np.array(self.lo)) / 2.0

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= np.array(self.lo) - tol) and np.all(x <= np.array(self.hi) + tol)
        )

    def min_distance(self, p) -> float:
        """Euclidean distance from the box to a point (0 if inside)."""
        p = np.asarray(p, dtype=float)
        gap = np.maximum(np.array(self.lo) - p, 0.0) + np.maximum(p - np.array(self.hi), 0.0)
        return float(np.linalg.norm(gap))


class Polytope:
    """Bounded convex region {x : A x <= b} given by half-space rows."""

    def __init__(self, normals, offsets):
        self.A = np.atleast_2d(np.asarray(normals, dtype=float))
        self.b = np.asarray(offsets, dtype=float).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("row count mismatch between normals and offsets")

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_box(cls, box: Box) -> "Polytope":
        d = box.d
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([box.hi, -np.array(box.lo)]))

    def with_rows(self, normals, offsets) -> "Polytope":
        return Polytope(
            np.vstack([self.A, np.atleast_2d(normals)]),
            np.concatenate([self.b, np.atleast_1d(offsets)]),
        )

    def with_box(self, box: Box) -> "Polytope":
        return self.with_rows(Polytope.from_box(box).A, Polytope.from_box(box).b)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x <= self.b + tol))

    def is_box_like(self) -> bool:
        """True when every row constrains a single coordinate."""
        return bool(np.all(np.sum(self.A != 0.0, axis=1) <= 1))

    def axis_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis [lo, hi] implied by single-coordinate rows only."""
        lo = np.full(self.d, -np.inf)
        hi = np.full(self.d, np.inf)
        for row, off in zip(self.A, self.b):
            nz = np.nonzero(row)[0]
            if len(nz) != 1:
                continue
            j = nz[0]
            if row[j] > 0:
                hi[j] = min(hi[j], off / row[j])
            else:
                lo[j] = max(lo[j], off / row[j])
        return lo, hi

    def is_empty(self) -> bool:
        res = linprog(
            np.zeros(self.d), A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.d,
            method="highs",
        )
        if res.status == 3:
            return False  # unbounded but nonempty
        return res.status == 2

    def interior_point(self) -> np.ndarray:
        """Chebyshev-style feasible point; raises EmptyPolytope when none exists."""
        norms = np.linalg.norm(self.A, axis=1)
        norms[norms == 0] = 1.0
        c = np.zeros(self.d + 1)
        c[-1] = -1.0
        A = np.hstack([self.A, norms[:, None]])
        res = linprog(
            c, A_ub=A, b_ub=self.b,
            bounds=[(None, None)] * self.d + [(0, None)], method="highs",
        )
        if res.status == 2 or res.x is None:
            raise EmptyPolytope("no feasible point in the polytope")
        return res.x[:-1]

    def bounding_box(self) -> Box:
        lo, hi = [], []
        for j in range(self.d):
            c = np.zeros(self.d)
            for sign, dest in ((1.0, lo), (-1.0, hi)):
                c[j] = sign
                res = linprog(
                    c, A_ub=self.A, b_ub=self.b,
                    bounds=[(None, None)] * self.d, method="highs",
                )
                if res.status == 3:
                    raise UnboundedDomain(f"polytope unbounded along axis {j}")
                if res.status == 2 or res.x is None:
                    raise EmptyPolytope("cannot bound an empty polytope")
                dest.append(res.x[j])
            c[j] = 0.0
        return Box(tuple(lo), tuple(hi))


def project(x, X: Polytope, tol: float = 1e-10, max_sweeps: int = 20000) -> np.ndarray:
    """Euclidean projection of x onto X.

    Exact per-axis clamping when every row is single-coordinate; otherwise
    Dykstra's alternating projections onto the half-spaces, which converges
    to the true projection for intersections of convex sets.
    """
    x = np.asarray(x, dtype=float)
    if X.contains(x, tol=0.0):
        return x.copy()
    if X.is_box_like():
        lo, hi = X.axis_bounds()
        if np.any(lo > hi + 1e-12):
            raise EmptyPolytope("empty box intersection")
        return np.clip(x, np.minimum(lo, hi), hi)
    norms2 = np.einsum("ij,ij->i", X.A, X.A)
    y = x.copy()
    corrections = np.zeros((len(X.b), X.d))
    for _ in range(max_sweeps):
        moved = 0.0
        for i in range(len(X.b)):
            if norms2[i] == 0.0:
                continue
            z = y + corrections[i]
            viol = X.A[i] @ z - X.b[i]
            if viol > 0:
                step = (viol / norms2[i]) * X.A[i]
                y_new = z - step
            else:
                y_new = z
            corrections[i] = z - y_new
            moved = max(moved, float(np.max(np.abs(y_new - y))))
            y = y_new
        if moved < 1e-13 and np.all(X.A @ y <= X.b + tol):
            break
    if not np.all(X.A @ y <= X.b + 1e-9):
        # Dykstra failed to settle; fall back to a feasible interior point.
        y = X.interior_point()
        if y is None or not np.all(X.A @ y <= X.b + 1e-9):
            raise EmptyPolytope("projection target appears infeasible")
    return y


@dataclass(frozen=True)
class GridCell:
    """A minimal grid box together with its anchor point inside cell ∩ X."""

    box: Box
    anchor: tuple[float, ...]
    index: tuple[int, ...]


def exclusion_radius(sys: ChargeSystem, eps: float) -> float:
    """Half-side of the per-charge hypercube certified free of eps-equilibria.

    rho = 1 / (d * sqrt(d) * (4 n q_max + eps)) for a normalized system with
    at least two charges; always <= 1/2.
    """
    if sys.n < 2:
        raise TooFewCharges("exclusion radius needs at least two charges")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    d = sys.d
    rho = 1.0 / (d * math.sqrt(d) * (4.0 * sys.n * sys.q_max + eps))
    return rho


def charge_boxes(sys: ChargeSystem, rho: float) -> list[Box]:
    return [
        Box(tuple(p - rho for p in c.position), tuple(p + rho for p in c.position))
        for c in sys.charges
    ]


def split_domain(X: Polytope, sys: ChargeSystem, rho: float) -> list[Polytope]:
    """Split X by the hyperplanes a_{i,j} ± rho into convex pieces.

    Pieces lying inside some charge's rho-box and empty pieces are dropped.
    At most (2n+1)^d pieces are returned, in lexicographic slab order.
    """
    d = sys.d
    bbox = X.bounding_box()
    axis_cuts: list[np.ndarray] = []
    for j in range(d):
        vals = [bbox.lo[j], bbox.hi[j]]
        for c in sys.charges:
            vals.extend([c.position[j] - rho, c.position[j] + rho])
        vals = [v for v in vals if bbox.lo[j] - CUT_MERGE_TOL <= v <= bbox.hi[j] + CUT_MERGE_TOL]
        vals.extend([bbox.lo[j], bbox.hi[j]])
        axis_cuts.append(merge_cuts(vals))
    pieces = []
    for idx in _lex_indices([len(c) - 1 for c in axis_cuts]):
        lo = tuple(axis_cuts[j][idx[j]] for j in range(d))
        hi = tuple(axis_cuts[j][idx[j] + 1] for j in range(d))
        slab = Box(lo, hi)
        if _inside_some_charge_box(slab, sys, rho):
            continue
        piece = X.with_box(slab)
        if piece.is_empty():
            continue
        pieces.append(piece)
    return pieces


def _inside_some_charge_box(slab: Box, sys: ChargeSystem, rho: float) -> bool:
    tol = CUT_MERGE_TOL
    for c in sys.charges:
        if all(
            c.position[j] - rho - tol <= slab.lo[j] and slab.hi[j] <= c.position[j] + rho + tol
            for j in range(sys.d)
        ):
            return True
    return False


def merge_cuts(values: Iterable[float], tol: float = CUT_MERGE_TOL) -> np.ndarray:
    """Sort and deduplicate cut coordinates, keeping the smaller of near-ties."""
    vals = sorted(float(v) for v in values)
    out: list[float] = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(v)
    return np.array(out)


def beta_schedule(beta_min: float, width: float) -> list[float]:
    """Doubling coarseness levels beta_min * 2^t for t = 0..t_max.

    t_max is the smallest t >= 1 with beta_min * 2^t >= width.
    """
    if beta_min <= 0:
        raise ValueError("beta_min must be positive")
    t_max = 1
    while beta_min * 2.0**t_max < width and t_max < 200:
        t_max += 1
    return [beta_min * 2.0**t for t in range(t_max + 1)]


def uniform_cuts(lo: float, hi: float, pieces: int) -> np.ndarray:
    return lo + (hi - lo) * np.arange(pieces + 1) / pieces


def build_axis_cuts(params_covers: Sequence, X: Polytope) -> list[np.ndarray]:
    """Per-axis sorted cut coordinates for the variable-coarseness grid.

    Each family contributes the 4Cd+1 uniform cuts of the domain bounding
    box and, for every beta in the doubling schedule, the 4Cd+1 uniform
    cuts of each of its cover boxes at that beta (clipped to the domain).
    """
    bbox = X.bounding_box()
    d = bbox.d
    width = float(np.max(bbox.widths))
    cuts: list[list[float]] = [[bbox.lo[j], bbox.hi[j]] for j in range(d)]
    for params, cover in params_covers:
        pieces = 4 * params.C * d
        for j in range(d):
            cuts[j].extend(uniform_cuts(bbox.lo[j], bbox.hi[j], pieces))
        for beta in beta_schedule(params.beta_min, width):
            for box in cover.boxes(beta):
                for j in range(d):
                    for v in uniform_cuts(box.lo[j], box.hi[j], pieces):
                        if bbox.lo[j] - CUT_MERGE_TOL <= v <= bbox.hi[j] + CUT_MERGE_TOL:
                            cuts[j].append(v)
    return [merge_cuts(c) for c in cuts]


def _lex_indices(counts: Sequence[int]) -> Iterator[tuple[int, ...]]:
    if any(c <= 0 for c in counts):
        return
    idx = [0] * len(counts)
    while True:
        yield tuple(idx)
        j = len(counts) - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < counts[j]:
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return


def enumerate_cells(cuts: Sequence[np.ndarray], X: Polytope) -> Iterator[GridCell]:
    """Stream the minimal grid boxes with nonempty intersection with X.

    Deterministic lexicographic order by per-axis interval index; anchor is
    the projection of the box center onto cell ∩ X.
    """
    d = len(cuts)
    box_like = X.is_box_like()
    for idx in _lex_indices([len(c) - 1 for c in cuts]):
        lo = tuple(float(cuts[j][idx[j]]) for j in range(d))
        hi = tuple(float(cuts[j][idx[j] + 1]) for j in range(d))
        box = Box(lo, hi)
        # Sound rejection: some half-space excludes the whole box.
        low = np.array(lo)
        high = np.array(hi)
        mins = X.A @ ((low + high) / 2) - np.abs(X.A) @ ((high - low) / 2)
        if np.any(mins > X.b + 1e-12):
            continue
        cell_poly = X.with_box(box)
        if not box_like and cell_poly.is_empty():
            continue
        anchor = project(box.center, cell_poly)
        yield GridCell(box=box, anchor=tuple(float(v) for v in anchor), index=idx)
