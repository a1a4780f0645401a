"""Top-level equilibrium solvers.

solve_weak finds a point with ||grad f||_inf <= eps or certifies that no
point in the domain reaches delta.  solve_strong finds a point provably
within eps of an exact gradient zero whose Hessian determinant has
magnitude >= delta, certifying existence with a Poincare-Miranda face
check.  Both run the same per-cell machinery: variable-coarseness grid,
certified Taylor models of the gradient (and Hessian determinant), and the
interval feasibility kernel.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DegreeOverflow,
    Exhausted,
    NotFound,
    SingularHessian,
)
from .grid import (
    Box,
    GridCell,
    Polytope,
    build_axis_cuts,
    exclusion_radius,
    project,
    split_domain,
)
from .oracle import newton_refine
from .polysolve import DEFAULT_BUDGET, SolveOutcome, solve_system
from .potential import (
    ChargeSystem,
    eval_gradient,
    hessian,
    hessian_det,
    mi_factorial,
    multi_indices_upto,
)
from .taylor import (
    MAX_DEGREE,
    Polynomial,
    TaylorModel,
    _flat_tables,
    derivative_values,
    lipschitz_axis_bounds,
)
from .wellbehaved import single_charge_params, sum_params

DELTA_FLOOR = 2.0**-40
EPS_SYS_FLOOR = 1e-7


@dataclass(frozen=True)
class WeakAnswer:
    """Point(x, residual) when found, else the no-delta-solution certificate."""

    found: bool
    point: tuple[float, ...] | None = None
    residual: float | None = None
    delta: float | None = None
    all_points: tuple[tuple[float, ...], ...] | None = None


@dataclass(frozen=True)
class StrongParams:
    delta_prime: float
    alpha: float
    eps_prime: float


@dataclass(frozen=True)
class StrongAnswer:
    point: tuple[float, ...]
    radius: float
    hessian_det: float
    certified: bool
    delta: float
    alpha: float


def strong_params(B, C, beta_min, delta, eps, d) -> StrongParams:
    """The three cascade constants for the strong solver.

    delta' = (delta/2) (beta_min^2 / (2 d C^2 2^B))^(d-1);
    alpha  = min(eps/sqrt(d), delta' beta_min^3 / (8 d^2 C^3 2^B));
    eps'   = (3/16) delta' alpha.
    """
    if min(C, beta_min, delta, eps, d) <= 0 or B < 0:
        raise ValueError("strong_params inputs must be positive (B >= 0)")
    delta_prime = (delta / 2.0) * (beta_min**2 / (2.0 * d * C**2 * 2.0**B)) ** (d - 1)
    alpha = min(
        eps / math.sqrt(d),
        delta_prime * beta_min**3 / (8.0 * d**2 * C**3 * 2.0**B),
    )
    eps_prime = (3.0 / 16.0) * delta_prime * alpha
    return StrongParams(delta_prime=delta_prime, alpha=alpha, eps_prime=eps_prime)


# ---------------------------------------------------------------------------
# normalization plumbing


@dataclass(frozen=True)
class _NormCtx:
    sys: ChargeSystem
    X: Polytope
    scale_x: float
    scale_q: float

    @property
    def grad_scale(self) -> float:
        """Multiplier taking an original gradient tolerance to normalized."""
        return self.scale_x**2 / self.scale_q


def _normalize(sys: ChargeSystem, X: Polytope) -> _NormCtx:
    ns = sys.normalized()
    return _NormCtx(sys=ns, X=Polytope(X.A, X.b / sys.scale_x),
                    scale_x=sys.scale_x, scale_q=sys.scale_q)


def _exclusion_rho(ns: ChargeSystem, eps: float) -> float:
    if ns.n >= 2:
        return exclusion_radius(ns, eps)
    # Single charge: inside |x - a|_inf <= rho the charge's own force along
    # the largest-offset axis exceeds eps, so the box holds no eps-point.
    d = ns.d
    return 1.0 / (d * math.sqrt(d) * (4.0 * ns.q_max + eps))


# ---------------------------------------------------------------------------
# vectorized cell survival


def _grad_enclosures(ns: ChargeSystem, LO: np.ndarray, HI: np.ndarray):
    """Per-cell interval enclosures of each gradient component (vectorized)."""
    m, d = LO.shape
    glo = np.zeros((m, d))
    ghi = np.zeros((m, d))
    for c in ns.charges:
        a = np.array(c.position)
        dlo = LO - a
        dhi = HI - a
        absmin = np.where((dlo <= 0) & (dhi >= 0), 0.0, np.minimum(np.abs(dlo), np.abs(dhi)))
        absmax = np.maximum(np.abs(dlo), np.abs(dhi))
        r3min = np.maximum(np.sum(absmin**2, axis=1) ** 1.5 * (1 - 1e-12), 1e-300)
        r3max = np.sum(absmax**2, axis=1) ** 1.5 * (1 + 1e-12)
        for j in range(d):
            n1 = dlo[:, j]
            n2 = dhi[:, j]
            qlo = np.where(n1 >= 0, n1 / r3max, n1 / r3min)
            qhi = np.where(n2 <= 0, n2 / r3max, n2 / r3min)
            c1 = -c.q * qlo
            c2 = -c.q * qhi
            glo[:, j] += np.minimum(c1, c2)
            ghi[:, j] += np.maximum(c1, c2)
    pad = 1e-12 * (np.abs(glo) + np.abs(ghi)) + 1e-300
    return glo - pad, ghi + pad


def _iter_survivor_cells(
    ns: ChargeSystem, piece: Polytope, cuts: Sequence[np.ndarray], thresh: float
) -> Iterator[GridCell]:
    """Cells of the cut grid that intersect the piece and may contain a point
    with every |grad component| <= thresh.  Lexicographic order."""
    d = len(cuts)
    los = [c[:-1] for c in cuts]
    his = [c[1:] for c in cuts]
    counts = [len(a) for a in los]
    if any(c == 0 for c in counts):
        return
    rest = int(np.prod(counts[1:])) if d > 1 else 1
    chunk = max(1, int(2e5 // max(1, rest)))
    box_like = piece.is_box_like()
    for start in range(0, counts[0], chunk):
        stop = min(start + chunk, counts[0])
        mesh_lo = np.meshgrid(los[0][start:stop], *los[1:], indexing="ij")
        mesh_hi = np.meshgrid(his[0][start:stop], *his[1:], indexing="ij")
        LO = np.stack([g.ravel() for g in mesh_lo], axis=1)
        HI = np.stack([g.ravel() for g in mesh_hi], axis=1)
        mid = (LO + HI) / 2.0
        half = (HI - LO) / 2.0
        # sound piece rejection: some half-space excludes the whole cell
        keep = np.all(mid @ piece.A.T - half @ np.abs(piece.A).T <= piece.b + 1e-12, axis=1)
        if not np.any(keep):
            continue
        idx = np.nonzero(keep)[0]
        glo, ghi = _grad_enclosures(ns, LO[idx], HI[idx])
        ok = np.all((glo <= thresh) & (ghi >= -thresh), axis=1)
        idx = idx[ok]
        shape = tuple([stop - start] + counts[1:])
        for flat in idx:
            multi = np.unravel_index(int(flat), shape)
            index = (int(multi[0]) + start,) + tuple(int(v) for v in multi[1:])
            box = Box(tuple(LO[flat]), tuple(HI[flat]))
            cell_poly = piece.with_box(box)
            if not box_like and cell_poly.is_empty():
                continue
            try:
                anchor = project(box.center, cell_poly)
            except Exception:
                continue
            if not cell_poly.contains(anchor, tol=1e-7):
                continue
            yield GridCell(box=box, anchor=tuple(float(v) for v in anchor), index=index)


# ---------------------------------------------------------------------------
# per-cell certified models


def _remainder(ns: ChargeSystem, dists, k: int, osum: int, sigma: float) -> float:
    """Lagrange bound for an order-(k-1) model of an order-osum derivative."""
    total = 0.0
    for c, r in zip(ns.charges, dists):
        total += (
            math.factorial(k + osum) * 2.0 ** (k + osum) * abs(c.q) / r ** (k + osum + 1)
        )
    return total * sigma**k / math.factorial(k)


def _pick_order(ns, dists, osums, sigma, target) -> int:
    for k in range(2, MAX_DEGREE):
        if all(_remainder(ns, dists, k, o, sigma) <= target / 2.0 for o in osums):
            return k
    raise DegreeOverflow("no expansion order meets the error target on this cell")


def _build_models(
    ns: ChargeSystem, cell: GridCell, offsets: Sequence[tuple[int, ...]], target: float
) -> list[TaylorModel]:
    """Taylor models of D^offset f over the cell, each with err <= target."""
    d = ns.d
    anchor = np.array(cell.anchor)
    radii = np.maximum(np.array(cell.box.hi) - anchor, anchor - np.array(cell.box.lo))
    radii = radii.clip(min=1e-300)
    sigma = float(np.sum(radii))
    dists = [cell.box.min_distance(c.position) for c in ns.charges]
    if min(dists) <= 0:
        raise DegreeOverflow("cell touches a charge position")
    osums = sorted({sum(o) for o in offsets})
    k = _pick_order(ns, dists, osums, sigma, target)
    kmax = k - 1 + max(osums)
    mi_list, vals = derivative_values(ns, anchor, kmax)
    index = {s: i for i, s in enumerate(mi_list)}
    scale = tuple(float(v) for v in radii)
    models = []
    for o in offsets:
        coeffs = {}
        for s in multi_indices_upto(d, k - 1):
            full = tuple(x + y for x, y in zip(s, o))
            c = vals[index[full]] / mi_factorial(s)
            c *= float(np.prod(radii ** np.array(s)))
            if not math.isfinite(c):
                raise DegreeOverflow("model coefficient overflow")
            if c != 0.0:
                coeffs[s] = c
        poly = Polynomial(d, coeffs)
        S, carr = poly.arrays()
        slack = 1e-13 * (float(np.abs(carr).sum()) + 1e-30)
        err = _remainder(ns, dists, k, sum(o), sigma) + slack
        models.append(
            TaylorModel(anchor=tuple(anchor), poly=poly, err=err, cell=cell.box, scale=scale)
        )
    return models


def _poly_abs_bound(model: TaylorModel) -> float:
    """Sound bound on |true function| over the cell (unit local box)."""
    S, c = model.poly.arrays()
    return float(np.abs(c).sum()) * 1.0 + model.err


def _det_model(ns: ChargeSystem, cell: GridCell, target: float) -> TaylorModel:
    """Certified Taylor model of det(Hessian f) over the cell.

    Built from second-partial models combined by polynomial products; errors
    propagate through |g1 g2 - P1 P2| <= E1 G2 + E2 G1 + E1 E2.
    """
    d = ns.d
    pairs = [(j, l) for j in range(d) for l in range(j, d)]
    offsets = [
        tuple((2 if (i == j == l) else 1 if i in (j, l) else 0) for i in range(d))
        for (j, l) in pairs
    ]
    factor_target = target
    for _ in range(8):
        models = _build_models(ns, cell, offsets, factor_target)
        table = {}
        for (j, l), mdl in zip(pairs, models):
            table[(j, l)] = table[(l, j)] = mdl
        det_poly = Polynomial(d, {})
        err = 0.0
        for perm in itertools.permutations(range(d)):
            sign = _perm_sign(perm)
            poly = None
            E = 0.0
            G = 1.0
            for j in range(d):
                mdl = table[(j, perm[j])]
                g_bound = _poly_abs_bound(mdl)
                if poly is None:
                    poly, E, G = mdl.poly, mdl.err, g_bound
                else:
                    E = E * g_bound + mdl.err * G + E * mdl.err
                    G = G * g_bound
                    poly = poly * mdl.poly
            det_poly = _poly_add(det_poly, poly, sign)
            err += E
        if err <= target:
            first = models[0]
            return TaylorModel(
                anchor=first.anchor, poly=det_poly, err=err, cell=cell.box, scale=first.scale
            )
        factor_target *= max(1e-3, 0.5 * target / err)
    raise DegreeOverflow("determinant model cannot meet the error target")


def _perm_sign(perm) -> float:
    sign = 1.0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _poly_add(a: Polynomial, b: Polynomial, coef: float) -> Polynomial:
    out = dict(a.coeffs)
    for s, c in b.coeffs.items():
        out[s] = out.get(s, 0.0) + coef * c
    return Polynomial(a.d, out)


# ---------------------------------------------------------------------------
# shared per-cell kernel plumbing


def _local_frame(cell: GridCell, piece: Polytope, model: TaylorModel):
    """Cell box and polytope mapped to the model's local u coordinates."""
    anchor = np.array(model.anchor)
    scale = np.array(model.scale)
    lo_u = (np.array(cell.box.lo) - anchor) / scale
    hi_u = (np.array(cell.box.hi) - anchor) / scale
    box_u = Box(tuple(lo_u), tuple(hi_u))
    A_u = piece.A * scale[None, :]
    b_u = piece.b - piece.A @ anchor
    return box_u, Polytope(A_u, b_u)


def _grad_polys(models: Sequence[TaylorModel], T: float) -> list[Polynomial]:
    polys = []
    for mdl in models:
        polys.append(mdl.poly.constant_shifted(mdl.err - T))
        polys.append(mdl.poly.negated().constant_shifted(mdl.err - T))
    return polys


def _to_global(model: TaylorModel, u) -> np.ndarray:
    return np.array(model.anchor) + np.array(model.scale) * np.asarray(u)


def _grid_for_piece(ns: ChargeSystem, piece: Polytope, rho: float):
    tau = min(rho, 1.0)
    params_covers = [single_charge_params(c, tau) for c in ns.charges]
    return build_axis_cuts(params_covers, piece), params_covers


# ---------------------------------------------------------------------------
# weak solver


def solve_weak(
    sys: ChargeSystem,
    X: Polytope,
    eps: float,
    delta: float,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    model_sink: Callable | None = None,
    find_all: bool = False,
) -> WeakAnswer:
    """Weak approximate equilibrium: Point with ||grad f||_inf <= eps, or a
    certificate that no x in X has ||grad f||_inf <= delta."""
    if not (eps > delta > 0):
        raise ValueError("need eps > delta > 0")
    ctx = _normalize(sys, X)
    ns = ctx.sys
    eps_h = eps * ctx.grad_scale
    delta_h = delta * ctx.grad_scale
    rho = _exclusion_rho(ns, delta_h)
    T = (eps_h + delta_h) / 2.0
    margin = (eps_h - delta_h) / 2.0
    e_target = margin / 4.0
    eps_kernel = margin / 2.0
    offsets = [tuple(1 if i == j else 0 for i in range(ns.d)) for j in range(ns.d)]
    found: list[tuple[float, ...]] = []

    def process(cell: GridCell, piece: Polytope):
        models = _build_models(ns, cell, offsets, e_target)
        if model_sink is not None:
            model_sink(cell, models)
        box_u, X_u = _local_frame(cell, piece, models[0])
        polys = _grad_polys(models, T)
        out = solve_system(polys, X_u, box_u, eps_kernel, budget=budget)
        if not out.found:
            return None
        x_n = _to_global(models[0], out.point)
        if float(np.max(np.abs(eval_gradient(ns, x_n)))) > eps_h:
            return None
        return tuple(float(v) for v in (x_n * ctx.scale_x))

    for piece in split_domain(ctx.X, ns, rho):
        cuts, _ = _grid_for_piece(ns, piece, rho)
        cells = _iter_survivor_cells(ns, piece, cuts, T)
        if threads > 1:
            cells = list(cells)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda c: process(c, piece), cells))
            hits = [r for r in results if r is not None]
        else:
            hits = []
            for cell in cells:
                r = process(cell, piece)
                if r is not None:
                    hits.append(r)
                    if not find_all:
                        break
        for x in hits:
            if not find_all:
                residual = float(np.max(np.abs(eval_gradient(sys, x))))
                return WeakAnswer(found=True, point=x, residual=residual, delta=delta)
            found.append(x)
    if find_all and found:
        x = found[0]
        return WeakAnswer(
            found=True,
            point=x,
            residual=float(np.max(np.abs(eval_gradient(sys, x)))),
            delta=delta,
            all_points=tuple(found),
        )
    return WeakAnswer(found=False, delta=delta)


# ---------------------------------------------------------------------------
# strong solver


def certify_pm(sys: ChargeSystem, x, alpha: float) -> bool:
    """Poincare-Miranda certificate: an exact gradient zero lies within
    ||.||_inf <= alpha of x.

    Checks the face sign conditions of h(u) = H(x)^{-1} grad f(x + u) on the
    cube of half-width alpha, via the analytic bound |h_j(u) - u_j| <=
    h0 + c2 alpha^2 from local third-derivative bounds, with a dense face
    sampling fallback.
    """
    x = np.asarray(x, dtype=float)
    d = sys.d
    A = hessian(sys, x)
    detA = float(np.linalg.det(A))
    if not math.isfinite(detA) or abs(detA) < 1e-300:
        raise SingularHessian("Hessian is numerically singular at the candidate")
    lam1 = float(np.min(np.abs(np.linalg.eigvalsh(A)))) * (1 - 1e-9)
    if lam1 <= 0:
        raise SingularHessian("Hessian has a vanishing eigenvalue")
    dists = [float(np.linalg.norm(x - np.array(c.position))) for c in sys.charges]
    reach = alpha * math.sqrt(d)
    if min(dists) <= reach:
        return False
    m3 = sum(48.0 * abs(c.q) / (r - reach) ** 4 for c, r in zip(sys.charges, dists))
    g0 = eval_gradient(sys, x)
    h0 = float(np.max(np.abs(np.linalg.solve(A, g0))))
    c2 = math.sqrt(d) * d**2 * m3 / (2.0 * lam1)
    if h0 <= 3.0 * alpha / 8.0 and c2 * alpha**2 <= 3.0 * alpha / 8.0:
        return True
    return _certify_by_sampling(sys, x, alpha, A, lam1, dists, reach)


def _certify_by_sampling(sys, x, alpha, A, lam1, dists, reach, n_side: int = 17) -> bool:
    d = sys.d
    m2 = sum(12.0 * abs(c.q) / (r - reach) ** 3 for c, r in zip(sys.charges, dists))
    lip_h = math.sqrt(d) * m2 * d / lam1
    spacing = 2.0 * alpha / (n_side - 1)
    margin = lip_h * spacing * math.sqrt(d)
    axes = [np.linspace(-alpha, alpha, n_side) for _ in range(d - 1)] or [np.zeros(1)]
    for j in range(d):
        for sgn in (1.0, -1.0):
            for combo in itertools.product(*axes):
                u = np.zeros(d)
                pos = 0
                for i in range(d):
                    if i == j:
                        u[i] = sgn * alpha
                    else:
                        u[i] = combo[pos]
                        pos += 1
                h = np.linalg.solve(A, eval_gradient(sys, x + u))
                if sgn * h[j] <= margin:
                    return False
    return True


def choose_alpha(sys: ChargeSystem, x, eps: float) -> float:
    """Largest certifiable half-width <= eps/sqrt(d) from local constants."""
    x = np.asarray(x, dtype=float)
    d = sys.d
    A = hessian(sys, x)
    lam1 = float(np.min(np.abs(np.linalg.eigvalsh(A)))) * (1 - 1e-9)
    if lam1 <= 0:
        raise SingularHessian("cannot choose a certification radius")
    dists = [float(np.linalg.norm(x - np.array(c.position))) for c in sys.charges]
    r_safe = min(dists) / 2.0
    m3 = sum(48.0 * abs(c.q) / max(r - r_safe, r / 2.0) ** 4 for c, r in zip(sys.charges, dists))
    c2 = math.sqrt(d) * d**2 * m3 / (2.0 * lam1)
    return min(eps / math.sqrt(d), 3.0 / (8.0 * c2), r_safe / math.sqrt(d))


def solve_strong(
    sys: ChargeSystem,
    X: Polytope,
    eps: float,
    delta: float,
    budget: int = DEFAULT_BUDGET,
    eps_floor: float = EPS_SYS_FLOOR,
) -> StrongAnswer:
    """Strong approximate equilibrium under delta-strong non-degeneracy.

    Solves |df/dx_j| <= eps' together with det Hessian >= delta - eps' (and
    the mirrored negative branch) through the weak machinery, then certifies
    the found point with a Poincare-Miranda box of half-width alpha.
    Raises NotFound when both branches are infeasible.
    """
    if eps <= 0 or delta <= 0:
        raise ValueError("eps and delta must be positive")
    ctx = _normalize(sys, X)
    ns = ctx.sys
    d = ns.d
    eps_h = eps / ctx.scale_x
    delta_h = delta * ctx.scale_x ** (3 * d) / ctx.scale_q**d
    rho = _exclusion_rho(ns, 0.0)
    tau = min(rho, 1.0)
    params_f, _ = sum_params(
        [(1.0,) + single_charge_params(c, tau) for c in ns.charges]
    )
    sp = strong_params(params_f.B, params_f.C, params_f.beta_min, delta_h, eps_h, d)
    eps_sys = max(sp.eps_prime, eps_floor)
    T_g = 0.75 * eps_sys
    eps_kernel = eps_sys / 8.0
    grad_offsets = [tuple(1 if i == j else 0 for i in range(d)) for j in range(d)]

    for piece in split_domain(ctx.X, ns, rho):
        cuts, _ = _grid_for_piece(ns, piece, rho)
        for cell in _iter_survivor_cells(ns, piece, cuts, T_g):
            grad_models = _build_models(ns, cell, grad_offsets, eps_sys / 16.0)
            det_model = _det_model(ns, cell, eps_sys / 8.0)
            box_u, X_u = _local_frame(cell, piece, grad_models[0])
            base_polys = _grad_polys(grad_models, T_g)
            for sign in (1.0, -1.0):
                det_poly = det_model.poly if sign < 0 else det_model.poly.negated()
                det_poly = det_poly.constant_shifted(
                    delta_h - eps_sys / 2.0 + det_model.err
                )
                out = solve_system(
                    base_polys + [det_poly], X_u, box_u, eps_kernel, budget=budget
                )
                if not out.found:
                    continue
                z = _to_global(grad_models[0], out.point)
                answer = _certify_candidate(ctx, ns, z, eps_h, eps, delta, sp)
                if answer is not None:
                    return answer
    raise NotFound(
        f"no delta-strongly non-degenerate equilibrium found (delta={delta})"
    )


def _certify_candidate(ctx, ns, z, eps_h, eps, delta, sp) -> StrongAnswer | None:
    candidates = [np.asarray(z, dtype=float)]
    try:
        refined, converged, _ = newton_refine(ns, z, max_iters=30)
        if converged and ctx.X.contains(refined, tol=1e-9):
            candidates.append(refined)
    except Exception:
        pass
    best = None
    for cand in candidates:
        try:
            # The face certificate is self-contained, so the half-width can be
            # chosen from local constants; it never exceeds eps_h / sqrt(d).
            alpha = choose_alpha(ns, cand, eps_h)
            if alpha <= 0:
                continue
            certified = certify_pm(ns, cand, alpha)
        except SingularHessian:
            continue
        x = tuple(float(v) for v in (cand * ctx.scale_x))
        det_x = hessian_det(ns, cand) * (ctx.scale_q / ctx.scale_x**3) ** ns.d
        answer = StrongAnswer(
            point=x,
            radius=eps,
            hessian_det=det_x,
            certified=certified,
            delta=delta,
            alpha=alpha * ctx.scale_x,
        )
        if certified:
            return answer
        if best is None:
            best = answer
    return best


def solve_strong_auto(
    sys: ChargeSystem,
    X: Polytope,
    eps: float,
    budget: int = DEFAULT_BUDGET,
    delta_floor: float = DELTA_FLOOR,
) -> StrongAnswer:
    """Try solve_strong with delta = 1, 1/2, 1/4, ... down to the floor."""
    delta = 1.0
    while delta >= delta_floor:
        try:
            return solve_strong(sys, X, eps, delta, budget=budget)
        except NotFound:
            delta /= 2.0
    raise Exhausted(
        f"no strongly non-degenerate equilibrium down to delta = {delta_floor}",
        floor=delta_floor,
    )
