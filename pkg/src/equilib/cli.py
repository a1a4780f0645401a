"""Command-line front end.

Subcommands: solve-weak, solve-strong, grid, oracle, eval.  Exit codes:
0 success, 2 parse error, 3 subdivision budget exhausted, 4 no strong
equilibrium (NotFound/Exhausted), 5 SVG requested for d > 2, 6 oracle scan
too fine.  --json output is deterministic (no timestamps, full-precision
floats) and validates against docs/output_schema.json.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys

import numpy as np

from . import equilibrium, oracle
from .errors import (
    BudgetExceeded,
    EquilibError,
    Exhausted,
    NotFound,
    ParseError,
    TooFine,
)
from .grid import split_domain
from .instance import Instance, load_instance
from .potential import eval_gradient, eval_potential, hessian, hessian_det

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BUDGET = 3
EXIT_NOT_FOUND = 4
EXIT_SVG_DIM = 5
EXIT_TOO_FINE = 6


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        out = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    else:
        out = text
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def _tolerances(inst: Instance, args) -> tuple[float, float | None]:
    eps = args.epsilon if args.epsilon is not None else inst.epsilon
    delta = args.delta if args.delta is not None else inst.delta
    return eps, delta


def cmd_solve_weak(args) -> int:
    inst = load_instance(args.instance)
    eps, delta = _tolerances(inst, args)
    if delta is None:
        delta = eps / 100.0
    if not eps > delta > 0:
        raise ParseError("solve-weak needs epsilon > delta > 0")
    try:
        ans = equilibrium.solve_weak(
            inst.system, inst.domain, eps, delta,
            budget=args.budget, threads=args.threads,
        )
    except BudgetExceeded as exc:
        _sys.stderr.write(f"budget exceeded; unresolved cell: {exc.cell}\n")
        return EXIT_BUDGET
    if ans.found:
        payload = {
            "command": "solve-weak",
            "status": "point",
            "point": list(ans.point),
            "residual": ans.residual,
            "epsilon": eps,
            "delta": delta,
        }
        text = (
            f"point: {_fmt_vec(ans.point)}\n"
            f"gradient residual (inf-norm): {ans.residual:.17g} <= epsilon {eps:.17g}"
        )
    else:
        payload = {
            "command": "solve-weak",
            "status": "no-delta-solution",
            "epsilon": eps,
            "delta": delta,
        }
        text = f"no point with ||grad f||_inf <= delta = {delta:.17g} exists in the domain"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_solve_strong(args) -> int:
    inst = load_instance(args.instance)
    eps, delta = _tolerances(inst, args)
    try:
        if args.auto or delta is None:
            ans = equilibrium.solve_strong_auto(inst.system, inst.domain, eps, budget=args.budget)
        else:
            ans = equilibrium.solve_strong(inst.system, inst.domain, eps, delta, budget=args.budget)
    except (NotFound, Exhausted) as exc:
        _sys.stderr.write(f"{exc}\n")
        return EXIT_NOT_FOUND
    except BudgetExceeded as exc:
        _sys.stderr.write(f"budget exceeded; unresolved cell: {exc.cell}\n")
        return EXIT_BUDGET
    payload = {
        "command": "solve-strong",
        "status": "point",
        "point": list(ans.point),
        "radius": ans.radius,
        "hessian_det": ans.hessian_det,
        "alpha": ans.alpha,
        "delta": ans.delta,
        "certified": ans.certified,
    }
    text = (
        f"point: {_fmt_vec(ans.point)}\n"
        f"hessian determinant: {ans.hessian_det:.17g}\n"
        f"certification box half-width alpha: {ans.alpha:.17g}\n"
        f"certified: {ans.certified} (exact equilibrium within {ans.radius:.17g})"
    )
    _emit(args, payload, text)
    return EXIT_OK


def _grid_data(inst: Instance):
    """Cuts, a retained-cell stream, exclusion boxes, in original coordinates."""
    sysm = inst.system
    ctx = equilibrium._normalize(sysm, inst.domain)
    ns = ctx.sys
    delta = inst.delta if inst.delta is not None else inst.epsilon
    rho = equilibrium._exclusion_rho(ns, delta * ctx.grad_scale)
    sx = ctx.scale_x
    all_cuts = [[] for _ in range(inst.d)]
    pieces = []
    for piece in split_domain(ctx.X, ns, rho):
        cuts, _ = equilibrium._grid_for_piece(ns, piece, rho)
        for j in range(inst.d):
            all_cuts[j].extend(float(v) * sx for v in cuts[j])
        pieces.append((piece, cuts))
    from .grid import merge_cuts

    all_cuts = [list(merge_cuts(c)) for c in all_cuts]
    exclusions = [
        (
            tuple((p - rho) * sx for p in c.position),
            tuple((p + rho) * sx for p in c.position),
        )
        for c in ns.charges
    ]

    def cells():
        for piece, cuts in pieces:
            for lo, hi in _retained_cells(piece, cuts):
                yield tuple(v * sx for v in lo), tuple(v * sx for v in hi)

    return all_cuts, cells, exclusions, rho * sx


def _retained_cells(piece, cuts, chunk: int = 200_000):
    los = [np.asarray(c[:-1]) for c in cuts]
    his = [np.asarray(c[1:]) for c in cuts]
    counts = [len(a) for a in los]
    if any(c == 0 for c in counts):
        return
    total = 1
    for c in counts:
        total *= c
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), counts)
        LO = np.stack([los[j][idx[j]] for j in range(len(counts))], axis=1)
        HI = np.stack([his[j][idx[j]] for j in range(len(counts))], axis=1)
        mid = (LO + HI) / 2.0
        half = (HI - LO) / 2.0
        keep = np.all(mid @ piece.A.T - half @ np.abs(piece.A).T <= piece.b + 1e-12, axis=1)
        for i in np.nonzero(keep)[0]:
            yield tuple(LO[i]), tuple(HI[i])


def cmd_grid(args) -> int:
    inst = load_instance(args.instance)
    if args.svg and inst.d > 2:
        _sys.stderr.write("SVG rendering requires d <= 2\n")
        return EXIT_SVG_DIM
    cuts, cells, exclusions, rho = _grid_data(inst)
    base = args.out or "grid"
    csv_path = base + ".csv"
    n_cells = 0
    with open(csv_path, "w") as fh:
        for j, c in enumerate(cuts):
            fh.write(f"cuts,axis{j}," + ",".join(f"{v:.17g}" for v in c) + "\n")
        for lo, hi in cells():
            n_cells += 1
            fh.write(
                "cell,"
                + ",".join(f"{v:.17g}" for v in lo)
                + ","
                + ",".join(f"{v:.17g}" for v in hi)
                + "\n"
            )
    written = [csv_path]
    if args.svg:
        svg_path = base + ".svg"
        _render_svg(inst, cuts, exclusions, svg_path)
        written.append(svg_path)
    print(f"wrote {', '.join(written)} ({n_cells} cells, rho = {rho:.6g})")
    return EXIT_OK


def _render_svg(inst: Instance, cuts, exclusions, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    bbox = inst.domain.bounding_box()
    fig, ax = plt.subplots(figsize=(7, 7))
    if inst.d == 1:
        y0, y1 = 0.0, 1.0
        for v in cuts[0]:
            ax.plot([v, v], [y0, y1], color="0.4", lw=0.3)
        ax.set_ylim(y0, y1)
    else:
        xs, ys = cuts[0], cuts[1]
        # line weight follows log of local spacing: coarse cuts read heavier
        for axis, vals in ((0, xs), (1, ys)):
            arr = np.asarray(vals)
            if len(arr) < 2:
                continue
            gaps = np.minimum(
                np.diff(arr, prepend=arr[0] - 1.0), np.diff(arr, append=arr[-1] + 1.0)
            )
            gmin, gmax = max(gaps.min(), 1e-12), max(gaps.max(), 2e-12)
            for v, g in zip(arr, gaps):
                lw = 0.1 + 0.5 * math.log(max(g, gmin) / gmin) / math.log(gmax / gmin + 1e-12)
                if axis == 0:
                    ax.plot([v, v], [bbox.lo[1], bbox.hi[1]], color="0.35", lw=lw)
                else:
                    ax.plot([bbox.lo[0], bbox.hi[0]], [v, v], color="0.35", lw=lw)
        for lo, hi in exclusions:
            ax.add_patch(
                Rectangle(
                    (lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1],
                    facecolor="0.7", edgecolor="black", lw=0.8, zorder=3,
                )
            )
        for c in inst.system.charges:
            ax.plot(
                c.position[0], c.position[1],
                marker="o" if c.q > 0 else "s", color="crimson", ms=5, zorder=4,
            )
        ax.set_ylim(bbox.lo[1], bbox.hi[1])
    ax.set_xlim(bbox.lo[0], bbox.hi[0])
    ax.set_aspect("equal", adjustable="box")
    ax.set_title("variable-coarseness grid")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    payload: dict = {"command": "oracle"}
    lines = []
    if args.bisect:
        if inst.system.n != 2 or any(c.q <= 0 for c in inst.system.charges):
            raise ParseError("--bisect needs exactly two positive charges")
        c1, c2 = inst.system.charges
        a1 = np.array(c1.position)
        a2 = np.array(c2.position)
        sep = float(np.linalg.norm(a2 - a1))
        s = oracle.two_charge_bisect(c1.q, c2.q, sep, tol=1e-12)
        point = a1 + s * (a2 - a1) / sep
        payload["bisect"] = {"offset": s, "point": [float(v) for v in point]}
        lines.append(f"bisect offset along the axis: {s:.6f}")
        lines.append(f"bisect point: {_fmt_vec(point)}")
    if args.scan:
        try:
            rep = oracle.brute_force_scan(inst.system, inst.domain, args.threshold, args.h)
        except TooFine as exc:
            _sys.stderr.write(f"{exc}\n")
            return EXIT_TOO_FINE
        payload["scan"] = {
            "h": rep.h,
            "threshold": rep.threshold,
            "min_grad_norm": rep.min_grad_norm,
            "points": [list(p) for p in rep.points],
        }
        lines.append(rep.serialize().rstrip("\n"))
    if not args.bisect and not args.scan:
        raise ParseError("oracle needs --scan and/or --bisect")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_eval(args) -> int:
    inst = load_instance(args.instance)
    x = tuple(float(v) for v in args.point.split(","))
    if len(x) != inst.d:
        raise ParseError(f"--point needs {inst.d} comma-separated coordinates")
    sysm = inst.system
    f = eval_potential(sysm, x)
    g = eval_gradient(sysm, x)
    H = hessian(sysm, x)
    det = hessian_det(sysm, x)
    payload = {
        "command": "eval",
        "point": list(x),
        "potential": f,
        "gradient": [float(v) for v in g],
        "hessian": [[float(v) for v in row] for row in H],
        "hessian_det": det,
    }
    text = (
        f"potential: {f:.17g}\n"
        f"gradient: {_fmt_vec(g)}\n"
        f"hessian determinant: {det:.17g}"
    )
    _emit(args, payload, text)
    return EXIT_OK


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{float(x):.17g}" for x in v) + ")"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="equilib",
        description="certified equilibrium points of point-charge potentials",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, budget=True):
        sp.add_argument("instance", help="instance JSON file")
        sp.add_argument("--epsilon", type=float, default=None)
        sp.add_argument("--delta", type=float, default=None)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--out", default=None, help="write output to this path")
        sp.add_argument("--threads", type=int, default=1)
        if budget:
            sp.add_argument("--budget", type=int, default=10**6)

    sw = sub.add_parser("solve-weak", help="weak approximate equilibrium")
    common(sw)
    sw.set_defaults(fn=cmd_solve_weak)

    ss = sub.add_parser("solve-strong", help="strong approximate equilibrium")
    common(ss)
    ss.add_argument("--auto", action="store_true", help="delta-halving schedule")
    ss.set_defaults(fn=cmd_solve_strong)

    sg = sub.add_parser("grid", help="dump the grid (CSV, optional SVG)")
    sg.add_argument("instance")
    sg.add_argument("--out", default=None, help="output base path (without extension)")
    sg.add_argument("--svg", action="store_true", help="also render an SVG (d <= 2)")
    sg.set_defaults(fn=cmd_grid)

    so = sub.add_parser("oracle", help="ground-truth scans and bisection")
    so.add_argument("instance")
    so.add_argument("--scan", action="store_true")
    so.add_argument("--bisect", action="store_true")
    so.add_argument("--threshold", type=float, default=1e-2)
    so.add_argument("--h", type=float, default=1e-3)
    so.add_argument("--json", action="store_true")
    so.add_argument("--out", default=None)
    so.set_defaults(fn=cmd_oracle)

    se = sub.add_parser("eval", help="evaluate f, grad f, Hessian at a point")
    se.add_argument("instance")
    se.add_argument("--point", required=True, help="comma-separated coordinates")
    se.add_argument("--json", action="store_true")
    se.add_argument("--out", default=None)
    se.set_defaults(fn=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        _sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except TooFine as exc:
        _sys.stderr.write(f"{exc}\n")
        return EXIT_TOO_FINE
    except BudgetExceeded as exc:
        _sys.stderr.write(f"{exc}\n")
        return EXIT_BUDGET
    except EquilibError as exc:
        _sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
