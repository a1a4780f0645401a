"""Tests for the interval branch-and-prune feasibility kernel."""

import math

import numpy as np
import pytest

from equilib import (
    Box,
    BudgetExceeded,
    Interval,
    Polynomial,
    Polytope,
    eval_poly_interval,
    project,
    solve_system,
)


def test_interval_arithmetic_encloses():
    a = Interval(1.0, 2.0)
    b = Interval(-1.0, 0.5)
    s = a + b
    assert s.lo <= 0.0 <= s.hi and s.lo <= 2.5 <= s.hi
    p = a * b
    assert p.lo <= -2.0 and p.hi >= 1.0


def test_interval_even_power():
    sq = Interval(-1.0, 1.0) ** 2
    assert sq.lo <= 0.0
    assert 1.0 <= sq.hi <= 1.0 + 1e-12


def test_eval_poly_interval_constant():
    p = Polynomial(2, {(0, 0): 3.0})
    enc = eval_poly_interval(p, Box((-7.0, 0.0), (2.0, 9.0)))
    assert enc.lo == 3.0 and enc.hi == 3.0


def test_eval_poly_interval_square():
    p = Polynomial(1, {(2,): 1.0})
    enc = eval_poly_interval(p, Box((-1.0,), (1.0,)))
    assert enc.lo >= -1e-12 and 1.0 <= enc.hi <= 1.0 + 1e-9
    assert enc.lo <= 0.0 + 1e-12


def test_eval_poly_interval_sampling():
    rng = np.random.default_rng(53)
    for _ in range(50):
        coeffs = {}
        for _ in range(6):
            mono = tuple(int(v) for v in rng.integers(0, 4, size=2))
            coeffs[mono] = float(rng.normal())
        p = Polynomial(2, coeffs)
        lo = rng.uniform(-2, 0, size=2)
        hi = lo + rng.uniform(0.1, 2, size=2)
        box = Box(tuple(lo), tuple(hi))
        enc = eval_poly_interval(p, box)
        for _ in range(20):
            x = rng.uniform(lo, hi)
            v = p(x)
            assert enc.lo - 1e-9 <= v <= enc.hi + 1e-9


def unit_interval_polytope():
    return Polytope([(1.0,), (-1.0,)], [2.0, 0.0])


def test_solve_found_sqrt_two():
    # x^2 - 2 <= 0 and -x <= 0 over [0, 2]
    polys = [Polynomial(1, {(2,): 1.0, (0,): -2.0}), Polynomial(1, {(1,): -1.0})]
    X = unit_interval_polytope()
    out = solve_system(polys, X, Box((0.0,), (2.0,)), eps=0.1)
    assert out.found
    x = out.point[0]
    assert 0.0 - 1e-12 <= x <= math.sqrt(2.0) + 1e-12
    assert all(r <= 1e-12 for r in out.residuals)


def test_solve_infeasible_globally_positive():
    polys = [Polynomial(1, {(2,): 1.0, (0,): 1.0})]  # x^2 + 1
    X = Polytope([(1.0,), (-1.0,)], [1.0, 1.0])
    out = solve_system(polys, X, Box((-1.0,), (1.0,)), eps=0.5)
    assert not out.found


def test_solve_sliver_with_halfspace():
    # unit disk constraint with polytope x1 >= 0.9 inside the unit square
    disk = Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1.0})
    X = Polytope(
        [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)],
        [1.0, 1.0, -0.9, 1.0],
    )
    out = solve_system([disk], X, Box((0.0, -1.0), (1.0, 1.0)), eps=0.05)
    assert out.found
    x = out.point
    assert x[0] >= 0.9 - 1e-9
    assert x[0] ** 2 + x[1] ** 2 <= 1.0 + 1e-9


def test_solve_deterministic():
    polys = [Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -0.5})]
    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    box = Box((-1.0, -1.0), (1.0, 1.0))
    a = solve_system(polys, X, box, eps=0.01)
    b = solve_system(polys, X, box, eps=0.01)
    assert a.found == b.found
    assert tuple(a.point) == tuple(b.point)


def test_solve_budget_exceeded():
    # tight feasibility forces deep subdivision; tiny budget must raise
    polys = [Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0, (0, 0): -1e-12})]
    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    with pytest.raises(BudgetExceeded):
        solve_system(polys, X, Box((-1.0, -1.0), (1.0, 1.0)), eps=1e-9, budget=8)


def test_infeasible_cross_checked_by_sampling():
    rng = np.random.default_rng(59)
    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    box = Box((-1.0, -1.0), (1.0, 1.0))
    checked = 0
    for _ in range(30):
        coeffs = {}
        for _ in range(4):
            mono = tuple(int(v) for v in rng.integers(0, 3, size=2))
            coeffs[mono] = float(rng.normal())
        p = Polynomial(2, coeffs)
        eps = 0.3
        out = solve_system([p], X, box, eps=eps)
        if out.found:
            assert p(out.point) <= 1e-12
        else:
            # no sampled point may beat the relaxed threshold
            xs = rng.uniform(-1, 1, size=(400, 2))
            vals = p.eval_many(xs)
            assert np.min(vals) > -eps
            checked += 1
    assert checked >= 1


def test_project_examples():
    X = Polytope.from_box(Box((0.0, 0.0), (1.0, 1.0)))
    inside = project((0.3, 0.7), X)
    assert tuple(inside) == pytest.approx((0.3, 0.7))
    clamped = project((2.0, 0.5), X)
    assert tuple(clamped) == pytest.approx((1.0, 0.5))
    half = Polytope(
        [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0)],
        [2.0, 2.0, 2.0, 2.0, 1.0],
    )
    onto_face = project((1.0, 1.0), half)
    assert tuple(onto_face) == pytest.approx((0.5, 0.5), abs=1e-8)


def test_project_idempotent_and_nonexpansive():
    rng = np.random.default_rng(61)
    X = Polytope(
        [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0)],
        [1.0, 1.0, 1.0, 1.0, 1.2],
    )
    for _ in range(50):
        x = rng.uniform(-2, 2, size=2)
        y = rng.uniform(-2, 2, size=2)
        px, py = np.asarray(project(x, X)), np.asarray(project(y, X))
        assert np.allclose(project(px, X), px, atol=1e-8)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9
        assert np.all(np.asarray(X.A) @ px <= np.asarray(X.b) + 1e-9)
