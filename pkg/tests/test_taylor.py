"""Tests for certified Taylor models and polynomial helpers."""

import math

import numpy as np
import pytest

from equilib import (
    Box,
    Charge,
    ChargeSystem,
    Polynomial,
    expand,
    lipschitz_bound,
    taylor_degree,
)
from equilib.potential import eval_potential
from equilib.taylor import SeriesFunction, derivative_values


def test_taylor_degree_examples():
    assert taylor_degree(4, 2.0**-10) == 17
    assert taylor_degree(0, 8.0) == 1
    assert taylor_degree(1, 1.0) == 4


def test_taylor_degree_monotone_in_eps():
    for B in (0, 2, 5):
        prev = 0
        for t in range(0, 20):
            k = taylor_degree(B, 2.0**-t)
            assert k >= prev
            prev = k


def test_polynomial_eval_and_gradient():
    # p(x, y) = 2 + 3x + x*y^2
    p = Polynomial(2, {(0, 0): 2.0, (1, 0): 3.0, (1, 2): 1.0})
    assert p((0.0, 0.0)) == pytest.approx(2.0)
    assert p((1.0, 2.0)) == pytest.approx(2 + 3 + 4)
    gx, gy = p.gradient()
    assert gx((1.0, 2.0)) == pytest.approx(3 + 4)
    assert gy((1.0, 2.0)) == pytest.approx(4.0)


def test_polynomial_product():
    a = Polynomial(2, {(1, 0): 1.0, (0, 0): 1.0})  # 1 + x
    b = Polynomial(2, {(0, 1): 2.0})  # 2y
    c = a * b
    assert c((3.0, 0.5)) == pytest.approx((1 + 3) * 1.0)


def test_expand_single_charge_series():
    # univariate 1/r series about r=2: 1/2, -1/4, 1/8 (coefficients of (r-2)^j / j! times j!)
    sys1 = ChargeSystem([Charge(1.0, (0.0,))], 1)
    cell = Box((1.8,), (2.2,))
    f = SeriesFunction(sys1, (0,))
    model = expand(f, (2.0,), 3, cell)
    # model is in scaled local coordinates u = (x - anchor) / scale
    scale = model.scale[0]
    coeffs = {k: v for k, v in model.poly.coeffs.items()}
    assert coeffs[(0,)] == pytest.approx(0.5, rel=1e-12)
    assert coeffs[(1,)] / scale == pytest.approx(-0.25, rel=1e-12)
    assert coeffs[(2,)] / scale**2 == pytest.approx(0.125, rel=1e-12)


def test_expand_error_dominates_samples():
    sysv = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(2.0, (1.0, 0.0))], 2)
    cell = Box((0.3, -0.1), (0.5, 0.1))
    anchor = (0.4, 0.0)
    f = SeriesFunction(sysv, (0, 0))
    rng = np.random.default_rng(41)
    for k in (3, 5, 8):
        model = expand(f, anchor, k, cell)
        worst = 0.0
        for _ in range(1000):
            x = rng.uniform(cell.lo, cell.hi)
            err = abs(eval_potential(sysv, x) - model(x))
            worst = max(worst, err)
        assert worst <= model.err
    # higher degree tightens the certified error once the cell is small
    # enough that the Lagrange ratio contracts
    narrow = Box((0.375, -0.025), (0.425, 0.025))
    e3 = expand(f, anchor, 3, narrow).err
    e8 = expand(f, anchor, 8, narrow).err
    assert e8 < e3


def test_expand_gradient_component():
    sysv = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(2.0, (1.0, 0.0))], 2)
    cell = Box((0.35, -0.05), (0.45, 0.05))
    f = SeriesFunction(sysv, (1, 0))
    model = expand(f, (0.4, 0.0), 6, cell)
    rng = np.random.default_rng(43)
    from equilib.potential import eval_gradient

    for _ in range(500):
        x = rng.uniform(cell.lo, cell.hi)
        true_val = eval_gradient(sysv, x)[0]
        assert abs(true_val - model(x)) <= model.err


def test_derivative_values_match_expansions():
    from equilib.potential import derivative_terms, evaluate_expansion, multi_indices_upto

    sysv = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(2.0, (1.0, 0.0))], 2)
    anchor = np.array([0.4, 0.1])
    mi, vals = derivative_values(sysv, anchor, 5)
    lut = dict(zip(mi, vals))
    for s in multi_indices_upto(2, 5):
        expect = sum(
            evaluate_expansion(derivative_terms(c, s), anchor) for c in sysv.charges
        )
        assert lut[s] == pytest.approx(expect, rel=1e-11, abs=1e-11)


def test_lipschitz_examples():
    const = Polynomial(2, {(0, 0): 7.0})
    assert lipschitz_bound(const, Box((0.0, 0.0), (1.0, 1.0))) == 0.0
    linear = Polynomial(2, {(1, 0): 1.0})
    assert lipschitz_bound(linear, Box((-5.0, -5.0), (5.0, 5.0))) == pytest.approx(1.0)
    square = Polynomial(1, {(2,): 1.0})
    assert lipschitz_bound(square, Box((0.0,), (2.0,))) == pytest.approx(4.0)


def test_lipschitz_dominates_sampled_gradients():
    rng = np.random.default_rng(47)
    for _ in range(30):
        coeffs = {}
        for _ in range(5):
            mono = tuple(int(v) for v in rng.integers(0, 3, size=2))
            coeffs[mono] = float(rng.normal())
        p = Polynomial(2, coeffs)
        box = Box((-1.5, -0.5), (0.5, 2.0))
        L = lipschitz_bound(p, box)
        gx, gy = p.gradient()
        for _ in range(50):
            x = rng.uniform(box.lo, box.hi)
            gnorm = math.hypot(gx(x), gy(x))
            assert gnorm <= L * (1 + 1e-12) + 1e-15
