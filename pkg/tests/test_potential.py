"""Tests for the charge-system potential and its exact derivative expansions."""

import math

import numpy as np
import pytest

from equilib import (
    Charge,
    ChargeSystem,
    DegreeOverflow,
    SingularPoint,
    derivative_bound,
    derivative_terms,
    eval_gradient,
    eval_potential,
    hessian,
    hessian_det,
)
from equilib.oracle import finite_difference
from equilib.potential import evaluate_expansion, max_partial


def two_charge():
    return ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(2.0, (1.0, 0.0))], 2)


def test_potential_single_unit_charge():
    sys1 = ChargeSystem([Charge(1.0, (0.0, 0.0))], 2)
    assert eval_potential(sys1, (1.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_potential_antisymmetry():
    sys2 = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(-1.0, (1.0, 0.0))], 2)
    assert eval_potential(sys2, (0.5, 0.0)) == pytest.approx(0.0, abs=1e-15)


def test_potential_golden_midpoint():
    # 1/0.5 + 2/0.5 = 6
    assert eval_potential(two_charge(), (0.5, 0.0)) == pytest.approx(6.0, abs=1e-12)


def test_gradient_single_charge():
    sys1 = ChargeSystem([Charge(1.0, (0.0, 0.0))], 2)
    g = eval_gradient(sys1, (1.0, 0.0))
    assert g[0] == pytest.approx(-1.0, abs=1e-15)
    assert g[1] == pytest.approx(0.0, abs=1e-15)


def test_gradient_mirror_zero():
    sys2 = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(1.0, (1.0, 0.0))], 2)
    g = eval_gradient(sys2, (0.5, 0.0))
    assert np.max(np.abs(g)) < 1e-15


def test_gradient_golden_equilibrium():
    # equilibrium of (q=1, q=2) at distance sqrt(2)-1 from the unit charge
    x = (math.sqrt(2.0) - 1.0, 0.0)
    g = eval_gradient(two_charge(), x)
    assert np.max(np.abs(g)) < 1e-12


def test_singular_point_guard():
    with pytest.raises(SingularPoint):
        eval_potential(two_charge(), (0.0, 0.0))
    with pytest.raises(SingularPoint):
        eval_gradient(two_charge(), (1.0, 1e-15))


def test_derivative_terms_order_zero():
    ex = derivative_terms(Charge(3.0, (0.0, 0.0)), (0, 0))
    assert len(ex.terms) == 1
    t = ex.terms[0]
    assert t.kappa == 3.0 and t.num == (0, 0) and t.den_pow == 1


def test_derivative_terms_first_order():
    ex = derivative_terms(Charge(1.0, (0.0, 0.0)), (1, 0))
    assert len(ex.terms) == 1
    t = ex.terms[0]
    assert t.kappa == -1.0 and t.num == (1, 0) and t.den_pow == 3


def test_derivative_terms_second_order():
    ex = derivative_terms(Charge(1.0, (0.0, 0.0)), (2, 0))
    got = {(t.num, t.den_pow): t.kappa for t in ex.terms}
    assert got == {((0, 0), 3): -1.0, ((2, 0), 5): 3.0}


def test_term_structure_invariants():
    charge = Charge(1.0, (0.0, 0.0, 0.0))
    rng = np.random.default_rng(7)
    for _ in range(40):
        order = tuple(int(v) for v in rng.integers(0, 3, size=3))
        k = sum(order)
        if k > 6:
            continue
        ex = derivative_terms(charge, order)
        assert len(ex.terms) <= (2 * 3) ** k or k == 0
        for t in ex.terms:
            assert t.den_pow % 2 == 1
            assert t.den_pow <= 2 * k + 1
            assert t.den_pow - sum(t.num) == k + 1
            assert abs(t.kappa) <= math.factorial(k) * 2**k


def test_finite_difference_agreement():
    sysv = two_charge()
    rng = np.random.default_rng(11)
    orders = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (2, 2), (4, 0)]
    checked = 0
    for _ in range(30):
        x = rng.uniform(-0.4, 1.4, size=2)
        r = min(np.linalg.norm(x - np.array(c.position)) for c in sysv.charges)
        if r < 0.25:
            continue
        for s in orders:
            exact = evaluate_expansion(derivative_terms(sysv.charges[0], s), x) + \
                evaluate_expansion(derivative_terms(sysv.charges[1], s), x)
            approx = finite_difference(sysv, x, s)
            scale = max(1.0, abs(exact))
            assert abs(exact - approx) / scale < 1e-4
            checked += 1
    assert checked > 100


def test_derivative_bound_examples():
    c = Charge(1.0, (0.0, 0.0))
    assert derivative_bound(c, 0, 1.0) == pytest.approx(1.0)
    assert derivative_bound(c, 1, 1.0) == pytest.approx(2.0)
    assert derivative_bound(c, 2, 0.5) == pytest.approx(64.0)


def test_derivative_bound_dominates_sampled_partials():
    c = Charge(1.0, (0.0, 0.0))
    csys = ChargeSystem([c], 2)
    rng = np.random.default_rng(3)
    for _ in range(60):
        x = rng.uniform(-2.0, 2.0, size=2)
        r = float(np.linalg.norm(x))
        if r < 0.2:
            continue
        for k in range(0, 7):
            assert max_partial(csys, x, k) <= derivative_bound(c, k, r) * (1 + 1e-12)


def test_hessian_harmonic_in_3d():
    sys3 = ChargeSystem([Charge(1.0, (0.0, 0.0, 0.0))], 3)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(0.3, 2.0, size=3)
        H = hessian(sys3, x)
        assert abs(np.trace(H)) < 1e-10
        assert np.allclose(H, H.T)


def test_hessian_symmetric_midpoint():
    sys2 = ChargeSystem([Charge(1.0, (-0.5, 0.0)), Charge(1.0, (0.5, 0.0))], 2)
    H = hessian(sys2, (0.0, 0.0))
    assert abs(H[0, 1]) < 1e-14 and abs(H[1, 0]) < 1e-14
    # saddle: opposite-sign diagonal entries
    assert H[0, 0] * H[1, 1] < 0


def test_hessian_det_vs_gradient_differences():
    sys2 = ChargeSystem([Charge(1.0, (-0.5, 0.0)), Charge(1.0, (0.5, 0.0))], 2)
    x = np.array([0.0, 0.0])
    h = 1e-5
    J = np.zeros((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (np.asarray(eval_gradient(sys2, x + e)) -
                   np.asarray(eval_gradient(sys2, x - e))) / (2 * h)
    det_fd = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    det = hessian_det(sys2, x)
    assert abs(det - det_fd) / abs(det) < 1e-5


def test_scale_equivariance():
    rng = np.random.default_rng(9)
    for c_scale in (0.5, 2.0, 7.0):
        base = two_charge()
        scaled = ChargeSystem(
            [Charge(c.q, tuple(c_scale * p for p in c.position)) for c in base.charges], 2
        )
        for _ in range(10):
            x = rng.uniform(-0.4, 1.4, size=2)
            if min(np.linalg.norm(x - np.array(c.position)) for c in base.charges) < 0.2:
                continue
            g1 = np.asarray(eval_gradient(base, x))
            g2 = np.asarray(eval_gradient(scaled, c_scale * x))
            assert np.allclose(g2, g1 / c_scale**2, rtol=1e-12)


def test_sign_flip_negates_gradient():
    base = two_charge()
    flipped = ChargeSystem([Charge(-c.q, c.position) for c in base.charges], 2)
    x = (0.3, 0.2)
    g1 = np.asarray(eval_gradient(base, x))
    g2 = np.asarray(eval_gradient(flipped, x))
    assert np.allclose(g1, -g2, rtol=0, atol=1e-15)


def test_degree_overflow():
    with pytest.raises(DegreeOverflow):
        derivative_terms(Charge(1.0, (0.0, 0.0)), (200, 0))
