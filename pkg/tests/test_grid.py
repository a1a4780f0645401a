"""Tests for exclusion boxes, the hyperplane schedule, and cell enumeration."""

import math

import numpy as np
import pytest

from equilib import (
    Box,
    Charge,
    ChargeSystem,
    Polytope,
    TooFewCharges,
    UnboundedDomain,
    beta_schedule,
    build_axis_cuts,
    enumerate_cells,
    eval_gradient,
    exclusion_radius,
    single_charge_params,
    split_domain,
)
from equilib.grid import charge_boxes, merge_cuts, uniform_cuts


def normalized_pair(d=2):
    pos2 = [0.0] * d
    pos2[0] = 1.0
    return ChargeSystem([Charge(1.0, tuple([0.0] * d)), Charge(1.0, tuple(pos2))], d)


def test_exclusion_radius_examples():
    s1 = ChargeSystem([Charge(1.0, (0.0,)), Charge(1.0, (1.0,))], 1)
    assert exclusion_radius(s1, 0.0) == pytest.approx(0.125)
    s2 = ChargeSystem([Charge(1.0, (0.0, 0.0)), Charge(2.0, (1.0, 0.0))], 2)
    assert exclusion_radius(s2, 0.5) == pytest.approx(1.0 / (2 * math.sqrt(2) * 16.5), rel=1e-6)
    s3 = ChargeSystem([Charge(1.0, (0.0, 0.0, 0.0)), Charge(1.0, (1.0, 0.0, 0.0))], 3)
    assert exclusion_radius(s3, 1.0) == pytest.approx(1.0 / (3 * math.sqrt(3) * 9), rel=1e-6)


def test_exclusion_radius_at_most_half():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(2, 5))
        pts = rng.uniform(-3, 3, size=(n, 2))
        # enforce min pairwise max-coordinate separation 1 via spreading
        pts *= 2.0
        try:
            sysr = ChargeSystem([Charge(float(rng.uniform(1, 4)), tuple(p)) for p in pts], 2)
        except ValueError:
            continue
        norm = sysr.normalized()
        assert exclusion_radius(norm, float(rng.uniform(0, 1))) <= 0.5


def test_exclusion_radius_needs_two_charges():
    with pytest.raises(TooFewCharges):
        exclusion_radius(ChargeSystem([Charge(1.0, (0.0, 0.0))], 2), 0.1)


def test_exclusion_boxes_have_no_small_gradient():
    sysn = normalized_pair().normalized()
    eps = 0.1
    rho = exclusion_radius(sysn, eps)
    rng = np.random.default_rng(29)
    for box in charge_boxes(sysn, rho):
        violations = 0
        for _ in range(1000):
            x = rng.uniform(box.lo, box.hi)
            if max(abs(v - p) for c in sysn.charges for v, p in zip(x, c.position)) < 1e-14:
                continue
            try:
                g = eval_gradient(sysn, x)
            except Exception:
                continue
            if np.max(np.abs(g)) <= eps:
                violations += 1
        assert violations == 0


def test_split_domain_single_charge_center():
    sys1 = ChargeSystem([Charge(1.0, (0.0, 0.0))], 2)
    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    pieces = split_domain(X, sys1, 0.25)
    assert len(pieces) == 8


def test_split_domain_disjoint_partition():
    sys1 = ChargeSystem([Charge(1.0, (5.0, 5.0))], 2)
    X = Polytope.from_box(Box((0.0, 0.0), (1.0, 1.0)))
    pieces = split_domain(X, sys1, 0.25)
    rng = np.random.default_rng(31)
    for _ in range(200):
        x = rng.uniform(0, 1, size=2)
        hits = sum(1 for p in pieces if p.contains(x, tol=1e-9))
        assert hits >= 1


def test_split_domain_piece_count_bound():
    sysn = normalized_pair()
    X = Polytope.from_box(Box((-0.5, -0.5), (1.5, 0.5)))
    pieces = split_domain(X, sysn, 0.1)
    assert len(pieces) <= (2 * sysn.n + 1) ** 2
    for p in pieces:
        p.bounding_box()  # bounded


def test_beta_schedule_example():
    assert beta_schedule(1.0, 8.0) == pytest.approx([1.0, 2.0, 4.0, 8.0])
    # smallest t >= 1 covering the width
    assert beta_schedule(1.0, 5.0) == pytest.approx([1.0, 2.0, 4.0, 8.0])
    # t_max is at least 1, so the schedule always has two levels or more
    assert beta_schedule(2.0, 1.0) == pytest.approx([2.0, 4.0])


def test_uniform_cuts_count():
    # 4*C*d + 1 cuts including both ends, C=4, d=2
    cuts = uniform_cuts(0.0, 1.0, 4 * 4 * 2)
    assert len(cuts) == 33
    assert cuts[0] == 0.0 and cuts[-1] == 1.0
    assert np.allclose(np.diff(cuts), 1.0 / 32)


def test_build_axis_cuts_bounding_box_only():
    from equilib import polynomial_params

    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    p, cov = polynomial_params(1.0)
    cuts = build_axis_cuts([(p, cov)], X)
    # empty cover: only the 4Cd+1 = 17 uniform bounding-box cuts (C=2, d=2)
    assert all(len(c) == 4 * p.C * 2 + 1 for c in cuts)


def test_build_axis_cuts_single_charge():
    c = Charge(1.0, (0.0, 0.0))
    p, cov = single_charge_params(c, 0.5)
    X = Polytope.from_box(Box((-1.0, -1.0), (1.0, 1.0)))
    cuts = build_axis_cuts([(p, cov)], X)
    n_beta_total = len(beta_schedule(p.beta_min, 2.0))
    bound = (1 + 4 * p.C * 2) * (1 + n_beta_total)
    for axis_cuts in cuts:
        assert len(axis_cuts) <= bound
        assert -1.0 in axis_cuts and 1.0 in axis_cuts
        assert list(axis_cuts) == sorted(axis_cuts)


def test_build_axis_cuts_unbounded():
    X = Polytope([(1.0, 0.0)], [1.0])
    from equilib import polynomial_params

    p, cov = polynomial_params(1.0)
    with pytest.raises(UnboundedDomain):
        build_axis_cuts([(p, cov)], X)


def test_merge_cuts_tolerance():
    merged = merge_cuts([0.0, 1.0, 1.0 + 1e-14, 0.5])
    assert merged == pytest.approx([0.0, 0.5, 1.0])


def test_enumerate_cells_trivial():
    X = Polytope.from_box(Box((0.0, 0.0), (1.0, 1.0)))
    cells = list(enumerate_cells([[0.0, 1.0], [0.0, 1.0]], X))
    assert len(cells) == 1
    assert cells[0].box.lo == pytest.approx((0.0, 0.0))


def test_enumerate_cells_two_by_two_lexicographic():
    X = Polytope.from_box(Box((0.0, 0.0), (1.0, 1.0)))
    cuts = [[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]]
    cells = list(enumerate_cells(cuts, X))
    assert len(cells) == 4
    los = [c.box.lo for c in cells]
    assert los == sorted(los)
    for c in cells:
        assert c.box.contains(c.anchor)
        assert X.contains(c.anchor, tol=1e-9)


def test_enumerate_cells_triangle_clipping():
    # x + y <= 1 triangle inside the unit square
    X = Polytope([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0)],
                 [1.0, 1.0, 0.0, 0.0, 1.0])
    cuts = [list(np.linspace(0, 1, 5)), list(np.linspace(0, 1, 5))]
    cells = list(enumerate_cells(cuts, X))
    # cells fully outside x+y<=1 must be dropped
    for c in cells:
        assert c.box.lo[0] + c.box.lo[1] <= 1.0 + 1e-9
        assert c.anchor[0] + c.anchor[1] <= 1.0 + 1e-9
    assert 10 <= len(cells) < 16


def test_cell_coverage_sampling():
    sysn = normalized_pair()
    eps = 0.1
    rho = exclusion_radius(sysn, eps)
    X = Polytope.from_box(Box((-0.5, -0.5), (1.5, 0.5)))
    pieces = split_domain(X, sysn, rho)
    params = [single_charge_params(c, min(rho, 1.0)) for c in sysn.charges]
    rng = np.random.default_rng(37)
    boxes = charge_boxes(sysn, rho)
    for _ in range(300):
        x = rng.uniform((-0.5, -0.5), (1.5, 0.5))
        if any(b.contains(x) for b in boxes):
            continue
        in_piece = any(p.contains(x, tol=1e-9) for p in pieces)
        assert in_piece
