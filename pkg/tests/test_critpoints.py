import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from dkglab.appendix_roots import KNOWN_ROOTS
from dkglab.critpoints import (
    SINGULAR_INDEX,
    SingularityClass as SC,
    caustic_scan,
    classify,
    d2_factored,
    solve_critical,
    verify_d2_lemma,
    verify_d3_condition,
)
from dkglab.dispersion import det_hessian, grad_omega
from dkglab.errors import AmbiguousClassification, InvalidCriticalPoint

HALF = np.pi / 2
C_A5 = (7 - 3 * math.sqrt(5)) / 2


def contains(points, target, tol=1e-8):
    target = np.mod(target, 2 * np.pi)
    return any(np.max(np.abs(np.mod(p - target + np.pi, 2 * np.pi) - np.pi)) < tol for p in points)


def test_solve_critical_at_rest():
    pts = solve_critical([0.0, 0.0])
    for q in [(0, 0), (np.pi, np.pi), (0, np.pi), (np.pi, 0)]:
        assert contains(pts, np.array(q))


def test_solve_critical_a3_velocity():
    pts = solve_critical([1 / math.sqrt(5)] * 2)
    # the root is degenerate, so Newton only gets to ~sqrt(eps)
    assert contains(pts, np.array([HALF, HALF]), tol=1e-5)


def test_solve_critical_outside_cone():
    assert solve_critical([2.0, 0.0]) == []


def test_solve_critical_residuals(rng):
    v = grad_omega(rng.uniform(0, 2 * np.pi, 3))
    pts = solve_critical(v)
    assert pts
    for p in pts:
        assert np.linalg.norm(grad_omega(p) - v) < 1e-11


def test_classify_table():
    r = classify([HALF, HALF])
    assert (r.cls, r.singular_index, r.decay_exponent) == (SC.A3, Fraction(1, 4), Fraction(3, 4))
    r = classify([HALF, HALF, np.arccos(C_A5)])
    assert (r.cls, r.decay_exponent) == (SC.A5, Fraction(7, 6))
    r = classify([HALF] * 3)
    assert (r.cls, r.decay_exponent) == (SC.D4minus, Fraction(7, 6))
    r = classify([HALF] * 4)
    assert (r.cls, r.decay_exponent, r.log_correction) == (SC.T444, Fraction(3, 2), True)


def test_classify_a5_neighbours():
    for dc in (-0.01, 0.01):
        assert classify([HALF, HALF, np.arccos(C_A5 + dc)]).cls is SC.A3


def test_classify_a5_ambiguous_band():
    with pytest.warns(AmbiguousClassification):
        r = classify([HALF, HALF, np.arccos(C_A5 - 7.5e-10)])
    assert r.ambiguous


def test_classify_fold_and_generic():
    c1 = 0.6
    c2 = brentq(lambda c2: 5 - (c1 + c2) - (1 / c1 + 1 / c2), 0.05, 0.99)
    assert classify(np.arccos([c1, c2])).cls is SC.A2
    assert classify([0.3, 0.2]).cls is SC.A1
    assert classify([HALF, 0.0]).cls is SC.A1


def test_classify_d4_residual():
    r = classify([HALF, HALF, 0.3, 1.0])
    assert r.cls is SC.CorankOneResidual
    assert r.hessian_rank >= 3


def test_classify_rejects_non_critical():
    with pytest.raises(InvalidCriticalPoint):
        classify([0.3, 0.2], v=[0.5, 0.5])


def test_report_json():
    out = json.loads(classify([HALF] * 4).to_json())
    assert out["class"] == "T444"
    assert out["decay_exponent"] == "3/2"
    assert out["log_correction"] is True


def test_exponents_are_exact():
    for d in (2, 3, 4):
        for cls, idx in SINGULAR_INDEX.items():
            assert isinstance(idx, Fraction)
    expected = {SC.A1: 0, SC.A2: Fraction(1, 6), SC.A3: Fraction(1, 4), SC.A5: Fraction(1, 3),
                SC.D4minus: Fraction(1, 3), SC.T444: Fraction(1, 2)}
    for cls, idx in expected.items():
        assert SINGULAR_INDEX[cls] == idx
    for xi in ([HALF, HALF], [HALF] * 3, [HALF] * 4, [0.3, 0.2, 1.1]):
        r = classify(xi)
        assert r.decay_exponent == Fraction(len(xi), 2) - r.singular_index


def _special_points(rng, d, n):
    """Random frequencies with some coordinates pinned to zero cosines."""
    xi = rng.uniform(0, 2 * np.pi, size=(n, d))
    pin = rng.random((n, d)) < 0.4
    xi[pin] = rng.choice([HALF, 3 * HALF], size=int(pin.sum()))
    return xi


@pytest.mark.parametrize("d", [2, 3, 4])
def test_classification_symmetry(d, rng):
    for xi in _special_points(rng, d, 200):
        base = classify(xi).cls
        assert classify(xi[rng.permutation(d)]).cls is base
        flip = xi.copy()
        k = rng.integers(d)
        flip[k] = 2 * np.pi - flip[k]
        assert classify(flip).cls is base


def test_caustics_d2():
    pts = caustic_scan(2, grid_n=32)
    assert pts
    assert all(abs(p.det) <= 1e-10 for p in pts)
    assert any(np.allclose(p.v, [1 / math.sqrt(5)] * 2, atol=1e-8) for p in pts)


def test_caustics_d3():
    pts = caustic_scan(3, grid_n=32)
    assert all(abs(det_hessian(p.xi)) <= 1e-10 for p in pts)
    assert any(np.allclose(p.v, [1 / math.sqrt(7)] * 3, atol=1e-8) for p in pts)


def test_d2_factorisation(rng):
    from dkglab._pycore import d2_equations

    c = rng.uniform(-1, 1, size=(1000, 2))
    _, e3 = d2_equations(c[:, 0], c[:, 1])
    np.testing.assert_allclose(d2_factored(c[:, 0], c[:, 1]), e3, atol=1e-12)


def test_d2_antidiagonal_point():
    from dkglab._pycore import d2_equations

    e2, e3 = d2_equations(0.5, -0.5)
    assert e3 == 0.0
    assert e2 != 0.0


def test_verify_d2_lemma():
    verdict = verify_d2_lemma(2000)
    res, witness = verdict
    assert res > 0
    assert verdict.common_zeros == []
    assert verdict.supports_claim


@pytest.mark.slow
def test_verify_d3_condition_coarse():
    verdict = verify_d3_condition(200)
    assert verdict.min_residual > 0
    assert verdict.common_zeros == []


def test_appendix_roots_leave_the_cube():
    assert np.all(np.any(np.abs(KNOWN_ROOTS) >= 1, axis=1))
