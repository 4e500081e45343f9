import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dkglab.dispersion import (
    det_hessian,
    grad_omega,
    hessian_phi,
    max_group_speed,
    omega,
    phi_aux,
    reduce_frequency,
)

angle = st.floats(0.0, 2 * math.pi, allow_nan=False)


def freq(d):
    return arrays(float, (d,), elements=angle)


def test_omega_values():
    for d in (1, 2, 3, 4):
        assert omega(np.zeros(d)) == 1.0
        assert omega(np.full(d, np.pi)) == pytest.approx(math.sqrt(1 + 4 * d), rel=1e-15)
    assert omega([np.pi / 2, np.pi / 2]) == pytest.approx(math.sqrt(5), rel=1e-15)


def test_grad_omega_values():
    np.testing.assert_array_equal(grad_omega(np.zeros(3)), 0.0)
    np.testing.assert_allclose(grad_omega([np.pi / 2, np.pi / 2]), [1 / math.sqrt(5)] * 2, rtol=1e-15)


def test_hessian_at_a3_point():
    h = hessian_phi([np.pi / 2, np.pi / 2])
    np.testing.assert_allclose(h, -0.4, atol=1e-15)
    assert np.linalg.matrix_rank(h) == 1
    assert abs(det_hessian([np.pi / 2, np.pi / 2])) < 1e-15


def test_det_nonzero_off_caustic():
    xi = [np.pi / 2, 0.0]
    det = det_hessian(xi)
    assert abs(det) > 0.1
    assert det == pytest.approx(np.linalg.det(hessian_phi(xi)), rel=1e-12)


def test_det_vanishes_on_d2_fold_curve():
    from scipy.optimize import brentq

    c1 = 0.6
    c2 = brentq(lambda c2: 5 - (c1 + c2) - (1 / c1 + 1 / c2), 0.05, 0.99)
    xi = np.arccos([c1, c2])
    assert abs(det_hessian(xi)) < 1e-10


def test_det_zero_when_all_cosines_vanish():
    for d in (2, 3, 4):
        xi = np.where(np.arange(d) % 2, np.pi / 2, 3 * np.pi / 2)
        assert abs(det_hessian(xi)) < 1e-12


def test_phi_aux_taylor_at_a3():
    xi0 = np.array([np.pi / 2, np.pi / 2])
    eta = np.array([3e-3, -1e-3])
    lead = -(eta.sum()) ** 2 / 5
    assert abs(phi_aux(eta, xi0) - lead) < 10 * np.linalg.norm(eta) ** 3
    assert phi_aux(np.zeros(2), xi0) == 0.0


def test_phi_aux_stationary_at_origin():
    xi0 = np.full(3, np.pi / 2)
    h = 1e-6
    g = [(phi_aux(h * e, xi0) - phi_aux(-h * e, xi0)) / (2 * h) for e in np.eye(3)]
    assert np.max(np.abs(g)) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_grad_vs_finite_differences(d, rng):
    h = 1e-5
    for xi in rng.uniform(0, 2 * np.pi, size=(100, d)):
        fd = np.array([(omega(xi + h * e) - omega(xi - h * e)) / (2 * h) for e in np.eye(d)])
        assert np.max(np.abs(fd - grad_omega(xi))) <= 1e-7


@pytest.mark.parametrize("d", [2, 3, 4])
def test_hessian_phi_vs_second_differences(d, rng):
    h = 1e-4
    eye = np.eye(d)
    for xi in rng.uniform(0, 2 * np.pi, size=(20, d)):
        fd = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                a, b = h * eye[i], h * eye[j]
                fd[i, j] = (
                    phi_aux(a + b, xi) - phi_aux(a - b, xi) - phi_aux(-a + b, xi) + phi_aux(-a - b, xi)
                ) / (4 * h * h)
        ref = hessian_phi(xi)
        assert np.max(np.abs(fd - ref)) <= 1e-5 * max(1.0, np.max(np.abs(ref)))


def test_max_group_speed():
    assert max_group_speed(2) == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    # sin x / sqrt(3 - 2 cos x) peaks where cos x = (3 - sqrt 5)/2
    assert max_group_speed(1) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-6)
    speeds = [max_group_speed(d) for d in (1, 2, 3, 4)]
    assert all(s < 1 for s in speeds)
    assert speeds == sorted(speeds)


def test_reduce_frequency():
    out = reduce_frequency([-1e-300, 2 * np.pi, 7.0])
    assert np.all((out >= 0) & (out < 2 * np.pi))


@given(freq(3), st.permutations(range(3)))
def test_symmetry(xi, perm):
    assert omega(xi[list(perm)]) == pytest.approx(omega(xi), rel=1e-14)
    assert omega(2 * np.pi - xi) == pytest.approx(omega(xi), rel=1e-14)
    a = abs(det_hessian(xi))
    assert abs(det_hessian(xi[list(perm)])) == pytest.approx(a, rel=1e-10, abs=1e-13)
    assert abs(det_hessian(2 * np.pi - xi)) == pytest.approx(a, rel=1e-10, abs=1e-13)


@given(freq(4))
def test_omega_bounds(xi):
    w = omega(xi)
    assert 1.0 <= w <= math.sqrt(17) + 1e-12
    assert np.linalg.norm(grad_omega(xi)) < 1.0


@given(freq(2) | freq(3) | freq(4))
def test_det_matches_matrix_determinant(xi):
    ref = np.linalg.det(hessian_phi(xi))
    scale = 2.0 ** len(xi)
    assert det_hessian(xi) == pytest.approx(ref, rel=1e-10, abs=1e-12 * scale)
