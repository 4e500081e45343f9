import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dkglab.errors import DegenerateDenominator, InadmissiblePair, InadmissiblePairWarning, Overflow
from dkglab.oscint import propagator_pair
from dkglab.pde import (
    P_D,
    S_D,
    StrichartzPair,
    decay_experiment,
    delta_state,
    energy,
    evolve,
    expected_exponent,
    is_admissible,
    linear_flow,
    linear_trajectory,
    lp_norm,
    nonlinear_step,
    quadratic_energy,
    random_state,
    resolvent_exponents,
    resolvent_ratio,
    strichartz_norm,
    strichartz_ratio_study,
)


def test_thresholds():
    assert P_D[2] == pytest.approx(3.8081, abs=1e-4)
    assert S_D[2] == pytest.approx(0.9041, abs=1e-4)
    assert S_D[3] == pytest.approx(0.6199, abs=1e-4)
    assert expected_exponent(2, math.inf) == 0.75
    assert expected_exponent(3, 2) == 0


def test_linear_flow_identity_and_inverse():
    st0 = random_state(2, 32, seed=4)
    assert np.array_equal(linear_flow(st0, 0.0).u, st0.u)
    back = linear_flow(linear_flow(st0, 0.7), -0.7)
    np.testing.assert_allclose(back.u, st0.u, atol=1e-12)
    np.testing.assert_allclose(back.p, st0.p, atol=1e-12)


def test_linear_flow_matches_propagator():
    m, t = 64, 9.0
    out = linear_flow(delta_state(2, m, sign=0), t)
    u0, _ = propagator_pair(t, 2, m)
    # the delta sits at m//2, which is where fftshift puts the origin
    np.testing.assert_allclose(out.u, u0.values, atol=1e-12)


def test_sine_part_of_flow():
    m, t = 64, 9.0
    st0 = delta_state(2, m, sign=0)
    st0 = replace(st0, u=np.zeros_like(st0.u), p=st0.u)
    _, u1 = propagator_pair(t, 2, m)
    np.testing.assert_allclose(linear_flow(st0, t).u, u1.values, atol=1e-12)


def test_linear_energy_conservation():
    st0 = random_state(2, 48, seed=1, sign=0)
    q0, h0 = quadratic_energy(st0), energy(st0)
    out = linear_flow(st0, 20.0)
    assert quadratic_energy(out) == pytest.approx(q0, rel=1e-12)
    assert energy(out) == pytest.approx(h0, rel=1e-12)
    assert energy(delta_state(2, 8, epsilon=0.0)) == 0.0


def test_nonlinear_reversible():
    st0 = random_state(2, 32, epsilon=0.5, seed=2, s=2.0)
    there = evolve(st0, 0.05, 40)
    back = evolve(there, -0.05, 40)
    np.testing.assert_allclose(back.u, st0.u, atol=1e-10)
    np.testing.assert_allclose(back.p, st0.p, atol=1e-10)


def test_sign_flip_symmetry():
    st0 = random_state(2, 32, epsilon=0.8, seed=3, s=1.5)
    neg = replace(st0, u=-st0.u, p=-st0.p)
    a = evolve(st0, 0.05, 30)
    b = evolve(neg, 0.05, 30)
    np.testing.assert_allclose(b.u, -a.u, atol=1e-13)


def test_nonlinear_correction_scaling():
    # the first Duhamel correction is of size eps^(2s+1)
    ratios = []
    for eps in (0.02, 0.04):
        nl = evolve(delta_state(2, 48, eps, s=2.0), 0.05, 200)
        lin = linear_flow(delta_state(2, 48, eps, sign=0), 10.0)
        ratios.append(np.max(np.abs(nl.u - lin.u)) / eps**5)
    assert ratios[1] / ratios[0] == pytest.approx(1.0, abs=0.05)


def test_strang_second_order():
    st0 = random_state(2, 32, epsilon=1.0, seed=5, s=1.0)
    T = 2.0
    ref = evolve(st0, 0.1 / 8, 8 * 20).u
    e1 = np.max(np.abs(evolve(st0, 0.1, 20).u - ref))
    e2 = np.max(np.abs(evolve(st0, 0.05, 40).u - ref))
    assert math.log2(e1 / e2) == pytest.approx(2.0, abs=0.2)


def test_strang_energy_short_run():
    st0 = random_state(2, 64, epsilon=0.1, seed=0, s=1.0)
    e0 = energy(st0)
    out = evolve(st0, 0.005, 400)
    assert abs(energy(out) - e0) / e0 <= 1e-6


def test_step_size_limit():
    with pytest.raises(ValueError):
        nonlinear_step(delta_state(2, 8), 0.2)


def test_overflow_flag():
    st0 = delta_state(1, 16, epsilon=50.0, s=1.0, sign=-1)
    with pytest.warns(Overflow):
        out = evolve(st0, 0.1, 50)
    assert out.overflow


def test_lp_norms():
    assert lp_norm(delta_state(3, 8), math.inf) == 1.0
    with pytest.raises(ValueError):
        lp_norm(np.ones(3), 0.5)


@given(st.integers(0, 10_000), st.floats(1.0, 6.0), st.floats(0.0, 4.0))
def test_holder_ordering(seed, p, gap):
    u = random_state(2, 16, epsilon=1.0, seed=seed).u
    assert lp_norm(u, p) >= lp_norm(u, p + gap) * (1 - 1e-12)


def test_state_validation():
    with pytest.raises(ValueError):
        delta_state(2, 8, sign=2)


def test_admissibility_endpoints():
    assert is_admissible(8 / 3, math.inf, 2)
    assert not is_admissible(8 / 3 - 1e-6, math.inf, 2)
    assert is_admissible(12 / 7, math.inf, 3)
    assert not is_admissible(4 / 3, math.inf, 4)
    assert not is_admissible(4 / 3, math.inf, 4, eps_prime=0.0)
    assert is_admissible(4 / 3 + 1e-3, math.inf, 4)
    assert not is_admissible(4.0, 1.5, 2)


def test_strichartz_flags_inadmissible():
    traj = linear_trajectory(delta_state(2, 32, sign=0), 0.1, 1.0)
    with pytest.raises(InadmissiblePair):
        strichartz_norm(traj, StrichartzPair(2.0, math.inf, 2))
    with pytest.warns(InadmissiblePairWarning):
        strichartz_norm(traj, StrichartzPair(2.0, math.inf, 2), check=False)


def test_strichartz_translation_invariance():
    a = delta_state(2, 64, sign=0)
    b = replace(a, u=np.roll(a.u, (3, -2), axis=(0, 1)))
    pair = StrichartzPair(8 / 3, math.inf, 2)
    na = strichartz_norm(linear_trajectory(a, 0.1, 10.0), pair)
    nb = strichartz_norm(linear_trajectory(b, 0.1, 10.0), pair)
    assert nb == pytest.approx(na, rel=1e-12)


def test_strichartz_infinite_q():
    traj = linear_trajectory(delta_state(2, 32, sign=0), 0.1, 1.0)
    assert strichartz_norm(traj, StrichartzPair(math.inf, 2.0, 2)) == pytest.approx(1.0)


@pytest.mark.slow
def test_strichartz_ratio_stable():
    pair = StrichartzPair(8 / 3, math.inf, 2)
    r1 = strichartz_ratio_study(2, pair, n_trials=2, t_max=20.0)
    r2 = strichartz_ratio_study(2, pair, n_trials=2, t_max=40.0)
    assert r2 / r1 < 1.05


def test_resolvent_exponents():
    a, b = resolvent_exponents(3)
    assert a == pytest.approx(14.0)
    assert b == pytest.approx(14 / 13)
    with pytest.raises(ValueError):
        resolvent_exponents(2)


def test_resolvent_homogeneous():
    r1 = resolvent_ratio(3, 2.0 + 0.1j, n_trials=3, m=16)
    r2 = resolvent_ratio(3, 2.0 + 0.1j, n_trials=3, m=16, scale=10.0)
    assert r2 == pytest.approx(r1, rel=1e-12)


def test_resolvent_far_from_spectrum():
    near = resolvent_ratio(3, 100.0, n_trials=3, m=16)
    far = resolvent_ratio(3, 1000.0, n_trials=3, m=16)
    assert far < near
    assert near * 100 < 1.0


def test_resolvent_degenerate():
    with pytest.raises(DegenerateDenominator):
        resolvent_ratio(3, 1.0, n_trials=2, m=16, scale=1e-20)


def test_decay_experiment_validation():
    with pytest.raises(ValueError):
        decay_experiment(2, 0.5, 0.05, math.inf, 80.0)
    with pytest.warns(UserWarning):
        decay_experiment(2, 2.0, 0.05, 5.0, 80.0, samples=6)


def test_linear_and_nonlinear_decay_agree():
    kw = dict(t_min=20.0, t_max=80.0, samples=8)
    with pytest.warns(UserWarning, match="beyond p_d"):
        lin = decay_experiment(2, 2.0, 0.01, math.inf, nonlinear=False, **kw)
        nl = decay_experiment(2, 2.0, 0.01, math.inf, **kw)
    assert nl.exponent == pytest.approx(lin.exponent, abs=0.02)


@pytest.mark.parametrize("p", [2.0, 3.0, math.inf])
def test_decay_exponent_by_p(p):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        fit = decay_experiment(2, 2.0, 0.05, p, 80.0, samples=8)
    assert fit.exponent == pytest.approx(expected_exponent(2, p), abs=0.1)
