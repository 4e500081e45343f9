import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dkglab.errors import AliasingRisk, BoundaryContamination
from dkglab.oscint import (
    Amplitude,
    aliasing_threshold,
    dirichlet_energy,
    dump_kernel,
    kernel_at,
    kernel_direct,
    kernel_fft,
    kernel_ode,
    kernel_sup,
    load_kernel,
    propagator_pair,
    slice_csv,
)

TWO_PI = 2 * np.pi


def test_amplitude_parse():
    assert Amplitude.parse("one") is Amplitude.One
    assert Amplitude.parse("inv-omega") is Amplitude.InverseOmega
    assert Amplitude.parse(Amplitude.One) is Amplitude.One
    with pytest.raises(ValueError):
        Amplitude.parse("cosine")


def test_time_zero_is_delta():
    g = kernel_fft(0.0, 2, 64)
    assert g.at((0, 0)) == pytest.approx(TWO_PI**2, rel=1e-14)
    v = g.values.copy()
    v[32, 32] = 0
    assert np.max(np.abs(v)) <= 1e-10


def test_direct_time_zero():
    assert kernel_direct(0.0, (0, 0)) == pytest.approx(TWO_PI**2, rel=1e-12)


def test_fft_vs_direct_d2(rng):
    g = kernel_fft(5.0, 2, 128)
    for x in rng.integers(-12, 13, size=(20, 2)):
        assert abs(g.at(x) - kernel_direct(5.0, x)) <= 1e-10


def test_fft_vs_direct_single_site():
    g = kernel_fft(5.0, 2, 128)
    assert abs(g.at((3, 1)) - kernel_direct(5.0, (3, 1))) <= 1e-10


def test_fft_vs_direct_d3():
    g = kernel_fft(5.0, 3, 64)
    assert abs(g.at((1, 1, 1)) - kernel_direct(5.0, (1, 1, 1), nodes=200)) <= 1e-8


def test_inverse_omega_amplitude(rng):
    g = kernel_fft(4.0, 2, 64, "inv-omega")
    for x in rng.integers(-8, 9, size=(5, 2)):
        assert abs(g.at(x) - kernel_direct(4.0, x, amp="inv-omega", nodes=200)) <= 1e-10


def test_kernel_at_matches_grid(rng):
    g = kernel_fft(9.0, 3, 48)
    for x in rng.integers(-10, 11, size=(4, 3)):
        assert abs(kernel_at(9.0, x, 48) - g.at(x)) <= 1e-11


def test_sup_helper():
    m, site = kernel_sup(7.0, 2, 64)
    m2, site2 = kernel_fft(7.0, 2, 64).sup()
    assert m == pytest.approx(m2, rel=1e-14)
    assert max(abs(site[0]), abs(site[1])) == max(abs(site2[0]), abs(site2[1]))


def test_spectral_convergence():
    a = kernel_fft(5.0, 2, 64)
    b = kernel_fft(5.0, 2, 128)
    core = b.values[32:96, 32:96]
    assert np.max(np.abs(core - a.values)) < 1e-10


def test_aliasing_warning():
    with pytest.warns(AliasingRisk):
        kernel_fft(100.0, 2, 64)
    assert aliasing_threshold(100.0, 2) == 2 * math.ceil(100 / math.sqrt(2)) + 8


@pytest.mark.parametrize("d", [2, 3])
def test_lattice_symmetries(d):
    g = kernel_fft(7.0, d, 48)
    v = g.values[(slice(1, None),) * d]  # drop the unpaired -n/2 layer
    for ax in range(d):
        np.testing.assert_allclose(np.flip(v, axis=ax), v, atol=1e-12)
    np.testing.assert_allclose(np.swapaxes(v, 0, 1), v, atol=1e-12)


@given(st.floats(0.0, 30.0))
def test_plancherel(t):
    g = kernel_fft(t, 2, 64)
    assert np.sum(np.abs(g.values) ** 2) == pytest.approx(TWO_PI**4, rel=1e-12)


def test_ode_matches_cosine_kernel():
    u = kernel_ode(10.0, 2, 40, dt=1e-3)
    u0, _ = propagator_pair(10.0, 2, 128)
    ref = u0.values[64 - 40 : 64 + 41, 64 - 40 : 64 + 41]
    assert np.max(np.abs(u - ref)) <= 1e-6


def test_ode_energy():
    u, p = kernel_ode(0.0, 2, 40, return_state=True)
    e0 = dirichlet_energy(u, p)
    # delta data: mass 1/2 plus 2d unit forward differences
    assert e0 == pytest.approx(2.5)
    u, p = kernel_ode(10.0, 2, 40, return_state=True)
    assert dirichlet_energy(u, p) == pytest.approx(e0, rel=1e-8)


def test_ode_arguments():
    with pytest.raises(ValueError):
        kernel_ode(10.0, 2, 15)
    with pytest.raises(ValueError):
        kernel_ode(1.0, 2, 20, dt=0.1)
    # the smallest box allowed already clears the light cone by more than 5
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryContamination)
        kernel_ode(5.0, 1, 15)


def test_propagators_at_zero():
    u0, u1 = propagator_pair(0.0, 2, 32)
    delta = np.zeros((32, 32))
    delta[16, 16] = 1
    np.testing.assert_allclose(u0.values, delta, atol=1e-15)
    np.testing.assert_allclose(u1.values, 0, atol=1e-15)


def test_sine_propagator_derivative():
    t = 6.0
    errs = []
    for h in (1e-2, 5e-3):
        _, a = propagator_pair(t + h, 2, 64)
        _, b = propagator_pair(t - h, 2, 64)
        u0, _ = propagator_pair(t, 2, 64)
        errs.append(np.max(np.abs((a.values - b.values) / (2 * h) - u0.values)))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@given(st.floats(0.0, 20.0))
def test_propagator_parity(t):
    a0, a1 = propagator_pair(t, 2, 48)
    b0, b1 = propagator_pair(-t, 2, 48)
    np.testing.assert_allclose(a0.values, b0.values, atol=1e-14)
    np.testing.assert_allclose(a1.values, -b1.values, atol=1e-14)


def test_dump_round_trip():
    g = kernel_fft(3.5, 2, 32, "inv-omega")
    buf = io.BytesIO()
    dump_kernel(g, buf)
    buf.seek(0)
    h = load_kernel(buf)
    assert (h.d, h.n, h.t, h.amp) == (2, 32, 3.5, Amplitude.InverseOmega)
    np.testing.assert_array_equal(h.values, g.values)
    with pytest.raises(ValueError):
        load_kernel(io.BytesIO(b"XXXX" + bytes(17)))


def test_slice_csv():
    g = kernel_fft(0.0, 2, 16)
    lines = slice_csv(g, radius=1).strip().splitlines()
    assert lines[0] == "x1,x2,re,im"
    assert len(lines) == 10
    assert "0,0,39.4784176044,0" in lines
