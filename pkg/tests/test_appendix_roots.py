import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dkglab.appendix_roots import (
    KNOWN_ROOTS,
    appendix_system,
    roots_csv,
    scaled_residual,
    solve_appendix,
    swap_pairs,
)

nonzero = st.floats(0.05, 10.0) | st.floats(-10.0, -0.05)


def test_known_root_raw_residual():
    res = appendix_system(*KNOWN_ROOTS[0], cleared=False)
    # the table carries eight digits; 1/z and 1/x amplify the rounding
    assert np.max(np.abs(res)) <= 1e-4 * 100
    assert scaled_residual(KNOWN_ROOTS[0]) < 1e-6


def test_unit_point():
    assert appendix_system(1.0, 1.0, 1.0, cleared=False)[0] == pytest.approx(1.0)


@given(nonzero, nonzero, nonzero)
def test_swap_symmetry(x, y, z):
    a = appendix_system(x, y, z, cleared=False)
    b = appendix_system(x, z, y, cleared=False)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@given(nonzero, nonzero, nonzero)
def test_cleared_matches_raw(x, y, z):
    raw = appendix_system(x, y, z, cleared=False)
    cl = appendix_system(x, y, z)
    np.testing.assert_allclose(cl[0], raw[0] * x * y * z, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(cl[1], raw[1] * (x * y * z) ** 3, rtol=1e-9, atol=1e-9)
    assert cl[2] == raw[2]


def test_solve_appendix_reproduces_table():
    roots = solve_appendix(10_000, 15.0, seed=0)
    found = np.array([r.as_array() for r in roots if not r.extra])
    assert found.shape == (4, 3)
    for k in KNOWN_ROOTS:
        assert np.min(np.max(np.abs(found - k), axis=1)) < 1e-4
    assert all(r.residual < 1e-10 for r in roots)
    pairs = swap_pairs(roots)
    assert len(pairs) == 2


def test_solve_appendix_seed_independent():
    a = solve_appendix(10_000, seed=1)
    b = solve_appendix(10_000, seed=2)
    np.testing.assert_allclose([r.as_array() for r in a], [r.as_array() for r in b], atol=1e-8)


def test_solve_appendix_argument_checks():
    with pytest.raises(ValueError):
        solve_appendix(100)
    with pytest.raises(ValueError):
        solve_appendix(10_000, box=5.0)


def test_roots_csv_header():
    text = roots_csv(solve_appendix())
    lines = text.strip().splitlines()
    assert lines[0] == "x,y,z,residual"
    assert len(lines) == 5
