from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigma2lab.errors import DomainError
from sigma2lab.geometry import ModelDims, elementary_symmetric, radial_b_tensor
from sigma2lab.radial import (
    PhaseState,
    equilibrium_profile,
    exponential_ansatz_roots,
    from_u_picture,
    ode_residual,
    phase_jacobian,
    profile_diagnostics,
    rescale_translate,
    second_derivative_closure,
    to_u_picture,
)


@given(st.floats(min_value=0.05, max_value=0.6), st.floats(min_value=-0.3, max_value=0.3))
@settings(max_examples=60, deadline=None)
def test_closure_solves_the_radial_equation(v, slope):
    dims = ModelDims(9, 1)
    vdot = slope * v
    vddot = second_derivative_closure(PhaseState(v, vdot), dims)
    lhs = elementary_symmetric(radial_b_tensor(v, vdot, vddot, dims), 2)
    rhs = float(dims.c) * v ** float(dims.q)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n,p", [(9, 1), (25, 4)])
def test_exponential_ansatz_contains_closed_form_rates(n, p):
    dims = ModelDims(n, p)
    roots = exponential_ansatz_roots(dims)
    for rate in dims.alpha0_pair:
        assert min(abs(r - rate) for r in roots) < 1e-9


def test_profile_small_case(profile_small, dims_small):
    diag = profile_diagnostics(profile_small)
    assert diag["v_inf_residual"] < 1e-6
    assert abs(diag["alpha0_fit"] - 0.5) < 0.01
    assert diag["ode_residual_fd"] < 1e-9
    assert diag["min_sigma1"] > 0 and diag["min_sigma2"] > 0
    assert np.all(profile_small.v > 0)


def test_profile_large_case(profile_large, dims_large):
    diag = profile_diagnostics(profile_large)
    assert diag["v_inf_residual"] < 1e-6
    assert abs(diag["alpha0_fit"] - dims_large.alpha0) < 0.01
    assert diag["min_sigma1"] > 0 and diag["min_sigma2"] > 0


def test_closure_and_fd_residuals_agree(profile_small):
    scale = float(profile_small.dims.c) * profile_small.v_inf ** float(profile_small.dims.q)
    assert np.max(np.abs(ode_residual(profile_small, "closure"))) < 1e-10 * max(scale, 1)
    with pytest.raises(DomainError):
        ode_residual(profile_small, "spectral")


def test_dense_evaluation_matches_samples(profile_small):
    v, vd, _ = profile_small.evaluate(profile_small.t[::50])
    np.testing.assert_allclose(v, profile_small.v[::50], rtol=1e-10)
    np.testing.assert_allclose(vd, profile_small.vdot[::50], rtol=1e-8, atol=1e-14)


def test_left_tail_is_continuous(profile_small):
    lo = profile_small.t_range[0] - profile_small.t_offset
    v, vd, _ = profile_small.evaluate(np.array([lo - 1e-9, lo + 1e-9]))
    assert v[0] == pytest.approx(v[1], rel=1e-6)
    assert vd[0] == pytest.approx(vd[1], rel=1e-6)


@given(st.floats(min_value=1e-3, max_value=1.0))
@settings(max_examples=25, deadline=None)
def test_rescaling_is_a_translation(epsilon):
    from sigma2lab import ModelDims as Dims, solve_fast_decay  # noqa: F401

    dims = Dims(9, 1)
    profile = equilibrium_profile(dims, np.linspace(-5, 5, 11))
    moved = rescale_translate(profile, epsilon)
    np.testing.assert_allclose(moved.t, profile.t - math.log(epsilon), atol=1e-12)
    np.testing.assert_array_equal(moved.v, profile.v)


def test_rescaling_preserves_the_dense_solution(profile_small):
    moved = rescale_translate(profile_small, 0.05)
    v_moved = moved.evaluate(profile_small.t[1000:1010] - math.log(0.05))[0]
    np.testing.assert_allclose(v_moved, profile_small.v[1000:1010], rtol=1e-10)
    with pytest.raises(DomainError):
        rescale_translate(profile_small, 0.0)


def test_u_picture_round_trip(profile_small, dims_small):
    r, u = to_u_picture(profile_small)
    t, v = from_u_picture(r, u, dims_small)
    np.testing.assert_allclose(t, profile_small.t, atol=1e-12)
    np.testing.assert_allclose(v, profile_small.v, rtol=1e-12)


@pytest.mark.parametrize("n,p", [(9, 1), (25, 4)])
def test_phase_jacobian_trace_and_determinant(n, p):
    dims = ModelDims(n, p)
    jac = phase_jacobian(dims)
    eig = np.linalg.eigvals(jac)
    assert np.all(eig.real < 0)
    assert np.trace(jac) == pytest.approx(eig.sum().real, abs=1e-12)
