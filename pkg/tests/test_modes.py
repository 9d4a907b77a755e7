from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from sigma2lab.errors import DomainError, IndicialWeight, RegimeError
from sigma2lab.geometry import ModelDims
from sigma2lab.modes import (
    BumpForcing,
    ModeProblem,
    divergence_experiment,
    estimate_experiment,
    kv_weighted_monotonicity,
    mode_green_solve,
    mode_half_gap,
    mode_injectivity_scan,
    random_forcing,
    relative_residual,
    solution_operator_norm,
    weighted_norm,
)

SEED = 20240917


def test_half_gap_small_case():
    assert mode_half_gap(ModelDims(9, 1), 1) == pytest.approx(1.5, abs=1e-14)
    assert mode_half_gap(ModelDims(25, 4), 1) == pytest.approx(3.0, abs=1e-14)


def test_problem_validation():
    forcing = random_forcing(SEED, 0, 0.0)
    with pytest.raises(IndicialWeight):
        ModeProblem(1, 1.5, 1.5, 0.0, forcing)
    with pytest.raises(DomainError):
        ModeProblem(1, 1.5, 0.5, forcing.support[0] + 1.0, forcing)
    with pytest.raises(RegimeError):
        mode_green_solve(ModeProblem(1, 1.5, 2.0, 0.0, forcing))
    assert ModeProblem(1, 1.5, -2.0, 0.0, forcing).regime == "forward"


def test_forcing_is_reproducible_and_supported():
    first = random_forcing(SEED, 7, 5.0)
    assert first == random_forcing(SEED, 7, 5.0)
    assert first.support[0] > 5.0
    assert BumpForcing().is_zero


@given(
    st.integers(min_value=0, max_value=40),
    st.sampled_from([-5.0, 0.0, 5.0, 10.0]),
    st.sampled_from([0.1, 0.5, 0.9, -0.5, -1.3]),
    st.sampled_from([(9, 1), (25, 4)]),
)
@settings(max_examples=40, deadline=None)
def test_green_solution_satisfies_the_equation(member, tau0, fraction, case):
    delta_j = mode_half_gap(ModelDims(*case), 1)
    weight = fraction * delta_j if abs(fraction) < 1 else fraction * delta_j - 0.1
    problem = ModeProblem(1, delta_j, weight, tau0, random_forcing(SEED, member, tau0))
    assert relative_residual(mode_green_solve(problem)) < 1e-8


def test_green_solution_matches_a_sparse_direct_solve():
    delta_j = 1.5
    forcing = BumpForcing((2.0, 6.0), (1.0, 0.7), (1.0, -0.6))
    solution = mode_green_solve(ModeProblem(1, delta_j, 0.5, -5.0, forcing), step=0.01)
    tau = np.linspace(-4.0, 40.0, 22001)
    h = tau[1] - tau[0]
    inner = tau[1:-1]
    main = -2.0 / h**2 - delta_j**2 - np.exp(-2 * inner)
    off = np.full(inner.size - 1, 1.0 / h**2)
    omega = spsolve(diags([off, main, off], [-1, 0, 1], format="csc"), forcing(inner))
    reference = np.interp(solution.tau, inner, omega)
    window = (solution.tau > -2.0) & (solution.tau < 20.0)
    error = np.max(np.abs(solution.omega[window] - reference[window]))
    assert error < 1e-4 * np.max(np.abs(solution.omega))


def test_solution_is_linear_in_the_forcing():
    f1 = BumpForcing((3.0,), (1.0,), (1.0,))
    f2 = BumpForcing((7.0,), (0.6,), (1.0,))
    both = BumpForcing((3.0, 7.0), (1.0, 0.6), (2.0, -0.5))
    s1 = mode_green_solve(ModeProblem(1, 1.5, 0.3, -10.0, f1.plus(f2.scaled(0.0))))
    s2 = mode_green_solve(ModeProblem(1, 1.5, 0.3, -10.0, f1.scaled(0.0).plus(f2)))
    s = mode_green_solve(ModeProblem(1, 1.5, 0.3, -10.0, both))
    np.testing.assert_allclose(s.omega, 2 * s1.omega - 0.5 * s2.omega, atol=1e-13 * np.max(np.abs(s.omega)))


@pytest.mark.parametrize("rate,weight", [(-1.0, 0.5), (-2.0, 1.2), (-0.3, 0.1)])
def test_weighted_norm_of_an_exponential(rate, weight):
    tau = np.linspace(0.0, 5.0, 5001)
    f = np.exp(rate * tau)
    exact = math.sqrt(1.0 / (-2 * (rate + weight)))  # int_0^inf e^{2 (rate + weight) tau}
    assert weighted_norm(tau, f, weight, ((f[-1], rate),)) == pytest.approx(exact, rel=1e-10)
    assert weighted_norm(tau, f, weight) == pytest.approx(exact, rel=1e-6)


@given(st.floats(min_value=0.05, max_value=0.95), st.sampled_from([-5.0, 0.0, 5.0, 10.0]))
@settings(max_examples=10, deadline=None)
def test_ratio_bound_holds_on_small_ensembles(fraction, tau0):
    weight = 1.5 * fraction
    row = estimate_experiment(ModelDims(9, 1), 1, weight, [tau0], ensemble=8, seed=SEED)[0]
    assert 0 < row.max_ratio <= 1.0 / (1.5**2 - weight**2)


def test_operator_norm_matches_the_bound_and_diverges():
    norms = [solution_operator_norm(1.5, 1.5 * (1 - 2.0**-m)) for m in range(1, 5)]
    assert all(b > a for a, b in zip(norms, norms[1:]))
    assert norms[0] <= 1.0 / (1.5**2 - 0.75**2) * 1.001


def test_divergence_rows():
    rows = divergence_experiment(ModelDims(9, 1), 1, steps=(1, 2, 3), ensemble=8)
    assert [row.m for row in rows] == [1, 2, 3]
    assert all(b.max_ratio > a.max_ratio for a, b in zip(rows, rows[1:]))
    assert all(row.scaled_norm > 0.3 for row in rows)


@given(st.floats(min_value=0.05, max_value=12.0))
@settings(max_examples=40, deadline=None)
def test_weighted_k_is_nonincreasing(order):
    assert kv_weighted_monotonicity(order, np.geomspace(1e-3, 50.0, 400))


def test_weighted_k_requires_positive_order():
    with pytest.raises(DomainError):
        kv_weighted_monotonicity(0.0, np.array([1.0, 2.0]))


@pytest.mark.parametrize("level", [0, 1, 2])
def test_homogeneous_problem_has_trivial_kernel(level):
    report = mode_injectivity_scan(ModelDims(9, 1), level, 0.5)
    assert report.trivial_kernel
    if level >= 1:
        assert report.admissible_at_origin == ["I"]
        assert report.admissible_at_infinity == ["K"]
