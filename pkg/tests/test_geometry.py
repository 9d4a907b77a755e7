from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sigma2lab.errors import DomainError
from sigma2lab.geometry import (
    DiagonalTensor,
    ModelDims,
    cone_membership,
    critical_dimension_bisect,
    critical_dimension_P,
    elementary_symmetric,
    euclidean_radial_b_tensor,
    newton_tensor,
    product_constant_c,
    product_tensor,
    radial_b_tensor,
)


def brute_sigma(values, m):
    return sum(math.prod(combo) for combo in itertools.combinations(values, m))


small_ints = st.integers(min_value=-6, max_value=6)
blocks = st.lists(st.tuples(small_ints, st.integers(min_value=1, max_value=4)), min_size=1, max_size=4)


@given(blocks, st.integers(min_value=0, max_value=5))
@settings(max_examples=80, deadline=None)
def test_elementary_symmetric_matches_expansion(block_list, m):
    tensor = DiagonalTensor(tuple(block_list))
    assume(m <= tensor.dim)
    expected = brute_sigma(tensor.expanded(), m)
    assert elementary_symmetric(tensor, m) == expected


@given(blocks, st.integers(min_value=1, max_value=4))
@settings(max_examples=60, deadline=None)
def test_newton_tensor_trace_identity(block_list, m):
    # trace(T^{m-1} B) = m sigma_m(B)
    tensor = DiagonalTensor(tuple(block_list))
    assume(m <= tensor.dim)
    newton = newton_tensor(tensor, m - 1)
    trace = sum(t * b * mult for t, (b, mult) in zip(newton.values, tensor.blocks))
    assert trace == m * elementary_symmetric(tensor, m)


@given(st.lists(st.floats(min_value=0.1, max_value=5.0), min_size=2, max_size=6))
@settings(max_examples=60, deadline=None)
def test_positive_tensors_lie_in_the_cone(values):
    tensor = DiagonalTensor(tuple((v, 1) for v in values))
    report = cone_membership(tensor, 2)
    assert report.in_cone and report.newton_positive
    assert report.maclaurin_gap >= -1e-12


def test_order_above_dimension_is_rejected():
    with pytest.raises(DomainError):
        elementary_symmetric(DiagonalTensor(((1, 1),)), 2)


def test_cone_rejects_negative_trace():
    assert not cone_membership(DiagonalTensor(((-1, 3), (0.5, 1))), 2).in_cone


@pytest.mark.parametrize("n,p", [(9, 1), (12, 2), (25, 4), (30, 5)])
def test_product_constant_brute_force(n, p):
    values = [1] * (n - p - 1) + [-1] * (p + 1)
    assert product_constant_c(n, p, 2) == brute_sigma(values, 2)
    assert ModelDims(n, p).c_product == brute_sigma(values, 2)
    assert elementary_symmetric(product_tensor(n, p), 2) * 4 == brute_sigma(values, 2)


def test_critical_dimensions_small_case():
    assert critical_dimension_P(9, 2) == 2
    assert critical_dimension_P(9, 3) == 1


@pytest.mark.parametrize("n", [7, 9, 13, 25, 40])
def test_critical_dimension_closed_form_vs_bisection(n):
    assert critical_dimension_bisect(n, 2) == pytest.approx(critical_dimension_P(n, 2), abs=1e-9)


def test_boundary_codimension_is_rejected():
    with pytest.raises(DomainError):
        ModelDims(9, 2)
    assert critical_dimension_P(25, 2) == 9


@pytest.mark.parametrize("n,p", [(9, 1), (25, 4)])
def test_v_inf_solves_the_equilibrium(n, p):
    dims = ModelDims(n, p)
    tensor = radial_b_tensor(dims.v_inf, 0.0, 0.0, dims)
    lhs = elementary_symmetric(tensor, 2)
    assert lhs == pytest.approx(float(dims.c) * dims.v_inf ** float(dims.q), rel=1e-13)


def test_small_case_constants():
    dims = ModelDims(9, 1)
    assert dims.c == Fraction(225, 16)
    assert dims.v_inf == pytest.approx((2 / 9) ** (5 / 16), abs=1e-14)
    assert dims.alpha0_pair == pytest.approx((0.5, 1.25), abs=1e-14)
    assert dims.alpha1 == pytest.approx(1.75, abs=1e-14)
    assert dims.alpha2 == pytest.approx(1.4, abs=1e-14)


@given(
    st.floats(min_value=0.2, max_value=3.0),
    st.floats(min_value=-1.0, max_value=1.0),
    st.floats(min_value=-1.0, max_value=1.0),
    st.floats(min_value=0.1, max_value=5.0),
)
@settings(max_examples=60, deadline=None)
def test_cylindrical_and_euclidean_pictures_agree(u, du, d2u, r):
    # v(t) = r^g u(r) with t = -log r; the two B tensors differ by r^(n/k)
    dims = ModelDims(9, 1)
    g = float(dims.shift)
    v = r**g * u
    vdot = -(r**g) * (g * u + r * du)
    vddot = r**g * (g * g * u + (2 * g + 1) * r * du + r * r * d2u)
    cyl = np.array(radial_b_tensor(v, vdot, vddot, dims).values, dtype=float)
    flat = np.array(euclidean_radial_b_tensor(u, du, d2u, r, dims).values, dtype=float)
    scale = r ** (dims.n / dims.k) * (u * u + du * du + abs(u * d2u) + abs(u * du) / r)
    np.testing.assert_allclose(cyl, r ** (dims.n / dims.k) * flat, rtol=0, atol=1e-12 * scale)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_critical_codimension_asymptotic_bound(k):
    # equality for k = 2, strict for larger k
    dims = range(9, 101) if k < 4 else range(9, 101, 13)  # k = 4 goes through the slower scan
    for n in dims:
        bound = n / 2 - (2 + math.sqrt(n)) / 2
        value = critical_dimension_P(n, k)
        if k == 2:
            assert value == pytest.approx(bound, abs=1e-12)
        else:
            assert value < bound
