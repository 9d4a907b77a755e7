from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from sigma2lab.bessel import bessel_i, bessel_ik_scaled, bessel_k, bessel_pair, wronskian_defect
from sigma2lab.errors import DomainError

ARGS = np.concatenate([np.geomspace(1e-3, 30.0, 200), [1.999, 2.0, 2.001, 55.0, 300.0, 6e4]])


@pytest.mark.parametrize("order", [0.0, 0.25, 0.5, 1.0, 1.5, 2.7, 3.0, 7.5, 10.0])
def test_scaled_values_match_scipy(order):
    ie, ie_p, ke, ke_p = bessel_ik_scaled(order, ARGS)
    np.testing.assert_allclose(ie, special.ive(order, ARGS), rtol=1e-12)
    np.testing.assert_allclose(ke, special.kve(order, ARGS), rtol=1e-12)
    moderate = ARGS <= 300.0  # unscaled derivatives from scipy overflow beyond
    x = ARGS[moderate]
    np.testing.assert_allclose(ie_p[moderate], special.ivp(order, x) * np.exp(-x), rtol=1e-11)
    np.testing.assert_allclose(ke_p[moderate], special.kvp(order, x) * np.exp(x), rtol=1e-11)


@given(st.floats(min_value=0.0, max_value=10.0), st.floats(min_value=1e-3, max_value=30.0))
@settings(max_examples=200, deadline=None)
def test_wronskian_identity(order, argument):
    assert wronskian_defect(order, argument)[0] < 1e-12


@given(st.floats(min_value=0.0, max_value=10.0), st.floats(min_value=0.05, max_value=20.0))
@settings(max_examples=100, deadline=None)
def test_unscaled_values_and_pair(order, argument):
    pair = bessel_pair(order, argument)
    assert pair.i_val == pytest.approx(float(bessel_i(order, argument)[0]), rel=1e-14)
    assert pair.k_val == pytest.approx(float(bessel_k(order, argument)[0]), rel=1e-14)
    assert pair.i_val == pytest.approx(special.iv(order, argument), rel=1e-11)
    assert pair.k_val == pytest.approx(special.kv(order, argument), rel=1e-11)
    assert pair.est_error < 1e-11


def test_mixed_scale_arrays_stay_finite():
    x = np.array([2.01, 5.0, 6e4, 2.5, 1e3])
    ke = bessel_ik_scaled(3.0, x)[2]
    assert np.all(np.isfinite(ke))
    np.testing.assert_allclose(ke, special.kve(3.0, x), rtol=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        bessel_ik_scaled(-0.5, 1.0)
    with pytest.raises(DomainError):
        bessel_ik_scaled(1.0, [1.0, 0.0])
