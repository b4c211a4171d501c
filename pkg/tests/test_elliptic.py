import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ellipj as scipy_ellipj

from lortorus import elliptic
from lortorus.expr import Expression
from oracles import K_HALF, K_QUARTER


@pytest.mark.parametrize("k", [0.0, 0.25, 0.5, 0.9, 0.999])
def test_vectorised_against_scipy(k):
    u = np.linspace(-12, 12, 2001)
    sn, cn, dn = elliptic.ellipj(u, k)
    ref = scipy_ellipj(u, k * k)
    for mine, theirs in zip((sn, cn, dn), ref[:3]):
        assert np.max(np.abs(mine - theirs)) < 5e-13


@settings(max_examples=80, deadline=None)
@given(u=st.floats(-20, 20), k=st.floats(0, 0.99))
def test_scalar_against_mpmath(u, k):
    m = k * k
    sn, cn, dn = elliptic.ellipj_scalar(u, k)
    assert sn == pytest.approx(float(mpmath.ellipfun("sn", u, m=m)), abs=1e-12)
    assert cn == pytest.approx(float(mpmath.ellipfun("cn", u, m=m)), abs=1e-12)
    assert dn == pytest.approx(float(mpmath.ellipfun("dn", u, m=m)), abs=1e-12)


def test_quarter_periods():
    assert elliptic.quarter_period(0.5) == pytest.approx(K_HALF, abs=1e-15)
    assert elliptic.quarter_period(0.25) == pytest.approx(K_QUARTER, abs=1e-15)
    assert elliptic.quarter_period(0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    with pytest.raises(ValueError):
        elliptic.quarter_period(1.0)


def test_sd_is_antiperiodic_over_2k():
    k = 0.5
    K = elliptic.quarter_period(k)
    e = Expression("jacobi_sd(x, 0.5)")
    for x in np.linspace(0, 3, 13):
        assert e(x + 2 * K) == pytest.approx(-e(x), abs=1e-13)
        assert e(x + 4 * K) == pytest.approx(e(x), abs=1e-13)


def test_pythagorean_identities():
    u = np.linspace(-5, 5, 501)
    k = 0.7
    sn, cn, dn = elliptic.ellipj(u, k)
    assert np.max(np.abs(sn**2 + cn**2 - 1)) < 1e-14
    assert np.max(np.abs(dn**2 + k * k * sn**2 - 1)) < 1e-14
