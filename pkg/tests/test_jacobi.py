import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lortorus.errors import NotPeriodic, SpanExhausted
from lortorus.geodesic import LaunchSpec, launch_tangent
from lortorus.jacobi import (basis_from_coefficient, fundamental_basis, min_gap, monodromy, monodromy_over,
                             next_zero, simple_zero_slopes)
from lortorus.jacobi import identity_residuals
from conftest import PI, profile
from oracles import CP_OMEGA

_CP = {}


def cp_basis():
    if not _CP:
        tr = launch_tangent(profile("sin(2*x)", PI), LaunchSpec(1, 0.5, 0, "left"))
        _CP["trace"], _CP["basis"] = tr, fundamental_basis(tr)
    return _CP["trace"], _CP["basis"]


def test_zero_coefficient_is_linear():
    b = basis_from_coefficient(lambda t: 0.0, -5.0, 5.0)
    ts = np.linspace(-5, 5, 101)
    s, sp, c, cp = b.values(ts)
    assert np.max(np.abs(s - ts)) < 1e-10
    assert np.max(np.abs(c - 1.0)) < 1e-10
    with pytest.raises(SpanExhausted):
        next_zero(b, 0.5)


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_harmonic_oscillator(k):
    b = basis_from_coefficient(lambda t: k * k, -1.0, 10.0 / k + 1.0)
    ts = np.linspace(0, 10.0 / k, 400)
    s, _, c, _ = b.values(ts)
    assert np.max(np.abs(s - np.sin(k * ts) / k)) < 1e-8
    assert np.max(np.abs(c - np.cos(k * ts))) < 1e-8


def test_unit_oscillator_zero_spacing():
    b = basis_from_coefficient(lambda t: 1.0, -8.0, 8.0, omega=PI / 2)
    for a in np.linspace(-7.5, 4.5, 25):
        assert next_zero(b, a) == pytest.approx(a + PI, abs=1e-8)
    gap, _ = min_gap(None, b, 40)
    assert gap == pytest.approx(PI, abs=1e-8)


def test_constant_fixture_monodromy_identity():
    omega = 0.8
    r = (PI / (2 * omega)) ** 2
    b = basis_from_coefficient(lambda t: r, -4 * omega, 4 * omega, omega=omega)
    assert monodromy_over(b, 4 * omega).is_identity(1e-6)
    assert monodromy_over(b, 2 * omega).is_minus_identity(1e-6)
    # symmetric case: monodromy = Id iff c(omega) = 0
    assert abs(b.c(omega)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-2, 2), amp=st.floats(0, 3), T=st.floats(0.5, 4))
def test_monodromy_determinant(a, amp, T):
    b = basis_from_coefficient(lambda t: a + amp * math.cos(2 * PI * t / T), 0.0, T)
    assume(np.all(np.abs(b.values(T)) < 1e6))
    m = monodromy_over(b, T)
    assert m.det == pytest.approx(1.0, abs=1e-8 * max(1.0, np.max(np.abs(m.matrix)) ** 2))


def test_monodromy_needs_periodic():
    p = profile("sin(x)*(1 + 0.25*sin(x/2))", 4 * PI)
    tr = launch_tangent(p, LaunchSpec(1, p.bands[2].sup_abs, 0, "right"))
    with pytest.raises(NotPeriodic):
        monodromy(tr, fundamental_basis(tr))
    with pytest.raises(NotPeriodic):
        min_gap(tr, fundamental_basis(tr))


def test_clifton_pohl_beta():
    tr, b = cp_basis()
    assert b.beta0 == pytest.approx(math.sqrt(3) / 2, abs=1e-12)
    ts = np.linspace(b.t_lo, b.t_hi, 801)
    f = tr.profile.derivs_array(tr.x(ts))[0]
    assert np.max(np.abs(b.beta(ts) ** 2 + f - 0.5)) < 1e-7


def test_clifton_pohl_identities():
    tr, b = cp_basis()
    r = identity_residuals(tr, b, symmetric=True)
    assert r["wronskian"] < 1e-8
    assert r["energy"] < 1e-9
    assert r["beta_prime"] < 1e-7
    assert r["kappa_even"] < 1e-7 and r["kappa_period"] < 1e-7
    assert r["beta_odd"] < 1e-7 and r["beta_period"] < 1e-7
    assert r["beta_zero_spacing"] < 1e-7
    assert r["reflection_identity"] < 1e-6
    assert r["half_period_identity"] < 1e-6
    assert r["c_at_2w"] < 0


def test_clifton_pohl_monodromy_and_symmetry():
    tr, b = cp_basis()
    m = monodromy(tr, b)
    assert m.det == pytest.approx(1.0, abs=1e-8)
    # symmetric profile: all-periodic iff c(omega) = 0; here neither holds
    assert m.is_identity() == (abs(b.c(tr.omega)) < 1e-6)


def test_clifton_pohl_min_gap_is_beta():
    tr, b = cp_basis()
    gap, a = min_gap(tr, b, 200)
    assert gap == pytest.approx(2 * CP_OMEGA, abs=1e-5)
    phase = (a / (2 * tr.omega)) % 1.0
    assert min(phase, 1 - phase) < 0.02


def test_obstructed_min_gap_below_beta():
    p = profile("sin(x) + 0.3*sin(2*x)", 2 * PI)
    tr = launch_tangent(p, LaunchSpec(1, 1e-3 * p.bands[0].sup_abs, 0, "left"))
    gap, _ = min_gap(tr, fundamental_basis(tr), 200)
    assert gap < 2 * tr.omega - 1e-6


def test_simple_zeros():
    tr, b = cp_basis()
    assert simple_zero_slopes(b, np.linspace(-3 * tr.omega, tr.omega, 40)) > 1e-8


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5.5, 0.0), frac=st.floats(0.01, 0.99))
def test_zeros_interlace(a, frac):
    tr, b = cp_basis()
    za = next_zero(b, a)
    mid = a + frac * (za - a)
    assert next_zero(b, mid) > za - 1e-9
