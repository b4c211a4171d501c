import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import ellipj, ellipk

from lortorus import build_profile
from lortorus.conditions import (check_famille, check_lambda_obstruction, check_necessary,
                                 check_stability_inequalities, condition_report, curvature_zeros, hill_diagnostic,
                                 hill_for_trace, sl_bounds, stability_margins)
from lortorus.errors import NotApplicable
from lortorus.geodesic import LaunchSpec, launch_tangent
from lortorus.jacobi import basis_from_coefficient, fundamental_basis, monodromy_over
from conftest import PI, TWO_PI, profile
from oracles import CP_I1, CP_I2, CP_INEQ1_MARGIN, CP_INEQ2_MARGIN


def ermakov_pinney(omega, delta, skew=0.0):
    """r(t) with every solution of u'' + r u = 0 antiperiodic over 2 omega.

    rho > 0 of period 2 omega solving rho'' + r rho = rho^-3 gives solutions
    rho cos(theta), rho sin(theta) with theta' = rho^-2; scaling rho so that
    int_0^{2 omega} rho^-2 = pi makes the monodromy over 2 omega equal -Id.
    """
    w = PI / omega
    shape = lambda t: 1 + delta * math.cos(w * t) + skew * math.sin(w * t)
    A = math.sqrt(quad(lambda t: shape(t) ** -2, 0, 2 * omega, epsabs=1e-13, epsrel=1e-12, limit=200)[0] / PI)
    rho = lambda t: A * shape(t)
    rho2 = lambda t: -A * w * w * (delta * math.cos(w * t) + skew * math.sin(w * t))
    return lambda t: rho(t) ** -4 - rho2(t) / rho(t)


def test_necessary_clifton_pohl(cp):
    r = check_necessary(cp)
    assert r["pass"]
    assert all(r[k]["pass"] for k in ("locally_finite", "sign_alternation", "fprime_one_sign_change_per_band",
                                      "type_II_only"))


def test_necessary_extra_critical_points():
    bad = build_profile("sin(2*x) + 0.3*sin(6*x)", PI)
    r = check_necessary(bad)
    assert not r["pass"] and r["fprime_one_sign_change_per_band"]["counts"] == [3, 3]
    mild = build_profile("sin(2*x) + 0.05*sin(6*x)", PI)
    assert check_necessary(mild)["fprime_one_sign_change_per_band"]["counts"] == [1, 1]


def test_necessary_flat_is_vacuous():
    r = check_necessary(build_profile("1", 1.0))
    assert r["pass"] and "vacuous" in r["note"]


def test_necessary_rejects_degenerate_log():
    r = check_necessary(build_profile("ln(2 + sin(x))", TWO_PI))
    assert not r["pass"]


def test_lambda_obstruction(cp, obstructed):
    assert check_lambda_obstruction(cp)["pass"]
    assert check_lambda_obstruction(cp)["residuals"] == pytest.approx([0.0, 0.0], abs=1e-12)
    r = check_lambda_obstruction(obstructed)
    assert not r["pass"]
    assert r["residuals"] == pytest.approx([1.2, 1.2], abs=1e-12)


@pytest.mark.parametrize("expr, period", [("sin(2*x)", PI), ("sin(x)/(10 + sin(x))", TWO_PI)])
def test_famille_passes(expr, period):
    r = check_famille(profile(expr, period))
    assert r["pass"]
    for k in ("simple_zeros", "one_sign_change", "fpfppp_nonpositive", "symmetry_axis", "two_zeros_per_period"):
        assert r[k]["pass"], k


def test_famille_fails_without_symmetry(obstructed):
    r = check_famille(obstructed)
    assert not r["pass"]
    assert not r["symmetry_axis"]["pass"]


def test_curvature_zeros(cp):
    zs = curvature_zeros(cp, 0.0, PI)
    assert zs == pytest.approx([PI / 2], abs=1e-12) or zs == pytest.approx([0.0, PI / 2], abs=1e-12)


def test_stability_margins_against_quadrature(cp):
    m = stability_margins(cp, 1, -7 * PI / 12)
    assert m["x1"] % PI == pytest.approx(PI / 12, abs=1e-9)
    assert m["I1"] == pytest.approx(CP_I1, abs=1e-8)
    assert m["I2"] == pytest.approx(CP_I2, abs=1e-8)
    assert m["ineq1_margin"] == pytest.approx(CP_INEQ1_MARGIN, abs=1e-6)
    assert m["ineq2_margin"] == pytest.approx(CP_INEQ2_MARGIN, abs=1e-6)
    # recomputation from raw f gives the same margins (no cached state)
    again = stability_margins(build_profile("sin(2*x)", PI), 1, -7 * PI / 12)
    assert again["ineq1_margin"] == pytest.approx(m["ineq1_margin"], abs=1e-9)


@pytest.mark.parametrize("c", [0.25, 4.0])
def test_ineq1_scale_invariant(cp, c):
    scaled = build_profile(f"{c!r}*sin(2*x)", PI)
    base = stability_margins(cp, 1, -7 * PI / 12)
    other = stability_margins(scaled, 1, -7 * PI / 12)
    assert other["lhs1"] == pytest.approx(base["lhs1"], rel=1e-9)
    assert other["lhs2"] == pytest.approx(base["lhs2"], rel=1e-9)


@pytest.mark.parametrize("eps", [1, -1])
def test_stability_clifton_pohl(cp, eps):
    r = check_stability_inequalities(cp, eps)
    assert r["pass"] and r["kappa_simple_zeros"]["pass"]
    for band in r["bands"]:
        assert band["ineq1_margin"] < 0 and band["ineq2_margin"] < 0


def test_stability_raw_log_fixture():
    raw = build_profile("ln(2 + sin(x))", TWO_PI)
    assert check_stability_inequalities(raw, -1)["pass"]


def test_condition_report(cp, obstructed):
    assert condition_report(cp).passed
    rep = condition_report(obstructed)
    assert not rep.passed and not rep.obstruction["pass"]
    flat = condition_report(build_profile("1", 1.0))
    assert not flat.passed and flat.necessary["pass"]


def test_hill_equality_constant():
    T = 1.3
    r = (PI / T) ** 2
    b = basis_from_coefficient(lambda t: r, 0.0, 2 * T, omega=T / 2)
    h = hill_diagnostic(b, T)
    assert h["value"] == pytest.approx(PI**2, abs=1e-8)


@pytest.mark.parametrize("delta", [0.1, 0.3])
def test_hill_ermakov_pinney(delta):
    omega = 0.9
    b = basis_from_coefficient(ermakov_pinney(omega, delta), 0.0, 4 * omega, omega=omega)
    assert monodromy_over(b, 2 * omega).is_minus_identity(1e-8)
    h = hill_diagnostic(b, 2 * omega)
    assert h["pass"] and h["value"] < PI**2  # strict for non-constant r


def test_hill_not_applicable_on_clifton_pohl(cp):
    tr = launch_tangent(cp, LaunchSpec(1, 0.5, 0, "left"))
    with pytest.raises(NotApplicable):
        hill_for_trace(tr, fundamental_basis(tr))


def test_sl_bounds_clifton_pohl(cp):
    tr = launch_tangent(cp, LaunchSpec(1, 0.5, 0, "left"))
    r = sl_bounds(fundamental_basis(tr))
    assert r.lemma0_pass and r.lemma0_rhs - r.lemma0_lhs > 1e-3
    assert r.d2 == pytest.approx(r.lemma0_lhs / tr.omega - (r.lemma0_lhs / tr.omega - r.d2), abs=1e-15)


def test_sl_bounds_constant_equality():
    omega = 0.7
    r = (PI / (2 * omega)) ** 2
    b = basis_from_coefficient(lambda t: r, 0.0, 4 * omega, omega=omega)
    out = sl_bounds(b)
    assert out.lemma0_lhs == pytest.approx(out.lemma0_rhs, abs=1e-6)
    assert out.all_periodic
    assert out.lemma1["pass"]


def lame_closed_gap(k=0.5, bracket=(7.5, 8.5)):
    """h - 2 k^2 cd^2(t) at its first closed gap: increasing on [0, K], monodromy -Id over 2K."""
    m = k * k
    K = float(ellipk(m))

    def coeff(h):
        return lambda t: h - 2 * m * ellipj(t + K, m)[0] ** 2

    def c_at_K(h):
        r = coeff(h)
        sol = solve_ivp(lambda t, y: [y[1], -r(t) * y[0]], [0, K], [1.0, 0.0], rtol=1e-12, atol=1e-13)
        return sol.y[0, -1]

    return coeff(brentq(c_at_K, *bracket, xtol=1e-14)), K


def test_sl_lemma1_lame_fixture():
    r, K = lame_closed_gap()
    out = sl_bounds(basis_from_coefficient(r, 0.0, 4 * K, omega=K))
    assert out.all_periodic
    assert out.lemma1["monotone"] and out.lemma1["pass"]


@pytest.mark.parametrize("delta, skew", [(0.2, 0.1), (0.35, -0.2), (0.5, 0.0)])
def test_sl_lemma1_needs_monotone_coefficient(delta, skew):
    # all solutions antiperiodic, but the coefficient is not monotone on [omega, 2 omega]
    omega = 1.1
    out = sl_bounds(basis_from_coefficient(ermakov_pinney(omega, delta, skew), 0.0, 4 * omega, omega=omega))
    assert out.all_periodic
    assert not out.lemma1["monotone"]
    assert any("not guaranteed" in n for n in out.notes)
    if skew == 0.0:
        # the inequality genuinely fails here, so the hypothesis cannot be dropped
        assert not out.lemma1["pass"]


def test_sl_needs_omega():
    b = basis_from_coefficient(lambda t: 1.0, 0.0, 3.0)
    with pytest.raises(NotApplicable):
        sl_bounds(b)


@settings(max_examples=20, deadline=None)
@given(c2=st.floats(0.05, 0.95), side=st.sampled_from(["left", "right"]))
def test_lemma0_on_clifton_pohl_traces(c2, side):
    p = profile("sin(2*x)", PI)
    tr = launch_tangent(p, LaunchSpec(1, c2, 0, side))
    r = sl_bounds(fundamental_basis(tr))
    assert r.lemma0_lhs <= r.lemma0_rhs + 1e-6
