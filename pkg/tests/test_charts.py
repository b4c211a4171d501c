import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lortorus import build_profile
from lortorus.charts import (RibbonChart, curvature, null_orbit_parametrization, pullback_metric, reflection,
                             ribbon_chart, saddle_chart, transition_map, transition_primitive)
from lortorus.errors import DegenerateZero, OutOfBand
from lortorus.geodesic import LaunchSpec, launch_tangent, y_prime
from conftest import PI, TWO_PI, profile
from oracles import G_PI_6


def test_curvature_values(cp):
    assert curvature(cp, PI / 4) == pytest.approx(-2.0, abs=1e-14)
    flat = build_profile("1", 1.0)
    assert np.all(curvature(flat, np.linspace(0, 5, 11)) == 0.0)


@pytest.mark.parametrize("a", [0.2, 0.5])
def test_quadratic_variation_curvature_identity(a):
    p = profile(f"sin(2*x) - {2 * a!r}*cos(x)^2", PI)
    xs = np.random.default_rng(2).uniform(-10, 10, 100)
    assert np.max(np.abs(curvature(p, xs) - (-2 * p(xs) - 2 * a))) < 1e-9


def test_ribbon_metric_is_lorentzian(cp):
    for k in range(4):
        ch = ribbon_chart(cp, k)
        assert ch.sigma == (1 if k % 2 == 0 else -1)
        for x in np.linspace(ch.left, ch.right, 9)[1:-1]:
            assert ch.determinant(x) == pytest.approx(-1.0, abs=1e-14)


def test_christoffel_symbols(cp):
    ch = RibbonChart(cp, -math.inf, math.inf, 1).christoffel(0.0)
    assert ch.yyy == pytest.approx(-1.0)  # -f'(0)/2
    assert ch.xyy == pytest.approx(0.0)  # f(0) = 0
    x = 0.3
    f, fp = cp.derivs(x)[:2]
    for sigma in (1, -1):
        c = RibbonChart(cp, -math.inf, math.inf, sigma).christoffel(x)
        assert c.xyy == pytest.approx(0.5 * f * fp)
        assert c.yyy == pytest.approx(-0.5 * sigma * fp)
        assert c.xxy == pytest.approx(0.5 * sigma * fp)


def test_christoffel_from_metric_by_differentiation(cp):
    # Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk); only g_yy depends on x
    x, sigma = 0.7, -1
    f, fp = cp.derivs(x)[:2]
    g = np.array([[0.0, sigma], [sigma, f]])
    ginv = np.linalg.inv(g)
    dg = np.zeros((2, 2, 2))  # dg[l, j, k] = d_l g_jk
    dg[0, 1, 1] = fp
    gamma = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                gamma[i, j, k] = 0.5 * sum(ginv[i, l] * (dg[j, l, k] + dg[k, l, j] - dg[l, j, k]) for l in range(2))
    c = RibbonChart(cp, -math.inf, math.inf, sigma).christoffel(x)
    assert gamma[0, 1, 1] == pytest.approx(c.xyy, abs=1e-14)
    assert gamma[1, 1, 1] == pytest.approx(c.yyy, abs=1e-14)
    assert gamma[0, 0, 1] == pytest.approx(c.xxy, abs=1e-14)
    assert gamma[0, 0, 0] == gamma[1, 0, 0] == gamma[1, 0, 1] == 0.0


def test_geodesic_equation_residual(cp):
    trace = launch_tangent(cp, LaunchSpec(1, 0.5, 0, "left"))
    ts = np.linspace(0.0, trace.t1, 300)
    st = trace.state(ts)
    x, xp = st[0], st[1]
    xpp = -0.5 * trace.eps * cp.derivs_array(x)[1]
    yp = y_prime(trace, ts)
    chart = RibbonChart(cp, -math.inf, math.inf, 1)
    assert np.max(np.abs(chart.geodesic_residual(x, xp, xpp, yp))) < 1e-7
    # unit-speed first integral 2x'y' + f y'^2 = eps
    assert np.max(np.abs(2 * xp * yp + cp.derivs_array(x)[0] * yp**2 - trace.eps)) < 1e-8


def test_transition_primitive_closed_form(cp):
    G = transition_primitive(cp, cp.bands[0], PI / 4)
    assert G(PI / 6) == pytest.approx(G_PI_6, abs=1e-12)
    for x in np.linspace(0.1, 1.4, 7):
        assert G(x) == pytest.approx(-0.5 * math.log(math.tan(x)), abs=1e-11)
    with pytest.raises(OutOfBand):
        G(0.0)
    with pytest.raises(OutOfBand):
        transition_primitive(cp, cp.bands[0], 2.0)


def test_transition_primitive_flat():
    flat = build_profile("1", 1.0)
    G = transition_primitive(flat, flat.bands[0].__class__(0, -10.0, 10.0, 1, 1.0, 0.0, (), ()), 0.0)
    assert G(0.5) == pytest.approx(-0.5)


@pytest.mark.parametrize("sigma", [1, -1])
def test_transition_round_trip_and_pullback(cp, sigma):
    band = cp.bands[0]
    psi = transition_map(cp, band, sigma)
    rng = np.random.default_rng(3)
    for x, y in zip(rng.uniform(band.left + 1e-3, band.right - 1e-3, 100), rng.uniform(-5, 5, 100)):
        assert psi.inverse(*psi(x, y)) == pytest.approx((x, y), abs=1e-12)
        f_x = cp.derivs(x)[0]
        target = np.array([[0.0, -sigma], [-sigma, f_x]])
        source = np.array([[0.0, sigma], [sigma, f_x]])
        assert np.max(np.abs(pullback_metric(psi.jacobian(x, f_x), target) - source)) < 1e-9


def test_reflection_is_isometry_reversing_k(cp):
    band = cp.bands[1]
    for sigma in (1, -1):
        rho = reflection(cp, band, sigma)
        for x in np.linspace(band.left, band.right, 12)[1:-1]:
            f_x = cp.derivs(x)[0]
            g = np.array([[0.0, sigma], [sigma, f_x]])
            assert np.max(np.abs(pullback_metric(rho.jacobian(x, f_x), g) - g)) < 1e-12
            assert rho.push_killing(x, f_x) == pytest.approx([0.0, -1.0])
            assert rho(*rho(x, 0.4)) == pytest.approx((x, 0.4), abs=1e-12)


def test_saddle_lambda_is_slope():
    p = build_profile("sin(x)", TWO_PI)
    sc = saddle_chart(p, 0)
    # near a zero with f'' = 0 the pieces are close to the linear case
    lin = saddle_chart(build_profile("3*sin(x)", TWO_PI), 0)
    assert lin.lam == pytest.approx(3.0)
    assert float(sc.j(0.0)[0]) == pytest.approx(1.0)


def test_saddle_chart_identities(cp):
    sc = saddle_chart(cp, 0)
    assert sc.lam == pytest.approx(2.0)
    assert sc.halfwidth == pytest.approx(0.4 * PI / 2)
    xs = np.linspace(-sc.halfwidth, sc.halfwidth, 50) * 0.999
    assert sc.identity_residual() < 1e-9
    assert np.max(np.abs(xs * sc.j(xs) - cp(xs))) < 1e-9
    assert float(sc.j(0.0)[0]) == pytest.approx(2.0, abs=1e-14)
    assert float(sc.h(0.0)[0]) == pytest.approx(0.0, abs=1e-14)
    nz = xs[np.abs(xs) > 1e-3]
    l0 = float(sc.l(0.0)[0])
    assert np.max(np.abs(sc.h(nz) - (sc.l(nz) - l0) / nz)) < 1e-12
    assert np.min(np.abs(sc.j(xs))) > 0.5


def test_saddle_metric_pure_linear_limit():
    # f = lam x on a small J: j = lam, h = 0, metric = -(2/lam)(lam + 1/lam) du dv
    p = build_profile("sin(x)", TWO_PI)
    sc = saddle_chart(p, 0, halfwidth=1e-4)
    g_uu, g_uv, g_vv = sc.metric(0.005, 0.003)
    assert g_uv == pytest.approx(-(1.0 + 1.0) / 1.0, abs=1e-6)
    assert abs(g_uu) < 1e-9 and abs(g_vv) < 1e-9


def test_saddle_metric_lorentzian_and_killing(cp):
    sc = saddle_chart(cp, 1)
    rows = sc.grid(15)
    u, v = rows[:, 0], rows[:, 1]
    det = sc.determinant(u, v)
    assert np.all(det < 0)
    ku, kv = sc.killing(u, v)
    zero = (ku == 0) & (kv == 0)
    assert np.all((u[zero] == 0) & (v[zero] == 0))
    with pytest.raises(OutOfBand):
        sc.metric(2.0, 2.0)


def test_saddle_rejects_degenerate():
    p = build_profile("ln(2 + sin(x))", TWO_PI)
    with pytest.raises(DegenerateZero):
        saddle_chart(p, 0)


def test_null_orbit_coefficients(cp, obstructed):
    o = null_orbit_parametrization(cp, 0, 1)
    assert o.coefficient == pytest.approx(-1.0)
    assert o.gamma_yyy == pytest.approx(-1.0)
    assert o.nabla_residual < 1e-14
    a = null_orbit_parametrization(obstructed, 0, 1)
    b = null_orbit_parametrization(obstructed, 1, 1)
    assert a.coefficient == pytest.approx(-0.8)
    assert b.coefficient == pytest.approx(0.2)
    # eta-adjusted parameters mismatch exactly by the obstruction residual
    assert abs(-2 * a.coefficient - 2 * b.coefficient) == pytest.approx(1.2)
    with pytest.raises(ValueError):
        null_orbit_parametrization(cp, 0, 0)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(0.05, 1.5), y=st.floats(-10, 10))
def test_transition_inverse_property(x, y):
    p = profile("sin(2*x)", PI)
    psi = transition_map(p, p.bands[0], 1)
    back = psi.inverse(*psi(x, y))
    assert back[1] == pytest.approx(y, abs=1e-10)
