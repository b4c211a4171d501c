import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lortorus.errors import DomainError, ParseError
from lortorus.expr import Expression, parse, to_source


@pytest.mark.parametrize("text, x, expected", [
    ("sin(2*x)", math.pi / 4, (1.0, 0.0, -4.0, 0.0)),
    ("sin(2*x) - 2*0.5*cos(x)^2", 0.0, (-1.0, 2.0, 2.0, -8.0)),
    # f''' of ln(2 + sin x) at 0 is -1/4 by direct differentiation
    ("ln(2 + sin(x))", 0.0, (math.log(2.0), 0.5, -0.25, -0.25)),
    ("x^3", 2.0, (8.0, 12.0, 12.0, 6.0)),
    ("exp(-x)", 0.0, (1.0, -1.0, 1.0, -1.0)),
    ("pow(x, 2) + sqrt(4)", 3.0, (11.0, 6.0, 2.0, 0.0)),
])
def test_closed_form_derivatives(text, x, expected):
    assert Expression(text).derivs(x) == pytest.approx(expected, abs=1e-14)


def test_quadratic_variation_ode():
    # f = sin 2x - a(1 + cos 2x) gives f'' + 4f + 4a = 0, i.e. kappa = -2f - 2a
    a = 0.5
    e = Expression(f"sin(2*x) - 2*{a}*cos(x)^2")
    for x in np.linspace(-3, 3, 37):
        f, _, f2, _ = e.derivs(x)
        assert abs(f2 + 4 * f + 4 * a) < 1e-12


PROFILES = ["sin(2*x)", "sin(x)/(10 + sin(x))", "cos(sin(x)) - 3/4", "jacobi_sd(x, 0.5)",
            "jacobi_sn(x, 0.25)", "ln(2 + sin(x))", "sin(x) + 0.3*sin(2*x)", "tan(x/4)*exp(cos(x))"]


@pytest.mark.parametrize("text", PROFILES)
def test_derivatives_match_central_differences(text):
    e = Expression(text)
    rng = np.random.default_rng(0)
    h = 1e-5
    for x in rng.uniform(-3, 3, 100):
        d = e.derivs(x)
        for order in (1, 2, 3):
            lo, hi = e.derivs(x - h)[order - 1], e.derivs(x + h)[order - 1]
            fd = (hi - lo) / (2 * h)
            assert abs(fd - d[order]) <= 1e-6 * max(1.0, abs(d[order]))


@pytest.mark.parametrize("text", PROFILES)
def test_vector_and_scalar_paths_agree(text):
    e = Expression(text)
    xs = np.linspace(-2.5, 2.5, 41)
    vec = np.array(e.derivs_array(xs))
    sca = np.array([e.derivs(x) for x in xs]).T
    assert np.max(np.abs(vec - sca)) < 1e-12


@pytest.mark.parametrize("text", PROFILES)
def test_canonical_source_round_trips(text):
    tree = parse(text)
    assert parse(to_source(tree)) == tree


@pytest.mark.parametrize("bad, column", [("sin(2*x", 8), ("2*/x", 3), ("sin(2*x))", 9), ("foo(x)", 1),
                                         ("x $ 2", 3), ("", 1)])
def test_parse_errors_carry_span(bad, column):
    with pytest.raises(ParseError) as info:
        Expression(bad)
    err = info.value
    assert err.start + 1 == column
    assert "^" in err.render()


def test_jacobi_modulus_must_be_constant():
    with pytest.raises(ParseError):
        Expression("jacobi_sn(x, x)")


def test_domain_error_for_log_of_negative():
    e = Expression("ln(sin(x))")
    with pytest.raises(DomainError):
        e.derivs(-1.0)


def test_division_by_zero_is_domain_error():
    with pytest.raises(DomainError):
        Expression("1/x").derivs(0.0)


def test_expression_is_picklable():
    import pickle

    e = Expression("jacobi_sd(x, 0.5)")
    assert pickle.loads(pickle.dumps(e)).derivs(0.3) == e.derivs(0.3)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(0.1, 3), x=st.floats(-5, 5))
def test_linearity_of_differentiation(a, b, x):
    e1, e2 = Expression("sin(x)"), Expression(f"exp(cos({b}*x))")
    comb = Expression(f"{a!r}*sin(x) + exp(cos({b!r}*x))")
    d1, d2, dc = e1.derivs(x), e2.derivs(x), comb.derivs(x)
    for k in range(4):
        assert dc[k] == pytest.approx(a * d1[k] + d2[k], rel=1e-10, abs=1e-10)
