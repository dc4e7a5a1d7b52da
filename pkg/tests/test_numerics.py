import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mellin_gof.numerics import (
    DivergenceError,
    NonFiniteError,
    QuadratureError,
    QuadratureRule,
    integrate_halfline,
    integrate_interval,
    integrate_real_line,
    sup_on_interval,
)


def test_polynomial_exact():
    assert integrate_interval(lambda x: x**3 - 2 * x, -1.0, 2.0) == pytest.approx(0.75, rel=1e-13)


def test_vector_components_independent():
    f = lambda x: np.stack([np.sin(x), np.exp(x)])  # noqa: E731
    both = integrate_interval(f, 0.0, math.pi)
    alone = integrate_interval(lambda x: np.sin(x), 0.0, math.pi)
    assert both[0] == alone
    assert both[1] == pytest.approx(math.exp(math.pi) - 1, rel=1e-12)


def test_complex_oscillatory():
    w = 40.0
    got = integrate_interval(lambda x: np.exp(1j * w * x), 0.0, 1.0)
    assert got == pytest.approx((np.exp(1j * w) - 1) / (1j * w), rel=1e-11)


def test_nonfinite_integrand_reports_abscissa():
    with pytest.raises(NonFiniteError) as info:
        integrate_interval(lambda x: np.where(x > 0.5, np.inf, x), 0.0, 1.0)
    assert info.value.t > 0.5


def test_no_convergence_raises_with_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate_interval(lambda x: np.sin(1e6 * x), 0.0, 1.0, max_doublings=1)
    assert info.value.estimate is not None and info.value.gap > 0


def test_rule_rejects_empty_interval():
    with pytest.raises(ValueError):
        QuadratureRule.gauss_legendre(1.0, 1.0)


def test_real_line_gaussian():
    got = integrate_real_line(lambda u: np.exp(-u * u / 2))
    assert got == pytest.approx(math.sqrt(2 * math.pi), rel=1e-10)


def test_real_line_divergence():
    with pytest.raises(DivergenceError):
        integrate_real_line(lambda u: 1.0 / (1.0 + np.abs(u)), limit=256)


@pytest.mark.parametrize(
    "f, exact",
    [
        (lambda x: np.exp(-x), 1.0),
        (lambda x: 2 * x / (1 + x * x) ** 2, 1.0),
        (lambda x: np.where(x < 1, 4 * x**3, 0.0), 1.0),
    ],
)
def test_halfline(f, exact):
    assert integrate_halfline(f) == pytest.approx(exact, rel=1e-7)


def test_sup_interior_and_endpoint():
    assert sup_on_interval(lambda t: -(t - 0.3) ** 2, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert sup_on_interval(lambda t: t**2, 3.0) == 9.0


def test_sup_validation():
    with pytest.raises(ValueError):
        sup_on_interval(lambda t: t, 0.0)
    with pytest.raises(NonFiniteError):
        sup_on_interval(lambda t: np.where(t > 0.9, np.nan, 1.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 5.0))
def test_exponential_integral_property(rate, b):
    got = integrate_interval(lambda x: np.exp(-rate * x), 0.0, b)
    assert got == pytest.approx((1 - math.exp(-rate * b)) / rate, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.5, 20.0))
def test_sup_matches_peak(peak, k):
    centre = peak * k
    got = sup_on_interval(lambda t: np.exp(-((t - centre) ** 2)), k)
    assert got == pytest.approx(1.0, abs=1e-9)
