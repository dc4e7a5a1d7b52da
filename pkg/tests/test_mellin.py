import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mellin_gof.mellin import (
    Gamma,
    LogNormal,
    Pareto,
    PowerLaw,
    TestProblem,
    WeightFunction,
    mellin_numeric,
    mellin_product,
    parse_density,
    parse_weight,
    q2_full,
    q2_truncated,
)
from mellin_gof.numerics import DivergenceError

DENSITIES = [LogNormal(0, 1), LogNormal(0.3, 0.5), Pareto(2), Pareto(3.5), PowerLaw(2), PowerLaw(1), Gamma(2, 1.5)]


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: d.spec)
@pytest.mark.parametrize("t", [-2.0, 0.0, 0.4, 1.7])
def test_closed_form_matches_quadrature(d, t):
    got = d.mellin(0.5, t)
    ref = mellin_numeric(d, 0.5, t)
    assert abs(got - ref) <= 1e-8 * abs(got)


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: d.spec)
def test_transform_at_zero_is_moment(d):
    # M_c(0) = E[X^(c-1)]
    assert d.mellin(0.5, 0.0).real == pytest.approx(d.moment(-0.5), rel=1e-12)


@pytest.mark.parametrize("d", DENSITIES, ids=lambda d: d.spec)
def test_pdf_integrates_to_cdf(d):
    from mellin_gof.numerics import integrate_interval

    assert integrate_interval(d.pdf, 1.0, 2.0, 1e-10) == pytest.approx(d.cdf(2.0) - d.cdf(1.0), rel=1e-8)


def test_hermitian_symmetry():
    d = LogNormal(0.2, 0.7)
    assert d.mellin(0.5, -1.3) == pytest.approx(np.conj(d.mellin(0.5, 1.3)))


def test_pareto_closed_form_spot():
    # M_{1/2}[x^-2 1(x>1)](t) = 1 / (3/2 - 2 pi i t)
    t = 0.7
    assert Pareto(2).mellin(0.5, t) == pytest.approx(1 / (1.5 - 2j * math.pi * t))


def test_powerlaw_closed_form_spot():
    t = 0.7
    assert PowerLaw(2).mellin(0.5, t) == pytest.approx(2 / (1.5 + 2j * math.pi * t))


def test_pareto_line_restriction():
    with pytest.raises(ValueError):
        Pareto(2).mellin(2.0, 0.0)


def test_weighted_sup_spot_values():
    assert Pareto(2).weighted_sup(0.0) == 1.0
    assert math.isinf(Pareto(2).weighted_sup(2.5))
    u = np.linspace(-20, 20, 200001)
    brute = np.max(LogNormal(0, 1).pdf(np.exp(u)) * np.exp(0.0 * u))
    assert LogNormal(0, 1).weighted_sup(0.0) == pytest.approx(brute, rel=1e-8)
    x = np.linspace(1e-9, 40, 400001)
    g = Gamma(2.5, 2.0)
    assert g.weighted_sup(-1.5) == pytest.approx(np.max(g.pdf(x) * x**-1.5), rel=1e-6)


@pytest.mark.parametrize(
    "spec, expected",
    [
        ("lognormal", LogNormal(0, 1)),
        ("lognormal:1:2", LogNormal(1, 2)),
        ("pareto:3", Pareto(3)),
        ("powerlaw2x", PowerLaw(2)),
        ("uniform", PowerLaw(1)),
        ("gamma:2:0.5", Gamma(2, 0.5)),
    ],
)
def test_parse_density(spec, expected):
    assert parse_density(spec) == expected


@pytest.mark.parametrize("spec", ["cauchy", "pareto:1:2", "lognormal:x", "pareto:0.5"])
def test_parse_density_rejects(spec):
    with pytest.raises(ValueError):
        parse_density(spec)


def test_weights():
    t = np.array([0.0, 1.0])
    assert np.all(WeightFunction("unit").w2(t) == 1)
    assert WeightFunction("survival").w2(t) == pytest.approx(1 / (0.25 + 4 * math.pi**2 * t**2))
    w = WeightFunction("derivative", 0.5, 2)
    assert w.w2(1.0) == pytest.approx((1.5**2 + 4 * math.pi**2) * (0.5**2 + 4 * math.pi**2))
    assert [parse_weight(s, 0.5).a for s in ("unit", "survival", "derivative:3")] == [0, -1, 3]
    with pytest.raises(ValueError):
        WeightFunction("survival", 1.0)
    with pytest.raises(ValueError):
        parse_weight("unit:2", 0.5)


def test_problem_validation(problem):
    with pytest.raises(ValueError):
        TestProblem(0.5, WeightFunction("unit", 0.7), LogNormal(), Pareto())
    with pytest.raises(ValueError):
        TestProblem.from_specs(error="lognormal:0:1")  # transform underflows on the probe grid


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_convolution_theorem_by_quadrature(problem):
    # density of Y = X U is int f(x) g(y / x) / x dx; integrate y^(z) against it directly
    from scipy import integrate

    t = 0.3
    z = -0.5 + 2j * math.pi * t

    def fy(y):
        inner, _ = integrate.quad(lambda x: problem.null.pdf(x) * problem.error.pdf(y / x) / x, 0, y, limit=200)
        return inner

    re, _ = integrate.quad(lambda y: (y**z).real * fy(y), 1e-8, np.inf, limit=400)
    im, _ = integrate.quad(lambda y: (y**z).imag * fy(y), 1e-8, np.inf, limit=400)
    assert complex(re, im) == pytest.approx(mellin_product(problem, problem.null, t), rel=1e-5)


def test_plancherel_powerlaw():
    # int |M_{1/2}[2x]|^2 dt = int_0^1 (2x)^2 dx
    got = q2_full(lambda t: PowerLaw(2).mellin(0.5, t), WeightFunction("unit"))
    assert got == pytest.approx(4 / 3, rel=1e-7)


def test_q2_truncated_monotone_and_below_full():
    d = lambda t: PowerLaw(2).mellin(0.5, t) - LogNormal().mellin(0.5, t)  # noqa: E731
    w = WeightFunction("unit")
    vals = [q2_truncated(d, w, k) for k in (0.5, 1.0, 2.0, 4.0)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < q2_full(d, w)


def test_q2_full_divergence():
    w = WeightFunction("derivative", 0.5, 1)
    with pytest.raises(DivergenceError):
        q2_full(lambda t: Pareto(2).mellin(0.5, t), w)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.2, 2.0), st.floats(-3.0, 3.0))
def test_lognormal_numeric_property(mu, s2, t):
    d = LogNormal(mu, s2)
    got, ref = d.mellin(0.5, t), mellin_numeric(d, 0.5, t)
    assert abs(got - ref) <= 1e-7 * abs(got) + 1e-300


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_samplers_positive(seed):
    rng = np.random.default_rng(seed)
    for d in DENSITIES:
        assert np.all(d.sample(rng, 50) > 0)
