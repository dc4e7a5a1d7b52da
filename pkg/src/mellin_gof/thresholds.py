"""Model constants, ill-posedness penalties, critical values and the single-k test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .mellin import MellinDensity, TestProblem
from .numerics import DEFAULT_RELTOL, DivergenceError, integrate_halfline, integrate_interval, sup_on_interval
from .statistic import STAT_RELTOL, statistic


def l_alpha(alpha: float) -> float:
    """L_alpha = 1 - ln(alpha), which is >= 1 on (0, 1)."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return 1.0 - math.log(alpha)


def delta4(problem: TestProblem, k: float, reltol: float = DEFAULT_RELTOL) -> float:
    """int_{-k}^{k} w^4(t) / |M_c[g_U](t)|^4 dt."""
    if k <= 0:
        raise ValueError("k must be positive")
    return 2.0 * float(integrate_interval(lambda t: problem.inv_error2(t) ** 2, 0.0, k, reltol))


def deltainf(problem: TestProblem, k: float) -> float:
    """(sup_{|t| <= k} w(t) / |M_c[g_U](t)|)^4."""
    return sup_on_interval(problem.inv_error2, k) ** 2


def moment(density: MellinDensity, s: float, reltol: float = DEFAULT_RELTOL) -> float:
    """E[X^s], closed form when catalogued, else by quadrature."""
    try:
        value = density.moment(s)
    except NotImplementedError:
        try:
            value = float(integrate_halfline(lambda x: x**s * density.pdf(x), reltol))
        except DivergenceError as exc:
            raise DivergenceError(f"moment of order {s:g} of {density} diverges", exc.estimate) from exc
    if not math.isfinite(value):
        raise DivergenceError(f"moment of order {s:g} of {density} is infinite")
    return value


def weighted_sup(density: MellinDensity, e: float) -> float:
    """sup_x pdf(x) x^e, closed form when catalogued, else by grid search in ln x."""
    try:
        value = density.weighted_sup(e)
    except NotImplementedError:
        u = np.linspace(-50.0, 50.0, 20001)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            vals = np.nan_to_num(density.pdf(np.exp(u)) * np.exp(e * u), nan=0.0)
        value = float(np.max(vals))
    if not math.isfinite(value):
        raise DivergenceError(f"pdf(x) x^{e:g} of {density} is unbounded")
    return value


@dataclass(frozen=True)
class ModelConstants:
    c_u: float
    v1: float
    v2: float
    vp: float
    p: float


def model_constants(problem: TestProblem, p: float = 2.0, reltol: float = DEFAULT_RELTOL) -> ModelConstants:
    """Constants feeding the critical values; moments factorise over X and U."""
    if p < 2:
        raise ValueError("p must be at least 2")
    c = problem.c
    g = problem.error
    c_u = max(weighted_sup(g, 2 * c - 1) / moment(g, 2 * (c - 1), reltol), 1.0)

    def y_moment(s):
        return moment(problem.null, s, reltol) * moment(g, s, reltol)

    v1 = max(y_moment(2 * (c - 1)), 1.0)
    v2 = max(y_moment(4 * (c - 1)), 1.0)
    vp = max(y_moment(2 * p * (c - 1)), 1.0)
    return ModelConstants(c_u, v1, v2, vp, float(p))


def _check(n, alpha, scale):
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if scale <= 0:
        raise ValueError("scale must be positive")


def tau_k(
    problem: TestProblem,
    constants: ModelConstants,
    k: float,
    n: int,
    alpha: float,
    scale: float = 1.0,
    *,
    d4: float | None = None,
    dinf: float | None = None,
) -> float:
    """Critical value of the single-k test at level ``alpha``.

    ``scale`` multiplies the whole expression.  Precomputed penalties can be
    passed as ``d4``/``dinf``.
    """
    _check(n, alpha, scale)
    d4 = delta4(problem, k) if d4 is None else d4
    dinf = deltainf(problem, k) if dinf is None else dinf
    L = l_alpha(alpha / 2)
    cu = constants.c_u
    first = (18 * cu * constants.v2 + 69493 * math.sqrt(2 * k) / n * L / alpha) * math.sqrt(L) * math.sqrt(d4) / n
    second = 52 * constants.v1 * cu * L * math.sqrt(dinf) / n
    return scale * (first + second)


def tau_k_bonferroni(
    problem: TestProblem,
    constants: ModelConstants,
    k: float,
    n: int,
    alpha: float,
    collection_size: int,
    scale: float = 1.0,
    *,
    d4: float | None = None,
    dinf: float | None = None,
) -> float:
    """Per-k critical value of the max-test over a collection of ``collection_size``.

    Uses the moment order ``constants.p``.
    """
    _check(n, alpha, scale)
    if collection_size < 1:
        raise ValueError("collection_size must be at least 1")
    d4 = delta4(problem, k) if d4 is None else d4
    dinf = deltainf(problem, k) if dinf is None else dinf
    L = l_alpha(alpha / (2 * collection_size))
    cu = constants.c_u
    growth = collection_size ** (1.0 / (constants.p - 1))
    first = (18 * cu * constants.vp + 69493 * math.sqrt(2 * k) * growth / n * L * L / alpha) * (
        math.sqrt(L) * math.sqrt(d4) / n
    )
    second = 52 * constants.v1 * cu * L * math.sqrt(dinf) / n
    return scale * (first + second)


@dataclass(frozen=True)
class Theoretical:
    """Critical value tau_k(alpha)."""


@dataclass(frozen=True)
class TheoreticalBonferroni:
    """Critical value of one member of a Bonferroni max-test."""

    p: float = 2.0
    collection_size: int = 1


@dataclass(frozen=True)
class Empirical:
    """A calibrated null quantile, typically from ``simulation.calibrate_quantile``."""

    quantile: float
    B: int = 0


Mode = Union[Theoretical, TheoreticalBonferroni, Empirical]


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    k: float
    statistic: float
    threshold: float
    alpha: float
    mode: Mode
    reject: bool


def threshold(
    problem: TestProblem,
    k: float,
    n: int,
    alpha: float,
    mode: Mode,
    scale: float = 1.0,
    constants: ModelConstants | None = None,
) -> float:
    if isinstance(mode, Empirical):
        return float(mode.quantile)
    if isinstance(mode, TheoreticalBonferroni):
        constants = constants if constants is not None and constants.p == mode.p else model_constants(problem, mode.p)
        return tau_k_bonferroni(problem, constants, k, n, alpha, mode.collection_size, scale)
    if isinstance(mode, Theoretical):
        constants = constants or model_constants(problem)
        return tau_k(problem, constants, k, n, alpha, scale)
    raise TypeError(f"unknown mode {mode!r}")


def test_single(
    sample,
    problem: TestProblem,
    k: float,
    alpha: float,
    mode: Mode = Theoretical(),
    scale: float = 1.0,
    constants: ModelConstants | None = None,
    reltol: float = STAT_RELTOL,
) -> TestOutcome:
    """Reject H0 iff the statistic reaches the mode's critical value."""
    stat = statistic(sample, problem, k, reltol)
    n = np.asarray(getattr(sample, "values", sample)).size
    tau = threshold(problem, k, n, alpha, mode, scale, constants)
    return TestOutcome(float(k), stat.value, tau, alpha, mode, bool(stat.value >= tau))


test_single.__test__ = False
