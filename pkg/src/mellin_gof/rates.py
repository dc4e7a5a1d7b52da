"""Radius-of-testing calculators and the tabulated asymptotic orders."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maxtest import delta_K
from .mellin import TestProblem, WeightFunction
from .numerics import NonFiniteError, QuadratureError, integrate_interval, sup_on_interval
from .thresholds import ModelConstants, l_alpha

ORDINARY = "ordinary"
SUPER = "super"
KINDS = (ORDINARY, SUPER)
GRID_POINTS = 256


class RegimeError(ValueError):
    """Combination of smoothness regimes without a tabulated order."""


def _kind(kind: str) -> str:
    k = {"os": ORDINARY, "ordinary": ORDINARY, "ss": SUPER, "super": SUPER}.get(kind)
    if k is None:
        raise ValueError(f"unknown smoothness kind {kind!r}")
    return k


@dataclass(frozen=True)
class RegularityClass:
    """Densities with ||s M_c[h]|| <= R, s(t) = (1+t^2)^(s/2) or exp(|t|^s)."""

    kind: str
    s: float
    radius_R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", _kind(self.kind))
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.radius_R <= 0:
            raise ValueError("radius_R must be positive")

    def log_s(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == ORDINARY:
            return 0.5 * self.s * np.log1p(t * t)
        return t**self.s

    def s_of(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.log_s(t))

    def bias(self, weight: WeightFunction, k):
        """w^2(k) / s^2(k), formed in log space so super-smooth classes underflow to 0."""
        with np.errstate(divide="ignore"):
            out = np.exp(np.log(weight.w2(k)) - 2.0 * self.log_s(k))
        return float(out) if np.ndim(out) == 0 else out

    def check_weight(self, weight: WeightFunction):
        if self.kind == ORDINARY and not self.s > weight.a:
            raise ValueError(f"ordinary smooth class needs s > a, got s={self.s}, a={weight.a}")


@dataclass(frozen=True)
class ErrorSmoothness:
    """Declared decay of |M_c[g_U]|: (1+t^2)^(-param/2) or exp(-|t|^param)."""

    kind: str
    param: float

    def __post_init__(self):
        object.__setattr__(self, "kind", _kind(self.kind))
        if self.param <= 0:
            raise ValueError("decay parameter must be positive")

    def fitted(self, problem: TestProblem, t_lo: float = 1.0, t_hi: float = 50.0) -> float:
        """Decay exponent fitted by least squares on a log-spaced grid."""
        t = np.geomspace(t_lo, t_hi, 200)
        with np.errstate(divide="ignore"):
            logm = np.log(np.abs(problem.error.mellin(problem.c, t)))
        if self.kind == ORDINARY:
            x, y = np.log(t), logm
            sign = -1.0
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                x, y = np.log(t), np.log(-logm)
            sign = 1.0
        ok = np.isfinite(y)
        if ok.sum() < 10:
            raise ValueError("too few usable points to fit the decay of the error transform")
        return sign * float(np.polyfit(x[ok], y[ok], 1)[0])

    def validate(self, problem: TestProblem, tol: float = 0.10) -> float:
        got = self.fitted(problem)
        if abs(got - self.param) > tol * self.param:
            raise ValueError(
                f"error transform of {problem.error.spec} decays with exponent {got:.4g}, "
                f"declared {self.kind} {self.param:g}"
            )
        return got


@dataclass(frozen=True)
class AlternativeClass:
    v_bound: float = 1.0
    d: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if self.v_bound < 1:
            raise ValueError("v_bound must be at least 1")
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.p < 2:
            raise ValueError("p must be at least 2")


def penalty_profile(problem: TestProblem, k_grid) -> tuple[np.ndarray, np.ndarray]:
    """sqrt(Delta4(k)) and sqrt(DeltaInf(k)) along an increasing grid.

    Delta4 is accumulated segment by segment.  Values that overflow are
    reported as inf, and so is everything beyond them.
    """
    k = np.asarray(k_grid, dtype=float)
    if k.size == 0 or np.any(k <= 0) or np.any(np.diff(k) <= 0):
        raise ValueError("k grid must be positive and strictly increasing")
    s4 = np.full(k.size, np.inf)
    sinf = np.full(k.size, np.inf)
    f4 = lambda t: problem.inv_error2(t) ** 2  # noqa: E731
    total, sup, lo = 0.0, 0.0, 0.0
    with np.errstate(over="ignore", divide="ignore"):
        for i, hi in enumerate(k):
            try:
                total += 2.0 * float(integrate_interval(f4, lo, hi))
                sup = max(sup, sup_on_interval(problem.inv_error2, hi))
            except (NonFiniteError, QuadratureError):
                break
            if not (math.isfinite(total) and math.isfinite(sup)):
                break
            s4[i] = math.sqrt(total)
            sinf[i] = sup
            lo = hi
    return s4, sinf


def rho2_k(regularity: RegularityClass, problem: TestProblem, k: float, n: float) -> float:
    """max(w^2(k)/s^2(k), max(sqrt Delta4(k), sqrt DeltaInf(k)) / n)."""
    if k <= 0:
        raise ValueError("k must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    s4, sinf = penalty_profile(problem, [k])
    return max(regularity.bias(problem.weight, k), max(s4[0], sinf[0]) / n)


@dataclass(frozen=True)
class KStar:
    k_star: float
    rho2_star: float


def default_k_grid(n: float) -> np.ndarray:
    return np.geomspace(1e-2, max(float(n), 1e-2 * 1.01), GRID_POINTS)


def k_star(regularity: RegularityClass, problem: TestProblem, n: float, k_grid=None) -> KStar:
    """Minimiser of rho2_k over ``k_grid`` (default: 256 log-spaced points on [0.01, n])."""
    if n < 2:
        raise ValueError("n must be at least 2")
    k = default_k_grid(n) if k_grid is None else np.asarray(k_grid, dtype=float)
    if k.size == 0:
        raise ValueError("k grid must not be empty")
    s4, sinf = penalty_profile(problem, k)
    r2 = np.maximum(regularity.bias(problem.weight, k), np.maximum(s4, sinf) / n)
    i = int(np.argmin(r2))
    return KStar(float(k[i]), float(r2[i]))


def eta_k(k: float, n: float, d: float = 1.0) -> float:
    if k <= 0 or n <= 0 or d <= 0:
        raise ValueError("k, n and d must be positive")
    return max(1.0, math.sqrt(2 * k) / (d * n))


def eta_K(collection, k_sel: float, n: float, d: float = 1.0, p: float = 2.0) -> float:
    if k_sel <= 0 or n <= 0 or d <= 0:
        raise ValueError("k, n and d must be positive")
    if p < 2:
        raise ValueError("p must be at least 2")
    size = collection if isinstance(collection, int) else collection.size
    dk = delta_K(size)
    return max(1.0, math.sqrt(2 * k_sel) * size ** (1.0 / (p - 1)) / (d * n * dk**4))


def separation_constant(
    gamma_level: float,
    regularity: RegularityClass,
    constants: ModelConstants,
    alt: AlternativeClass,
    bonferroni: bool = False,
) -> float:
    """Squared constant A_gamma multiplying the radius of testing."""
    if not 0 < gamma_level < 1:
        raise ValueError("gamma_level must lie in (0, 1)")
    L = l_alpha(gamma_level / 8)
    g = gamma_level
    moment = constants.vp if bonferroni else constants.v2
    power = 2.5 if bonferroni else 1.5
    return (
        regularity.radius_R**2
        + 140 * L / g * constants.c_u * moment
        + 260 * L / g * constants.c_u * alt.v_bound
        + 833934 * L**power / g * alt.d
    )


COLLECTIONS = ("single", "naive", "geometric", "loglog")


def _os_os(s, gamma, a, n):
    e = 4 * s + 4 * gamma + 1
    if gamma + a > -0.25:
        return n ** (2 / e), n ** (-4 * (s - a) / e), "os-os"
    if gamma + a == -0.25:
        return math.nan, math.sqrt(math.log(n)) / n, "os-os-boundary"
    return math.nan, 1.0 / n, "os-os-parametric"


def rate_order(
    regularity: RegularityClass,
    error: ErrorSmoothness,
    a: float,
    n_list,
    collection: str = "single",
) -> list[dict]:
    """Symbolic orders of k* and of the squared radius, one row per n.

    ``collection`` selects the non-adaptive orders (``single``) or those of
    the max-test over the naive, geometric or log-log geometric collection.
    For the geometric collections the dominant term of the radius is reported.
    """
    if collection not in COLLECTIONS:
        raise ValueError(f"unknown collection {collection!r}")
    s, rk, ek, gp = regularity.s, regularity.kind, error.kind, error.param
    if rk == SUPER and ek == SUPER:
        raise RegimeError("super smooth density with super smooth error is not tabulated")
    if rk == ORDINARY and not s > a:
        raise ValueError("ordinary smooth class needs s > a")
    regime = ("os" if rk == ORDINARY else "ss") + "-" + ("os" if ek == ORDINARY else "ss")
    if collection in ("geometric", "loglog") and regime == "os-ss":
        raise RegimeError("adaptive order for ordinary smooth density and super smooth error equals the single-k one")
    if collection == "loglog" and regime != "ss-os":
        raise RegimeError("log-log collection is tabulated only for super smooth density and ordinary smooth error")
    rows = []
    for n in n_list:
        n = float(n)
        if n <= math.e**math.e:
            raise ValueError("orders need n > e^e so that ln ln n > 1")
        ln, lnln = math.log(n), math.log(math.log(n))
        if regime == "os-os":
            eff = {"single": n, "naive": n / ln, "geometric": n / math.sqrt(lnln)}[collection]
            k_pred, r2, label = _os_os(s, gp, a, eff)
        elif regime == "os-ss":
            k_pred, r2, label = ln ** (1 / gp), ln ** (-2 * (s - a) / gp), regime
        else:
            k_pred = ln ** (1 / s)
            r2 = ln ** ((2 * (gp + a) + 0.5) / s) / n
            factor = {
                "single": 1.0,
                "naive": ln,
                "geometric": math.sqrt(lnln),
                "loglog": math.sqrt(math.log(lnln)) if lnln > 1 else math.nan,
            }[collection]
            r2 *= factor
            label = regime
        rows.append({"n": n, "k_pred": k_pred, "rho2_pred": r2, "regime": label})
    return rows


def loglog_slope(x, y) -> float:
    """Least-squares slope of ln y against ln x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def rate_sweep(
    regularity: RegularityClass,
    problem: TestProblem,
    error: ErrorSmoothness,
    n_list,
) -> list[dict]:
    """Numerical k* and rho2* next to the predicted orders for each n."""
    n_list = [float(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must not be empty")
    regularity.check_weight(problem.weight)
    pred = rate_order(regularity, error, problem.weight.a, n_list)
    rows = []
    for n, p in zip(n_list, pred):
        ks = k_star(regularity, problem, n)
        rows.append({"n": n, "k_star": ks.k_star, "rho2_star": ks.rho2_star, **{k: p[k] for k in ("k_pred", "rho2_pred", "regime")}})
    return rows


def sweep_slopes(rows) -> dict:
    """Fitted log-log slopes of the numerical and predicted columns."""
    n = [r["n"] for r in rows]
    out = {
        "k_slope": loglog_slope(n, [r["k_star"] for r in rows]),
        "rho2_slope": loglog_slope(n, [r["rho2_star"] for r in rows]),
    }
    if all(math.isfinite(r["k_pred"]) for r in rows):
        out["k_slope_pred"] = loglog_slope(n, [r["k_pred"] for r in rows])
    out["rho2_slope_pred"] = loglog_slope(n, [r["rho2_pred"] for r in rows])
    return out

