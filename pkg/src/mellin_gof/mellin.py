"""Densities with closed-form Mellin transforms, weights and quadratic functionals.

The Mellin transform along the line ``c`` is

    M_c[h](t) = int_0^inf x^(c - 1 + 2 pi i t) h(x) dx,

and the weighted quadratic functional of a difference of transforms is
``int |dM(t)|^2 w^2(t) dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .numerics import (
    DEFAULT_RELTOL,
    DivergenceError,
    integrate_halfline,
    integrate_interval,
    integrate_real_line,
)

TWO_PI = 2.0 * math.pi


def _z(c, t):
    return (c - 1.0) + 1j * TWO_PI * np.asarray(t, dtype=float)


class MellinDensity:
    """A density on (0, inf) with closed-form Mellin transform and moments.

    Subclasses implement ``pdf``, ``cdf``, ``mellin``, ``moment`` and
    ``sample``.  Those whose log-variable density extends to an entire
    function set ``analytic_log = True`` and implement ``log_density_log``
    (the log-density of ``ln X`` evaluated at possibly complex ``u``).
    """

    name = "density"
    analytic_log = False

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def mellin(self, c, t):
        raise NotImplementedError

    def moment(self, s):
        """E[X^s]; ``inf`` when the moment does not exist."""
        raise NotImplementedError

    def weighted_sup(self, e):
        """sup_x pdf(x) x^e; ``inf`` when unbounded."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def log_density_log(self, u):
        raise NotImplementedError

    def log_saddle(self, z):
        """Stationary point of z u + log_density_log(u), or None if not known."""
        return None

    def __str__(self):
        return self.spec


@dataclass(frozen=True)
class LogNormal(MellinDensity):
    mu: float = 0.0
    sigma2: float = 1.0
    name = "lognormal"
    analytic_log = True

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("lognormal variance must be positive")

    @property
    def spec(self):
        return f"lognormal:{self.mu:g}:{self.sigma2:g}"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        out = np.exp(-((lx - self.mu) ** 2) / (2 * self.sigma2)) / (x * math.sqrt(TWO_PI * self.sigma2))
        return np.where(x > 0, out, 0.0)

    def cdf(self, x):
        return stats.lognorm.cdf(x, s=math.sqrt(self.sigma2), scale=math.exp(self.mu))

    def mellin(self, c, t):
        z = _z(c, t)
        return np.exp(z * self.mu + z * z * self.sigma2 / 2)

    def moment(self, s):
        return math.exp(s * self.mu + s * s * self.sigma2 / 2)

    def weighted_sup(self, e):
        # log of pdf(e^u) e^(e u) is concave in u
        u = self.mu + self.sigma2 * (e - 1.0)
        return math.exp(
            -((u - self.mu) ** 2) / (2 * self.sigma2) + (e - 1.0) * u - 0.5 * math.log(TWO_PI * self.sigma2)
        )

    def sample(self, rng, size):
        return np.exp(self.mu + math.sqrt(self.sigma2) * rng.standard_normal(size))

    def log_density_log(self, u):
        return -((u - self.mu) ** 2) / (2 * self.sigma2) - 0.5 * math.log(TWO_PI * self.sigma2)

    def log_saddle(self, z):
        return self.mu + self.sigma2 * z


@dataclass(frozen=True)
class Pareto(MellinDensity):
    """Density ``(theta - 1) x^(-theta)`` on (1, inf); theta = 2 gives x^-2."""

    theta: float = 2.0
    name = "pareto"

    def __post_init__(self):
        if self.theta <= 1:
            raise ValueError("pareto exponent must exceed 1")

    @property
    def spec(self):
        return f"pareto:{self.theta:g}"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 1, (self.theta - 1) * np.power(np.maximum(x, 1.0), -self.theta), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1, 1 - np.power(np.maximum(x, 1.0), 1 - self.theta), 0.0)

    def mellin(self, c, t):
        if c >= self.theta:
            raise ValueError(f"Mellin transform of {self.spec} needs c < {self.theta:g}")
        return (self.theta - 1) / (self.theta - 1 - _z(c, t))

    def moment(self, s):
        return (self.theta - 1) / (self.theta - 1 - s) if s < self.theta - 1 else math.inf

    def weighted_sup(self, e):
        return self.theta - 1 if e <= self.theta else math.inf

    def sample(self, rng, size):
        return np.power(1.0 - rng.random(size), -1.0 / (self.theta - 1))


@dataclass(frozen=True)
class PowerLaw(MellinDensity):
    """Density ``b x^(b - 1)`` on (0, 1); b = 2 is 2x, b = 1 the uniform."""

    b: float = 2.0
    name = "powerlaw"

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("power-law exponent must be positive")

    @property
    def spec(self):
        return "powerlaw2x" if self.b == 2 else f"powerlaw:{self.b:g}"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((x > 0) & (x < 1), self.b * np.power(np.clip(x, 0, 1), self.b - 1), 0.0)

    def cdf(self, x):
        return np.power(np.clip(np.asarray(x, dtype=float), 0.0, 1.0), self.b)

    def mellin(self, c, t):
        if c - 1 + self.b <= 0:
            raise ValueError(f"Mellin transform of {self.spec} needs c > {1 - self.b:g}")
        return self.b / (self.b + _z(c, t))

    def moment(self, s):
        return self.b / (self.b + s) if s > -self.b else math.inf

    def weighted_sup(self, e):
        return self.b if self.b - 1 + e >= 0 else math.inf

    def sample(self, rng, size):
        return np.power(rng.random(size), 1.0 / self.b)


@dataclass(frozen=True)
class Gamma(MellinDensity):
    shape: float = 2.0
    scale: float = 1.0
    name = "gamma"
    analytic_log = True

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("gamma shape and scale must be positive")

    @property
    def spec(self):
        return f"gamma:{self.shape:g}:{self.scale:g}"

    def pdf(self, x):
        return stats.gamma.pdf(x, self.shape, scale=self.scale)

    def cdf(self, x):
        return stats.gamma.cdf(x, self.shape, scale=self.scale)

    def mellin(self, c, t):
        z = _z(c, t)
        if self.shape + c - 1 <= 0:
            raise ValueError(f"Mellin transform of {self.spec} needs c > {1 - self.shape:g}")
        return np.exp(z * math.log(self.scale) + special.loggamma(self.shape + z) - special.gammaln(self.shape))

    def moment(self, s):
        if s <= -self.shape:
            return math.inf
        return math.exp(s * math.log(self.scale) + special.gammaln(self.shape + s) - special.gammaln(self.shape))

    def weighted_sup(self, e):
        a = self.shape - 1 + e
        if a < 0:
            return math.inf
        if a == 0:
            # x^(shape - 1 + e) exp(-x / scale) peaks as x -> 0
            return math.exp(-special.gammaln(self.shape) - self.shape * math.log(self.scale))
        x = a * self.scale
        return float(self.pdf(x) * x**e)

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    def log_density_log(self, u):
        return (
            self.shape * u
            - np.exp(u) / self.scale
            - special.gammaln(self.shape)
            - self.shape * math.log(self.scale)
        )

    def log_saddle(self, z):
        return np.log(self.scale * (self.shape + z))


def parse_density(spec: str) -> MellinDensity:
    """Resolve ``lognormal:0:1``, ``pareto:2``, ``powerlaw2x``, ``powerlaw:3``,
    ``uniform`` or ``gamma:2:1``."""
    name, *args = spec.strip().lower().split(":")
    try:
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise ValueError(f"bad density parameters in {spec!r}") from exc
    table = {
        "lognormal": (LogNormal, 2),
        "pareto": (Pareto, 1),
        "powerlaw": (PowerLaw, 1),
        "gamma": (Gamma, 2),
    }
    if name == "powerlaw2x" and not nums:
        return PowerLaw(2.0)
    if name == "uniform" and not nums:
        return PowerLaw(1.0)
    if name not in table or len(nums) > table[name][1]:
        raise ValueError(f"unknown density spec {spec!r}")
    return table[name][0](*nums)


@dataclass(frozen=True)
class WeightFunction:
    """The symmetric weight w^2(t) selecting which functional is tested.

    ``unit`` targets the density, ``survival`` the survival function and
    ``derivative`` the ``beta``-th derivative.
    """

    variant: str = "unit"
    c: float = 0.5
    beta: int = 0

    def __post_init__(self):
        if self.variant not in ("unit", "survival", "derivative"):
            raise ValueError(f"unknown weight variant {self.variant!r}")
        if self.variant == "survival" and self.c == 1:
            raise ValueError("survival weight has a pole at t = 0 when c = 1")
        if self.variant == "derivative" and (int(self.beta) != self.beta or self.beta < 1):
            raise ValueError("derivative weight needs a positive integer beta")

    @property
    def a(self) -> int:
        """Exponent a with w^2(t) ~ (1 + t^2)^a."""
        return {"unit": 0, "survival": -1, "derivative": int(self.beta)}[self.variant]

    @property
    def spec(self) -> str:
        return f"derivative:{self.beta}" if self.variant == "derivative" else self.variant

    def w2(self, t):
        t = np.asarray(t, dtype=float)
        s = 4 * math.pi**2 * t * t
        if self.variant == "unit":
            return np.ones_like(t)
        if self.variant == "survival":
            return 1.0 / ((self.c - 1) ** 2 + s)
        out = np.ones_like(t)
        for j in range(1, self.beta + 1):
            out = out * ((self.c + self.beta - j) ** 2 + s)
        return out


def parse_weight(spec: str, c: float) -> WeightFunction:
    name, _, arg = spec.strip().lower().partition(":")
    if name == "derivative":
        return WeightFunction("derivative", c, int(arg or 1))
    if arg:
        raise ValueError(f"weight {name!r} takes no parameter")
    return WeightFunction(name, c)


@dataclass(frozen=True)
class TestProblem:
    """One goodness-of-fit task: Mellin line, weight, null and error density."""

    __test__ = False

    c: float
    weight: WeightFunction
    null: MellinDensity
    error: MellinDensity
    check_grid: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.weight.c != self.c:
            raise ValueError("weight was built for a different Mellin line")
        grid = self.check_grid if self.check_grid is not None else np.linspace(0.0, 50.0, 2001)
        m = np.abs(self.error.mellin(self.c, grid))
        if not np.all(np.isfinite(m)) or np.any(m == 0):
            raise ValueError(f"Mellin transform of the error {self.error.spec} vanishes on the probe grid")
        self.null.mellin(self.c, 0.0)

    @classmethod
    def from_specs(cls, null="lognormal:0:1", error="pareto:2", c=0.5, weight="unit"):
        return cls(c, parse_weight(weight, c), parse_density(null), parse_density(error))

    def inv_error2(self, t):
        """w^2(t) / |M_c[g_U](t)|^2."""
        m = self.error.mellin(self.c, t)
        return self.weight.w2(t) / (m.real**2 + m.imag**2)


def _saddle(ell, u0: complex, tol: float = 1e-13, maxiter: int = 100) -> complex:
    # Newton on ell'(u) = 0 with central differences; ell is analytic
    h = 1e-4
    u = complex(u0)
    for _ in range(maxiter):
        d1 = (ell(u + h) - ell(u - h)) / (2 * h)
        d2 = (ell(u + h) - 2 * ell(u) + ell(u - h)) / (h * h)
        step = d1 / d2
        u -= step
        if abs(step) < tol * max(1.0, abs(u)):
            break
    return u


def mellin_numeric(density, c: float, t: float, reltol: float = DEFAULT_RELTOL) -> complex:
    """Mellin transform by quadrature of the defining integral.

    ``density`` is a pdf callable or a :class:`MellinDensity`.  For densities
    whose log-variable density is entire the integration line in
    u = ln x is moved through the saddle point of the integrand, which removes
    the oscillation and keeps full relative accuracy where the transform is
    tiny.  Everything else is integrated along the real axis.
    """
    z = complex(c - 1.0, TWO_PI * t)
    if isinstance(density, MellinDensity) and density.analytic_log:

        def ell(u):
            return z * u + density.log_density_log(u)

        us = density.log_saddle(z)
        if us is None:
            grid = np.linspace(-40, 40, 8001)
            u0 = grid[np.argmax(np.real(density.log_density_log(grid.astype(complex)) + (c - 1) * grid))]
            us = _saddle(ell, complex(u0))
        us = complex(us)
        d2 = (ell(us + 1e-4) - 2 * ell(us) + ell(us - 1e-4)) / 1e-8
        scale = 1.0 / math.sqrt(abs(d2))
        ref = ell(us)

        def g(r):
            return np.exp(ell(us + scale * r) - ref) * scale

        return complex(np.exp(ref) * integrate_real_line(g, reltol))

    pdf = density.pdf if isinstance(density, MellinDensity) else density

    def f(x):
        return np.exp(z * np.log(x)) * pdf(x)

    return complex(integrate_halfline(f, reltol))


def mellin_product(problem: TestProblem, density: MellinDensity, t):
    """M_c[density * g_U](t) by the multiplicative convolution theorem."""
    return density.mellin(problem.c, t) * problem.error.mellin(problem.c, t)


def q2_truncated(delta_m, weight: WeightFunction, k: float, reltol: float = DEFAULT_RELTOL) -> float:
    """int_{-k}^{k} |delta_m(t)|^2 w^2(t) dt for a Hermitian ``delta_m``."""
    if k <= 0:
        raise ValueError("k must be positive")

    def f(t):
        d = delta_m(t)
        return (d.real**2 + d.imag**2) * weight.w2(t)

    return 2.0 * float(integrate_interval(f, 0.0, k, reltol))


def q2_full(delta_m, weight: WeightFunction, reltol: float = DEFAULT_RELTOL, k0: float = 8.0) -> float:
    """The untruncated functional; k doubles from ``k0`` until the tail settles."""

    def f(t):
        d = delta_m(t)
        return (d.real**2 + d.imag**2) * weight.w2(t)

    k = k0
    est = 2.0 * float(integrate_interval(f, 0.0, k, reltol))
    previous = math.inf
    growth = 0
    while k < 2.0**40:
        piece = 2.0 * float(integrate_interval(f, k, 2 * k, reltol))
        est += piece
        k *= 2
        if piece <= max(reltol * est, 1e-300):
            return est
        growth = growth + 1 if piece >= previous else 0
        if growth >= 3:
            break
        previous = piece
    raise DivergenceError(
        "|delta M|^2 w^2 is not integrable: the weight grows faster than the transform decays",
        estimate=est,
    )
