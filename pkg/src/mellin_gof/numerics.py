"""Deterministic quadrature and sup-norm search.

Every integrand passed to the routines here is vectorised: it receives a 1-d
array of abscissae of length ``m`` and returns an array whose *last* axis has
length ``m``.  Leading axes are treated as independent components, each of
which is checked for convergence separately and frozen once it converged, so
a component's result does not depend on which other components share the
call.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

DEFAULT_RELTOL = 1e-9
ABS_FLOOR = 1e-14
GL_ORDER = 64
MAX_DOUBLINGS = 12


class QuadratureError(ArithmeticError):
    """Adaptive refinement did not converge.

    ``estimate`` holds the last estimate and ``gap`` the largest difference
    between the final two refinement levels.
    """

    def __init__(self, message, estimate=None, gap=None):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


class DivergenceError(QuadratureError):
    """An integral over an unbounded range does not settle as the range grows."""


class NonFiniteError(ArithmeticError):
    """An integrand or objective returned inf/nan at some abscissa."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @classmethod
    def gauss_legendre(cls, a: float, b: float, panels: int = 1, order: int = GL_ORDER):
        """Composite Gauss-Legendre rule with ``panels`` equal panels on [a, b]."""
        if not a < b:
            raise ValueError(f"need a < b, got [{a}, {b}]")
        x, w = _legendre(order)
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return cls(nodes, weights, order)

    def apply(self, f):
        values = np.asarray(f(self.nodes))
        if not np.all(np.isfinite(values)):
            bad = np.nonzero(~np.isfinite(values))
            t = float(self.nodes[bad[-1][0]])
            raise NonFiniteError(f"integrand is not finite at t={t!r}", t=t)
        return values @ self.weights


def integrate_interval(
    f,
    a: float,
    b: float,
    reltol: float = DEFAULT_RELTOL,
    *,
    abstol: float = ABS_FLOOR,
    order: int = GL_ORDER,
    panels: int = 1,
    max_doublings: int = MAX_DOUBLINGS,
):
    """Integrate ``f`` over [a, b] by composite Gauss-Legendre with panel doubling.

    Refinement stops for a component once two successive estimates differ by
    at most ``max(reltol * |estimate|, abstol)``.  Returns a scalar for scalar
    integrands, otherwise an array shaped like ``f``'s leading axes.
    """
    if reltol <= 0:
        raise ValueError("reltol must be positive")
    prev = np.asarray(QuadratureRule.gauss_legendre(a, b, panels, order).apply(f))
    result = prev.copy()
    done = np.zeros(prev.shape, dtype=bool)
    gap = np.full(prev.shape, np.inf)
    for _ in range(max_doublings):
        panels *= 2
        cur = np.asarray(QuadratureRule.gauss_legendre(a, b, panels, order).apply(f))
        gap = np.abs(cur - prev)
        ok = gap <= np.maximum(reltol * np.abs(cur), abstol)
        fresh = ok & ~done
        result[fresh] = cur[fresh]
        done |= ok
        if done.all():
            return result[()]
        prev = cur
    pending = ~done
    result[pending] = prev[pending]
    raise QuadratureError(
        f"no convergence on [{a}, {b}] after {max_doublings} doublings",
        estimate=result[()],
        gap=float(np.max(gap[pending])),
    )


def integrate_real_line(
    g,
    reltol: float = DEFAULT_RELTOL,
    *,
    abstol: float = ABS_FLOOR,
    start: float = 8.0,
    limit: float = 512.0,
    breakpoints=(0.0,),
):
    """Integrate ``g`` over the whole real line.

    The range [-T, T] is split at ``breakpoints`` and T is doubled until the
    mass of ``|g|`` on the two newly added slabs drops below
    ``reltol * |estimate|``.
    """
    cuts = sorted({-start, start, *(b for b in breakpoints if -start < b < start)})
    est = sum(
        integrate_interval(g, lo, hi, reltol, abstol=abstol) for lo, hi in zip(cuts, cuts[1:])
    )
    T = start
    while T < limit:
        pieces = integrate_interval(g, T, 2 * T, reltol, abstol=abstol) + integrate_interval(
            g, -2 * T, -T, reltol, abstol=abstol
        )
        mass = integrate_interval(lambda u: np.abs(g(u)), T, 2 * T, 1e-3, abstol=abstol) + (
            integrate_interval(lambda u: np.abs(g(u)), -2 * T, -T, 1e-3, abstol=abstol)
        )
        est = est + pieces
        T *= 2
        if np.all(mass <= np.maximum(reltol * np.abs(est), abstol)):
            return est
    raise DivergenceError(
        f"tail mass does not vanish up to |u| = {limit}", estimate=est, gap=float(np.max(mass))
    )


def integrate_halfline(f, reltol: float = DEFAULT_RELTOL, *, abstol: float = ABS_FLOOR):
    """Integrate ``f`` over (0, inf) through the substitution x = exp(u)."""

    def g(u):
        x = np.exp(u)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            values = np.asarray(f(x)) * x
        # 0 * inf from underflowing densities at huge x carries no mass
        return np.where(np.isnan(values) & np.isfinite(x), 0.0, values)

    return integrate_real_line(g, reltol, abstol=abstol)


def sup_on_interval(f, k: float, grid: int = 4096, xtol: float = 1e-10) -> float:
    """Maximum of ``f`` over [0, k]: dense grid, then bounded refinement."""
    if k <= 0:
        raise ValueError("k must be positive")
    if grid < 64:
        raise ValueError("grid must be at least 64")
    t = np.linspace(0.0, k, grid + 1)
    values = np.asarray(f(t), dtype=float)
    if not np.all(np.isfinite(values)):
        bad = float(t[np.nonzero(~np.isfinite(values))[0][0]])
        raise NonFiniteError(f"objective is not finite at t={bad!r}", t=bad)
    i = int(np.argmax(values))
    best = float(values[i])
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, grid)]

    def neg(s):
        v = float(np.asarray(f(np.array([s])))[0])
        if not np.isfinite(v):
            raise NonFiniteError(f"objective is not finite at t={s!r}", t=s)
        return -v

    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": xtol})
    return max(best, -float(res.fun))
