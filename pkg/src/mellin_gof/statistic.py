"""The test statistic T_k - 2 S_k + q_k^2(f0) and its exact decomposition.

All three terms are integrals over [-k, k] of real, even integrands, so they
are evaluated as twice the integral over [0, k].  The per-node sums

    S(t) = sum_j Y_j^(c - 1 + 2 pi i t),    P = sum_j Y_j^(2(c - 1))

give the off-diagonal pair sum of T_k as |S(t)|^2 - P without forming pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mellin import TWO_PI, MellinDensity, TestProblem, mellin_product, q2_truncated
from .numerics import integrate_interval

STAT_RELTOL = 1e-8
# bound on rows * nodes * observations held in memory at once
_CHUNK_ELEMENTS = 1 << 21


class SampleError(ValueError):
    """Observations unusable for the statistic."""


@dataclass(frozen=True)
class Sample:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise SampleError(f"need at least 2 observations, got {v.size}")
        bad = np.nonzero(~(v > 0) | ~np.isfinite(v))[0]
        if bad.size:
            raise SampleError(f"observation {bad[0]} is not a positive finite number: {v[bad[0]]!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class StatisticBreakdown:
    k: float
    t_hat: float
    s_hat: float
    q2k_null: float
    value: float


@dataclass(frozen=True)
class Decomposition:
    u_k: float
    w_k: float
    q2k_sep: float


def _powers(samples: np.ndarray, c: float):
    """Sorted log-observations and Y^(c-1) per row, with overflow check."""
    y = np.sort(np.atleast_2d(np.asarray(samples, dtype=float)), axis=-1)
    if np.any(~(y > 0)):
        r, j = np.argwhere(~(y > 0))[0]
        raise SampleError(f"observation {y[r, j]!r} is not positive")
    lny = np.log(y)
    with np.errstate(over="ignore"):
        a = np.exp((c - 1.0) * lny)
        # |S(t)|^2 <= (sum Y^(c-1))^2 must stay finite too
        bad = ~np.isfinite(a) | (a == 0) | ~np.isfinite(a * a.sum(axis=-1, keepdims=True))
    if np.any(bad):
        r, j = np.argwhere(bad)[0]
        raise SampleError(f"Y^(c-1) overflows for observation {y[r, j]!r}")
    return lny, a


def _power_sums(lny: np.ndarray, a: np.ndarray, t: np.ndarray) -> np.ndarray:
    """S(t) for every row of ``lny``; returns shape (rows, len(t))."""
    rows, n = lny.shape
    step = max(1, _CHUNK_ELEMENTS // (t.size * n))
    out = np.empty((rows, t.size), dtype=complex)
    w = TWO_PI * t
    for lo in range(0, rows, step):
        phase = lny[lo : lo + step, None, :] * w[None, :, None]
        out[lo : lo + step] = (a[lo : lo + step, None, :] * np.exp(1j * phase)).sum(axis=-1)
    return out


def _terms(lny, a, problem: TestProblem, k_grid, reltol):
    """Integrals of T, S and q^2(f0) over [0, k] for each k in the sorted grid.

    Returns an array of shape (3, rows, len(k_grid)).
    """
    rows, n = lny.shape
    p = (a * a).sum(axis=-1)
    c = problem.c

    def integrand(t):
        inv = problem.inv_error2(t)
        m0 = problem.null.mellin(c, t)
        mu = problem.error.mellin(c, t)
        s = _power_sums(lny, a, t)
        t_part = (s.real**2 + s.imag**2 - p[:, None]) / (n * (n - 1)) * inv
        # conj(M0 MU) / |MU|^2 = conj(M0) / MU
        s_part = (s * (np.conj(m0) / mu)).real * problem.weight.w2(t) / n
        q_part = np.broadcast_to((m0.real**2 + m0.imag**2) * problem.weight.w2(t), t_part.shape)
        return np.stack([t_part, s_part, q_part])

    edges = np.concatenate([[0.0], np.asarray(k_grid, dtype=float)])
    pieces = [
        integrate_interval(integrand, lo, hi, reltol) for lo, hi in zip(edges[:-1], edges[1:])
    ]
    return 2.0 * np.cumsum(np.stack(pieces, axis=-1), axis=-1)


def _check_grid(k_grid):
    k = np.atleast_1d(np.asarray(k_grid, dtype=float))
    if k.size == 0 or np.any(k <= 0) or np.any(np.diff(k) <= 0):
        raise ValueError("k values must be positive and strictly increasing")
    return k


def statistic_terms(samples, problem: TestProblem, k_grid, reltol: float = STAT_RELTOL) -> np.ndarray:
    """Batch evaluation: (3, rows, len(k_grid)) array of T_k, S_k, q_k^2(f0)."""
    k = _check_grid(k_grid)
    lny, a = _powers(samples, problem.c)
    if lny.shape[1] < 2:
        raise SampleError("need at least 2 observations")
    return _terms(lny, a, problem, k, reltol)


def statistic_values(samples, problem: TestProblem, k_grid, reltol: float = STAT_RELTOL) -> np.ndarray:
    """Statistic values for many samples and a grid of k; shape (rows, len(k_grid)).

    Rows are independent: a row's values do not depend on the other rows.
    """
    t_hat, s_hat, q0 = statistic_terms(samples, problem, k_grid, reltol)
    return t_hat - 2.0 * s_hat + q0


def _as_sample(sample) -> Sample:
    return sample if isinstance(sample, Sample) else Sample(np.asarray(sample, dtype=float))


def t_hat(sample, problem: TestProblem, k: float, reltol: float = STAT_RELTOL) -> float:
    return float(statistic_terms(_as_sample(sample).values, problem, [k], reltol)[0, 0, 0])


def s_hat(sample, problem: TestProblem, k: float, reltol: float = STAT_RELTOL) -> float:
    values = np.asarray(sample.values if isinstance(sample, Sample) else sample, dtype=float).ravel()
    if values.size < 1:
        raise SampleError("need at least 1 observation")
    lny, a = _powers(values, problem.c)
    c = problem.c

    def integrand(t):
        s = _power_sums(lny, a, t)[0]
        m0 = problem.null.mellin(c, t)
        mu = problem.error.mellin(c, t)
        return (s * (np.conj(m0) / mu)).real * problem.weight.w2(t) / values.size

    return 2.0 * float(integrate_interval(integrand, 0.0, k, reltol))


def q2k_null(problem: TestProblem, k: float, reltol: float = STAT_RELTOL) -> float:
    return q2_truncated(lambda t: problem.null.mellin(problem.c, t), problem.weight, k, reltol)


def statistic(sample, problem: TestProblem, k: float, reltol: float = STAT_RELTOL) -> StatisticBreakdown:
    s = _as_sample(sample)
    th, sh, q0 = (float(v) for v in statistic_terms(s.values, problem, [k], reltol)[:, 0, 0])
    return StatisticBreakdown(float(k), th, sh, q0, th - 2.0 * sh + q0)


def t_hat_naive(sample, problem: TestProblem, k: float, reltol: float = STAT_RELTOL) -> float:
    """O(n^2) pair sum of the T_k integrand; reference for the streaming form."""
    y = np.sort(_as_sample(sample).values)
    n = y.size
    c = problem.c

    def integrand(t):
        powers = np.exp(np.multiply.outer(c - 1 + 1j * TWO_PI * t, np.log(y)))
        total = np.zeros(t.shape)
        for j in range(n):
            for l in range(n):
                if j != l:
                    total += (powers[:, j] * np.conj(powers[:, l])).real
        return total / (n * (n - 1)) * problem.inv_error2(t)

    return 2.0 * float(integrate_interval(integrand, 0.0, k, reltol))


def decomposition_oracle(
    sample, problem: TestProblem, true_density: MellinDensity, k: float, reltol: float = STAT_RELTOL
) -> Decomposition:
    """U_k, W_k and q_k^2(f - f0) for a sample drawn from ``true_density``.

    The statistic equals ``u_k + 2 w_k + q2k_sep`` for every sample.
    """
    s = _as_sample(sample)
    lny, a = _powers(s.values, problem.c)
    n = s.n
    c = problem.c

    def integrand(t):
        my = mellin_product(problem, true_density, t)
        my0 = mellin_product(problem, problem.null, t)
        centred = a[0][None, :] * np.exp(1j * TWO_PI * np.multiply.outer(t, lny[0])) - my[:, None]
        phi = centred.sum(axis=-1)
        diag = (centred.real**2 + centred.imag**2).sum(axis=-1)
        inv = problem.inv_error2(t)
        u = (phi.real**2 + phi.imag**2 - diag) / (n * (n - 1)) * inv
        w = (phi * np.conj(my - my0)).real / n * inv
        return np.stack([u, w])

    u_k, w_k = 2.0 * integrate_interval(integrand, 0.0, k, reltol)
    sep = q2_truncated(
        lambda t: true_density.mellin(c, t) - problem.null.mellin(c, t), problem.weight, k, reltol
    )
    return Decomposition(float(u_k), float(w_k), sep)


def q2k_separation(problem: TestProblem, true_density: MellinDensity, k: float, reltol=STAT_RELTOL) -> float:
    """E[statistic] under ``true_density``: q_k^2(f - f0)."""
    c = problem.c
    return q2_truncated(lambda t: true_density.mellin(c, t) - problem.null.mellin(c, t), problem.weight, k, reltol)

