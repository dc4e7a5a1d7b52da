"""Collections of dimension parameters and the Bonferroni max-test."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .mellin import TestProblem
from .statistic import STAT_RELTOL, Sample, statistic_values
from .thresholds import (
    Empirical,
    ModelConstants,
    TestOutcome,
    TheoreticalBonferroni,
    deltainf,
    delta4,
    model_constants,
    tau_k_bonferroni,
)

log = logging.getLogger(__name__)

NAIVE_CAP = 10_000


@dataclass(frozen=True)
class Collection:
    kind: str
    members: tuple

    def __post_init__(self):
        m = tuple(float(x) for x in self.members)
        if not m:
            raise ValueError("collection must not be empty")
        if any(x <= 0 for x in m) or any(b <= a for a, b in zip(m, m[1:])):
            raise ValueError("collection members must be positive and strictly increasing")
        object.__setattr__(self, "members", m)

    @property
    def size(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def _log(x, base):
    return math.log(x) if base == "e" else math.log(x, base)


def build_collection(kind: str, n: int = 2, *, m: float = 1.0, members=None, log_base="e") -> Collection:
    """Naive {1..n^2}, geometric, log-log geometric (parameter ``m``) or explicit.

    ``log_base`` is the base of the logarithm in the geometric exponents;
    natural log by default.
    """
    if kind == "explicit":
        return Collection("explicit", tuple(members))
    if n < 2:
        raise ValueError("n must be at least 2")
    if kind == "naive":
        size = n * n
        if size > NAIVE_CAP:
            log.warning("naive collection of %d members capped at %d", size, NAIVE_CAP)
            size = NAIVE_CAP
        return Collection("naive", tuple(range(1, size + 1)))
    if kind == "geometric":
        top = math.floor(_log(n * n, log_base))
    elif kind == "loglog":
        if m <= 0:
            raise ValueError("m must be positive")
        inner = math.log(n) if log_base == "e" else math.log(n, log_base)
        if inner <= 1 or _log(inner, log_base) <= 0:
            raise ValueError(f"log log n is not positive for n={n}")
        top = math.floor(_log(inner, log_base) / m)
    else:
        raise ValueError(f"unknown collection kind {kind!r}")
    return Collection(kind, tuple([1.0] + [2.0**j for j in range(1, top + 1)]))


def parse_collection(spec: str, n: int) -> Collection:
    """CLI form: naive | geometric | loglog:<m> | explicit:<comma-list>."""
    kind, _, arg = spec.partition(":")
    if kind == "explicit":
        return build_collection("explicit", members=[float(x) for x in arg.split(",") if x.strip()])
    if kind == "loglog":
        return build_collection("loglog", n, m=float(arg or 1.0))
    if arg:
        raise ValueError(f"collection {kind!r} takes no parameter")
    return build_collection(kind, n)


def delta_K(collection) -> float:
    """Adaptive factor (1 + ln |K|)^(-1/2)."""
    size = collection if isinstance(collection, int) else collection.size
    if size < 1:
        raise ValueError("collection size must be at least 1")
    return (1.0 + math.log(size)) ** -0.5


@dataclass(frozen=True)
class MaxTestOutcome:
    per_k: tuple
    reject: bool
    delta_K: float


def max_test_thresholds(
    problem: TestProblem,
    collection: Collection,
    n: int,
    alpha: float,
    p: float = 2.0,
    mode="bonferroni",
    scale: float = 1.0,
    constants: ModelConstants | None = None,
    quantiles=None,
) -> np.ndarray:
    """Per-member critical values of the max-test.

    ``mode="bonferroni"`` uses the theoretical per-k values at level
    alpha/|K|; ``mode="empirical"`` scales the calibrated per-k level-alpha
    ``quantiles`` by 1/delta_K.
    """
    if mode == "empirical":
        if quantiles is None or len(quantiles) != collection.size:
            raise ValueError("empirical mode needs one calibrated quantile per member")
        return np.asarray(quantiles, dtype=float) / delta_K(collection)
    if mode != "bonferroni":
        raise ValueError(f"unknown max-test mode {mode!r}")
    if constants is None or constants.p != p:
        constants = model_constants(problem, p)
    return np.array(
        [tau_k_bonferroni(problem, constants, k, n, alpha, collection.size, scale) for k in collection]
    )


def max_test(
    sample,
    problem: TestProblem,
    collection: Collection,
    alpha: float,
    p: float = 2.0,
    mode="bonferroni",
    scale: float = 1.0,
    constants: ModelConstants | None = None,
    quantiles=None,
    reltol: float = STAT_RELTOL,
) -> MaxTestOutcome:
    """Reject as soon as one member test rejects."""
    s = sample if isinstance(sample, Sample) else Sample(np.asarray(sample, dtype=float))
    taus = max_test_thresholds(problem, collection, s.n, alpha, p, mode, scale, constants, quantiles)
    values = statistic_values(s.values, problem, collection.members, reltol)[0]
    if mode == "empirical":
        modes = [Empirical(float(q)) for q in taus]
    else:
        modes = [TheoreticalBonferroni(p, collection.size)] * collection.size
    per_k = tuple(
        TestOutcome(k, float(v), float(tau), alpha, md, bool(v >= tau))
        for k, v, tau, md in zip(collection, values, taus, modes)
    )
    return MaxTestOutcome(per_k, any(o.reject for o in per_k), delta_K(collection))


@dataclass(frozen=True)
class AdaptiveRadius:
    k_sel: float
    r2: float


def radius_terms(problem: TestProblem, regularity, k) -> tuple[float, float, float]:
    """Bias w^2(k)/s^2(k) and the penalties sqrt(Delta4(k)), sqrt(DeltaInf(k))."""
    bias = regularity.bias(problem.weight, k)
    return bias, math.sqrt(delta4(problem, k)), math.sqrt(deltainf(problem, k))


def adaptive_radius(regularity, collection: Collection, problem: TestProblem, n: float) -> AdaptiveRadius:
    """Member minimising the adaptive radius, and that minimum."""
    if n < 2:
        raise ValueError("n must be at least 2")
    dk = delta_K(collection)
    best = None
    for k in collection:
        bias, s4, sinf = radius_terms(problem, regularity, k)
        r2 = max(bias, max(s4 / dk, sinf / dk**2) / n)
        if best is None or r2 < best.r2:
            best = AdaptiveRadius(k, r2)
    return best

