"""Samplers, Monte Carlo engine, quantile calibration and the reference experiment.

Replication ``r`` of stream ``s`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(s, r))``, and replications are evaluated in
chunks of fixed size.  Results are therefore identical whatever the number of
workers.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .maxtest import delta_K
from .mellin import MellinDensity, TestProblem, parse_density, q2_full
from .statistic import STAT_RELTOL, Sample, statistic_values
from .thresholds import model_constants, tau_k, tau_k_bonferroni

log = logging.getLogger(__name__)

STREAM_REPS = 0
STREAM_CALIB = 1
CHUNK = 64


def stream_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, index)))


def draw_sample(density: MellinDensity, error: MellinDensity, n: int, rng) -> Sample:
    """n products X U with X ~ density and U ~ error."""
    x = density.sample(rng, n)
    u = error.sample(rng, n)
    return Sample(x * u)


def order_quantile(values, alpha: float, axis: int = 0):
    """The ceil((1 - alpha) B)-th smallest of B values."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    v = np.sort(np.asarray(values, dtype=float), axis=axis)
    B = v.shape[axis]
    # guard against (1 - alpha) * B landing a hair above an integer
    idx = min(max(math.ceil((1 - alpha) * B - 1e-9), 1), B)
    return np.take(v, idx - 1, axis=axis)


def calibrate_quantile(problem: TestProblem, k: float, n: int, alpha: float, B: int, rng, reltol=STAT_RELTOL) -> float:
    """Level-alpha null quantile of the statistic at one k from B simulated samples."""
    if B < 100:
        raise ValueError("B must be at least 100")
    samples = np.stack([draw_sample(problem.null, problem.error, n, rng).values for _ in range(B)])
    return float(order_quantile(statistic_values(samples, problem, [k], reltol)[:, 0], alpha))


def _chunk_stats(args):
    problem, density, n, k_grid, seed, stream, lo, hi, reltol = args
    samples = np.stack(
        [draw_sample(density, problem.error, n, stream_rng(seed, stream, r)).values for r in range(lo, hi)]
    )
    return statistic_values(samples, problem, k_grid, reltol)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def simulate_statistics(
    problem: TestProblem,
    density: MellinDensity,
    n: int,
    reps: int,
    k_grid,
    seed: int,
    stream: int = STREAM_REPS,
    jobs: int = 1,
    reltol: float = STAT_RELTOL,
) -> np.ndarray:
    """Statistic values, shape (reps, len(k_grid)), for samples drawn from ``density``."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    k_grid = tuple(float(k) for k in k_grid)
    tasks = [
        (problem, density, n, k_grid, seed, stream, lo, min(lo + CHUNK, reps), reltol)
        for lo in range(0, reps, CHUNK)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_chunk_stats, tasks))
    else:
        parts = [_chunk_stats(t) for t in tasks]
    return np.concatenate(parts, axis=0)


def calibrate_quantiles(problem, k_grid, n, alpha, B, seed, jobs=1, reltol=STAT_RELTOL) -> np.ndarray:
    """Per-k null quantiles from the calibration stream of ``seed``."""
    if B < 100:
        raise ValueError("B must be at least 100")
    stats = simulate_statistics(problem, problem.null, n, B, k_grid, seed, STREAM_CALIB, jobs, reltol)
    return order_quantile(stats, alpha, axis=0)


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    reps: int = 50
    k_grid: tuple = (1.0,)
    alpha: float = 0.1
    seed: int = 0
    scale: float = 1.0
    calib_B: int = 1000
    null_name: str = "lognormal:0:1"
    alt_name: str | None = None
    error_name: str = "pareto:2"
    c: float = 0.5
    weight: str = "unit"
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "k_grid", tuple(float(k) for k in self.k_grid))
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.calib_B < 100:
            raise ValueError("calib_B must be at least 100")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        k = np.asarray(self.k_grid)
        if k.size == 0 or np.any(k <= 0) or np.any(np.diff(k) <= 0):
            raise ValueError("k_grid must be positive and strictly increasing")

    def problem(self) -> TestProblem:
        return TestProblem.from_specs(self.null_name, self.error_name, self.c, self.weight)


PRESETS = {
    "paper-sec6": dict(
        k_grid=tuple(round(0.5 + 0.1 * i, 10) for i in range(10)),
        reps=50,
        alpha=0.1,
        scale=0.6,
        calib_B=1000,
        null_name="lognormal:0:1",
        error_name="pareto:2",
        c=0.5,
        weight="unit",
    )
}
EXAMPLES = {1: None, 2: "powerlaw2x"}


def preset_config(name: str, example: int = 1, n: int = 100, **overrides) -> SimConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}")
    if example not in EXAMPLES:
        raise ValueError(f"example must be one of {sorted(EXAMPLES)}")
    return SimConfig(n=n, alt_name=EXAMPLES[example], **{**PRESETS[name], **overrides})


@dataclass
class SimResult:
    config: SimConfig
    stats: np.ndarray
    tau_theoretical: np.ndarray
    tau_bonferroni: np.ndarray
    q_empirical: np.ndarray
    q_empirical_maxtest: np.ndarray
    rejection_rates: dict
    separation_truth: float
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def rows(self):
        reps, K = self.stats.shape
        return [(k, r, float(self.stats[r, j])) for j, k in enumerate(self.config.k_grid) for r in range(reps)]


def separation_truth(problem: TestProblem, alt: MellinDensity | None) -> float:
    if alt is None or alt == problem.null:
        return 0.0
    c = problem.c
    return q2_full(lambda t: alt.mellin(c, t) - problem.null.mellin(c, t), problem.weight)


def run_simulation(config: SimConfig, jobs: int = 1, quantiles=None, keep_samples: bool = False) -> SimResult:
    """Statistics, the four threshold flavours and rejection rates for one configuration.

    ``quantiles`` may supply precomputed per-k null quantiles; they depend only
    on the null problem, n, alpha, calib_B and seed.
    """
    problem = config.problem()
    alt = problem.null if config.alt_name is None else parse_density(config.alt_name)
    k = config.k_grid
    stats = simulate_statistics(problem, alt, config.n, config.reps, k, config.seed, STREAM_REPS, jobs)
    constants = model_constants(problem, config.p)
    tau_t = np.array([tau_k(problem, constants, kk, config.n, config.alpha, config.scale) for kk in k])
    tau_b = np.array(
        [tau_k_bonferroni(problem, constants, kk, config.n, config.alpha, len(k), config.scale) for kk in k]
    )
    if quantiles is None:
        quantiles = calibrate_quantiles(problem, k, config.n, config.alpha, config.calib_B, config.seed, jobs)
    q_emp = np.asarray(quantiles, dtype=float)
    q_max = q_emp / delta_K(len(k))
    rates = {}
    for j, kk in enumerate(k):
        rates[f"single_theoretical:k={kk:g}"] = float(np.mean(stats[:, j] >= tau_t[j]))
    for j, kk in enumerate(k):
        rates[f"single_empirical:k={kk:g}"] = float(np.mean(stats[:, j] >= q_emp[j]))
    rates["max_theoretical"] = float(np.mean(np.any(stats >= tau_b, axis=1)))
    rates["max_empirical"] = float(np.mean(np.any(stats >= q_max, axis=1)))
    samples = None
    if keep_samples:
        samples = np.stack(
            [draw_sample(alt, problem.error, config.n, stream_rng(config.seed, STREAM_REPS, r)).values for r in range(config.reps)]
        )
    return SimResult(config, stats, tau_t, tau_b, q_emp, q_max, rates, separation_truth(problem, None if config.alt_name is None else alt), samples)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_outputs(result: SimResult, out_dir, svg: bool = True) -> list[Path]:
    """stats.csv, thresholds.csv, summary.csv and optionally boxplot.svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = result.config.k_grid
    with open(out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "rep", "statistic"])
        for kk, r, v in result.rows:
            w.writerow([_fmt(kk), r, _fmt(v)])
    with open(out / "thresholds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "tau_theoretical", "tau_bonferroni", "q_emp", "q_emp_max"])
        for j, kk in enumerate(k):
            w.writerow([_fmt(v) for v in (kk, result.tau_theoretical[j], result.tau_bonferroni[j], result.q_empirical[j], result.q_empirical_maxtest[j])])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "rejection_rate", "separation_truth"])
        for mode, rate in result.rejection_rates.items():
            w.writerow([mode, _fmt(rate), _fmt(result.separation_truth)])
    paths = [out / "stats.csv", out / "thresholds.csv", out / "summary.csv"]
    if result.samples is not None:
        with open(out / "samples.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rep", "index", "value"])
            for r, row in enumerate(result.samples):
                for i, v in enumerate(row):
                    w.writerow([r, i, _fmt(v)])
        paths.append(out / "samples.csv")
    if svg:
        paths.append(write_boxplot(result, out / "boxplot.svg"))
    return paths


def write_boxplot(result: SimResult, path) -> Path:
    """Per-k boxes of the statistic with triangle markers for the thresholds."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "mellin-gof"
    k = list(result.config.k_grid)
    pos = np.arange(len(k))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.boxplot([result.stats[:, j] for j in range(len(k))], positions=pos, widths=0.5)
    markers = [
        ("tau_theoretical", result.tau_theoretical, "tab:blue"),
        ("tau_bonferroni", result.tau_bonferroni, "tab:purple"),
        ("q_emp", result.q_empirical, "tab:orange"),
        ("q_emp_max", result.q_empirical_maxtest, "tab:brown"),
    ]
    for label, values, colour in markers:
        ax.scatter(pos, values, marker="^", color=colour, label=label, zorder=3)
    ax.axhline(result.separation_truth, color="black", linestyle="--", linewidth=1, label="q2 truth")
    ax.set_xticks(pos)
    ax.set_xticklabels([f"{kk:g}" for kk in k])
    ax.set_xlabel("k")
    ax.set_ylabel("statistic")
    ax.set_yscale("symlog", linthresh=1e-2)
    cfg = result.config
    ax.set_title(f"n={cfg.n}, alt={cfg.alt_name or cfg.null_name}")
    ax.legend(fontsize="small", loc="upper left")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def reproduce_reference(out_dir, n_list=(100, 500), examples=(1, 2), seed: int = 0, jobs: int = 1, **overrides):
    """Run the named reference preset for each example and sample size."""
    results = {}
    for n in n_list:
        quantiles = None
        for ex in examples:
            cfg = preset_config("paper-sec6", ex, n, seed=seed, **overrides)
            res = run_simulation(cfg, jobs, quantiles)
            quantiles = res.q_empirical
            write_outputs(res, Path(out_dir) / f"example{ex}_n{n}")
            results[(ex, n)] = res
    return results


__all__ = [
    "SimConfig",
    "SimResult",
    "PRESETS",
    "calibrate_quantile",
    "calibrate_quantiles",
    "draw_sample",
    "order_quantile",
    "preset_config",
    "reproduce_reference",
    "run_simulation",
    "simulate_statistics",
    "stream_rng",
    "write_outputs",
]
