"""Mellin-transform goodness-of-fit tests under multiplicative measurement error.

Observations are Y = X U with X from an unknown density and U from a known
error density.  The tests compare the Mellin transform of the density of X,
recovered by dividing out the transform of the error, with that of a
hypothesised null density.
"""

from .maxtest import Collection, MaxTestOutcome, build_collection, delta_K, max_test, parse_collection
from .mellin import (
    Gamma,
    LogNormal,
    MellinDensity,
    Pareto,
    PowerLaw,
    TestProblem,
    WeightFunction,
    mellin_numeric,
    parse_density,
    parse_weight,
    q2_full,
    q2_truncated,
)
from .rates import AlternativeClass, ErrorSmoothness, RegularityClass, k_star, rate_order, rho2_k
from .simulation import SimConfig, SimResult, calibrate_quantile, draw_sample, run_simulation
from .statistic import Sample, statistic, statistic_values
from .thresholds import (
    Empirical,
    ModelConstants,
    Theoretical,
    TheoreticalBonferroni,
    model_constants,
    tau_k,
    tau_k_bonferroni,
    test_single,
)

__version__ = "0.1.0"
