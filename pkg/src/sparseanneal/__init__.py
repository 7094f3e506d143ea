"""Sparse approximation by annealed pair-flip Monte Carlo.

A numpy/numba library for the cardinality-constrained sparse approximation
problem: pick at most K columns of an overcomplete dictionary to minimize the
residual distortion of an observed signal. The package provides

  * planted problem instances from a Bernoulli-Gaussian model (``instance``),
  * incremental restricted least-squares caches with O(K^2 + M*K) column
    additions, deletions, and pair flips (``gram_cache``),
  * a Metropolis pair-flip sampler at fixed inverse temperature (``sampler``)
    and a simulated-annealing driver over geometric schedules (``annealer``),
  * an orthogonal-matching-pursuit baseline (``omp``), an exhaustive exact
    oracle and a reproducible multi-sample experiment harness with CSV
    reports (``harness``), plus a CLI (``python -m sparseanneal.cli``).
"""

from .annealer import AnnealTrace, Schedule, geometric_schedule, run_sa
from .errors import (
    ConfigError,
    DegenerateColumnError,
    ExperimentFailureError,
    FormatError,
    InfeasibleSupportError,
    OracleBudgetError,
    ParameterError,
    SingularSupportError,
    SparseAnnealError,
)
from .gram_cache import DEFAULT_REFRESH_EVERY, TAU_INV, TAU_SING, SupportState
from .harness import (
    AggregateResult,
    ExperimentConfig,
    REFERENCE_DISTORTIONS,
    TimingReport,
    exhaustive_oracle,
    load_config,
    mse,
    reference_distortions,
    run_experiment,
    timing_report,
)
from .instance import (
    FORMAT_VERSION,
    GENERATOR_ID,
    ModelParams,
    ProblemInstance,
    generate,
    load,
    save,
    stream_rng,
)
from .omp import OmpResult, run_omp
from .sampler import ChainStats, McState, advance, mc_pair_flip, sweep

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AnnealTrace",
    "ChainStats",
    "ConfigError",
    "DEFAULT_REFRESH_EVERY",
    "DegenerateColumnError",
    "ExperimentConfig",
    "ExperimentFailureError",
    "FORMAT_VERSION",
    "FormatError",
    "GENERATOR_ID",
    "InfeasibleSupportError",
    "McState",
    "ModelParams",
    "OmpResult",
    "OracleBudgetError",
    "ParameterError",
    "ProblemInstance",
    "REFERENCE_DISTORTIONS",
    "Schedule",
    "SingularSupportError",
    "SparseAnnealError",
    "SupportState",
    "TAU_INV",
    "TAU_SING",
    "TimingReport",
    "advance",
    "exhaustive_oracle",
    "generate",
    "geometric_schedule",
    "load",
    "load_config",
    "mc_pair_flip",
    "mse",
    "reference_distortions",
    "run_experiment",
    "run_omp",
    "run_sa",
    "save",
    "stream_rng",
    "sweep",
    "timing_report",
]
