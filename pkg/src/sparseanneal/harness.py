"""Experiment orchestration: multi-sample runs, metrics, and CSV reports.

A run is parameterized by an :class:`ExperimentConfig` (constructible from a
YAML file plus CLI overrides). Per-sample seeds are ``base_seed + index``;
each sample generates its instance from stream 0 and drives its chain from
stream 1 of the documented split, so any subset of samples reproduces
independently. Samples may run in a bounded process pool; aggregation is a
sequential reduce ordered by sample index, so the worker count never changes
the outputs. All CSV output is byte-deterministic for a fixed config and
seed; wall-clock timings are segregated into their own file.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import subprocess
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .annealer import TRACE_COLUMNS, AnnealTrace, Schedule, geometric_schedule, run_sa
from .errors import ConfigError, ExperimentFailureError, OracleBudgetError
from .gram_cache import DEFAULT_REFRESH_EVERY, SupportState
from .instance import FORMAT_VERSION, GENERATOR_ID, ModelParams, ProblemInstance, generate
from .omp import run_omp

ALGORITHMS = ("sa", "omp", "oracle")

# Analytical reference distortions, keyed by (alpha, rho, sigma_xi2, sigma_x2).
# These are published equilibrium values for the relaxed solvers, shipped as
# labeled constants for comparison; they are never computed here.
REFERENCE_TABLE_VERSION = 1
REFERENCE_DISTORTIONS = {
    (0.5, 0.2, 1.0, 0.0): {
        "l1": 0.214,
        "l1_ls": 0.0966,
        "achievable_limit": 0.00919,
    },
}


def reference_distortions(alpha: float, rho: float, sigma_xi2: float,
                          sigma_x2: float) -> dict | None:
    """Look up the analytical reference constants for a parameter point."""
    return REFERENCE_DISTORTIONS.get((alpha, rho, sigma_xi2, sigma_x2))


# ----------------------------------------------------------------------
# metrics and the exhaustive oracle
# ----------------------------------------------------------------------

def mse(instance: ProblemInstance, ones, coeffs) -> float:
    """Mean squared error between the planted and inferred representations.

    ``ones`` lists the active indices and ``coeffs`` the matching restricted
    coefficients; the inactive components count as zeros.
    """
    x = np.zeros(instance.n)
    x[np.asarray(ones, dtype=np.int64)] = np.asarray(coeffs, dtype=float)
    diff = instance.x_hat - x
    return float(diff @ diff) / instance.n


def exhaustive_oracle(instance: ProblemInstance, rho: float,
                      budget: int = 10**6):
    """Global minimizer of the distortion over all supports of size K.

    Enumerates every support of exactly K = round(N * rho) columns and
    returns ``(c_star, eps_star)``. Raises OracleBudgetError when the number
    of supports exceeds ``budget``.
    """
    n, m = instance.n, instance.m
    k = int(round(n * rho))
    if k < 1 or k > m:
        raise ConfigError(f"cardinality K={k} infeasible for N={n}, M={m}")
    total = math.comb(n, k)
    if total > budget:
        raise OracleBudgetError(
            f"C({n},{k}) = {total} supports exceeds the budget of {budget}"
        )
    at, y = instance.at, instance.y
    best_energy = np.inf
    best_combo = None
    for combo in itertools.combinations(range(n), k):
        sub = at[list(combo)]
        gram = sub @ sub.T
        rhs = sub @ y
        try:
            x = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            x, *_ = np.linalg.lstsq(sub.T, y, rcond=None)
        r = y - x @ sub
        energy = 0.5 * float(r @ r)
        if energy < best_energy:
            best_energy = energy
            best_combo = combo
    c_star = np.zeros(n, dtype=np.uint8)
    c_star[list(best_combo)] = 1
    return c_star, best_energy / m


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Full parameterization of a multi-sample experiment."""

    n: int = 100
    alpha: float = 0.5
    rho_hat: float = 0.2
    sigma_x2: float = 1.0
    sigma_xi2: float = 0.0
    rho: float = 0.2
    mu0: float = 1e-8
    r: float = 1.1
    tau: int = 5
    n_mu: int = 100
    stages: tuple | None = None        # explicit ((mu, tau), ...) overrides geometric
    n_samples: int = 1
    base_seed: int = 0
    algorithms: tuple = ("sa",)
    output_dir: str | None = None
    workers: int = 1
    oracle_budget: int = 10**6
    refresh_every: int = DEFAULT_REFRESH_EVERY

    def validate(self) -> None:
        try:
            self.model_params(self.base_seed)
        except Exception as exc:
            raise ConfigError(f"invalid model parameters: {exc}") from exc
        if not 0.0 < self.rho < self.alpha:
            raise ConfigError(f"rho must lie in (0, alpha={self.alpha}), got {self.rho}")
        k = int(round(self.n * self.rho))
        m = int(round(self.alpha * self.n))
        if k < 1 or k > m or k > self.n - 1:
            raise ConfigError(f"cardinality K={k} infeasible for N={self.n}, M={m}")
        if self.sigma_x2 > 0.0 and not self.rho_hat < self.rho:
            warnings.warn(
                "outside the planted-recovery regime (expects rho_hat < rho < alpha)",
                stacklevel=2,
            )
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}; pick from {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.schedule()  # raises ParameterError on bad schedule settings

    def model_params(self, seed: int) -> ModelParams:
        return ModelParams(
            n=self.n, alpha=self.alpha, rho_hat=self.rho_hat,
            sigma_x2=self.sigma_x2, sigma_xi2=self.sigma_xi2, seed=seed,
        )

    def schedule(self) -> Schedule:
        if self.stages is not None:
            mus = np.array([mu for mu, _ in self.stages], dtype=float)
            taus = np.array([t for _, t in self.stages], dtype=np.int64)
            return Schedule(mus, taus)
        return geometric_schedule(self.mu0, self.r, self.tau, self.n_mu)


_CONFIG_KEYS = {
    "model": ("n", "alpha", "rho_hat", "sigma_x2", "sigma_xi2"),
    "schedule": ("mu0", "r", "tau", "n_mu", "stages"),
    "top": ("rho", "samples", "seed", "algorithms", "output_dir", "workers",
            "oracle_budget", "refresh_every"),
}
_TOP_RENAMES = {"samples": "n_samples", "seed": "base_seed"}


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read a YAML config file and apply keyword overrides on top."""
    import yaml

    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a key/value mapping")
    fields: dict = {}
    for section in ("model", "schedule"):
        block = raw.pop(section, {}) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"{path}: '{section}' must be a mapping")
        bad = set(block) - set(_CONFIG_KEYS[section])
        if bad:
            raise ConfigError(f"{path}: unknown keys {sorted(bad)} in '{section}'")
        fields.update(block)
    bad = set(raw) - set(_CONFIG_KEYS["top"])
    if bad:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(bad)}")
    for key, value in raw.items():
        fields[_TOP_RENAMES.get(key, key)] = value
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if "algorithms" in fields:
        fields["algorithms"] = tuple(fields["algorithms"])
    if fields.get("stages") is not None:
        fields["stages"] = tuple((float(mu), int(t)) for mu, t in fields["stages"])
    try:
        config = ExperimentConfig(**fields)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config


# ----------------------------------------------------------------------
# per-sample work
# ----------------------------------------------------------------------

@dataclass
class SampleOutcome:
    index: int
    seed: int
    error: str | None = None
    planted_count: int | None = None
    eps: dict = field(default_factory=dict)       # algo -> final distortion
    mse: dict = field(default_factory=dict)       # algo -> final MSE (or None)
    trace: AnnealTrace | None = None
    timings: dict = field(default_factory=dict)   # algo -> seconds


def _run_sample(config: ExperimentConfig, index: int) -> SampleOutcome:
    seed = config.base_seed + index
    outcome = SampleOutcome(index=index, seed=seed)
    try:
        instance = generate(config.model_params(seed))
        outcome.planted_count = instance.planted_count
        planted = instance.has_planted_solution
        for algo in config.algorithms:
            tic = time.perf_counter()
            if algo == "sa":
                _, trace = run_sa(
                    instance, config.rho, config.schedule(), seed,
                    refresh_every=config.refresh_every,
                )
                outcome.trace = trace
                outcome.eps[algo] = trace.final_eps
                outcome.mse[algo] = trace.final_mse
            elif algo == "omp":
                result = run_omp(instance, config.rho)
                outcome.eps[algo] = result.eps
                outcome.mse[algo] = (
                    mse(instance, result.ones, result.coeffs) if planted else None
                )
            elif algo == "oracle":
                c_star, eps_star = exhaustive_oracle(
                    instance, config.rho, config.oracle_budget
                )
                outcome.eps[algo] = eps_star
                if planted:
                    state = SupportState.from_support(instance, c_star)
                    outcome.mse[algo] = mse(instance, state.ones, state.coeffs)
                else:
                    outcome.mse[algo] = None
            outcome.timings[algo] = time.perf_counter() - tic
    except Exception:
        outcome.error = traceback.format_exc()
    return outcome


# ----------------------------------------------------------------------
# aggregation
# ----------------------------------------------------------------------

def _sample_error(values: np.ndarray) -> float | None:
    """Error bar: standard deviation over samples divided by sqrt(n - 1)."""
    if values.size < 2:
        return None
    return float(values.std() / math.sqrt(values.size - 1))


@dataclass
class AggregateResult:
    config: ExperimentConfig
    per_sample: list
    failures: list
    summary: dict                     # algo -> quantity -> (mean, err)
    stage_trace: dict | None          # stage-level aggregates of the SA traces
    output_dir: Path | None

    @property
    def n_samples(self) -> int:
        return len(self.per_sample)

    def mean(self, algo: str, quantity: str = "eps") -> float:
        return self.summary[algo][quantity][0]

    def err(self, algo: str, quantity: str = "eps") -> float | None:
        return self.summary[algo][quantity][1]


def _aggregate_stage_trace(traces: list) -> dict | None:
    if not traces:
        return None
    eps = np.stack([t.eps_mean for t in traces])
    out = {
        "mus": traces[0].mus,
        "temperatures": traces[0].temperatures,
        "eps_mean": eps.mean(axis=0),
        "eps_err": np.array([_sample_error(eps[:, a]) or np.nan
                             for a in range(eps.shape[1])]),
    }
    if all(t.mse_mean is not None for t in traces):
        ms = np.stack([t.mse_mean for t in traces])
        out["mse_mean"] = ms.mean(axis=0)
        out["mse_err"] = np.array([_sample_error(ms[:, a]) or np.nan
                                   for a in range(ms.shape[1])])
    return out


def run_experiment(config: ExperimentConfig) -> AggregateResult:
    """Run every configured algorithm on every sample and aggregate.

    Deterministic given the config and base seed: per-sample work is a pure
    function of ``(config, index)`` and the reduce is ordered by index, so
    the worker count only affects wall time. Aborts with
    ExperimentFailureError when more than 10% of samples fail.
    """
    config.validate()
    indices = range(config.n_samples)
    work = partial(_run_sample, config)
    if config.workers == 1 or config.n_samples == 1:
        outcomes = [work(i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, indices))
    outcomes.sort(key=lambda o: o.index)

    failures = [(o.index, o.error) for o in outcomes if o.error is not None]
    ok = [o for o in outcomes if o.error is None]
    for index, err in failures:
        warnings.warn(f"sample {index} failed and is excluded:\n{err}", stacklevel=2)
    if len(failures) > 0.1 * config.n_samples:
        raise ExperimentFailureError(
            f"{len(failures)} of {config.n_samples} samples failed (> 10%)"
        )

    summary: dict = {}
    for algo in config.algorithms:
        eps_vals = np.array([o.eps[algo] for o in ok])
        entry = {"eps": (float(eps_vals.mean()), _sample_error(eps_vals))}
        mse_vals = [o.mse[algo] for o in ok]
        if all(v is not None for v in mse_vals):
            arr = np.array(mse_vals, dtype=float)
            entry["mse"] = (float(arr.mean()), _sample_error(arr))
        summary[algo] = entry

    stage_trace = _aggregate_stage_trace([o.trace for o in ok if o.trace is not None])
    out_dir = Path(config.output_dir) if config.output_dir else None
    result = AggregateResult(
        config=config, per_sample=ok, failures=failures,
        summary=summary, stage_trace=stage_trace, output_dir=out_dir,
    )
    if out_dir is not None:
        _write_outputs(result)
    return result


# ----------------------------------------------------------------------
# deterministic CSV / metadata emission
# ----------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _build_id() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=10,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return "unreleased"


def _write_outputs(result: AggregateResult) -> None:
    out = result.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config = result.config

    with (out / "per_sample.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "seed", "algorithm", "eps", "mse"])
        for o in result.per_sample:
            for algo in config.algorithms:
                writer.writerow([o.index, o.seed, algo, _fmt(o.eps[algo]), _fmt(o.mse[algo])])

    with (out / "aggregate.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "algorithm", "mean", "err", "n_samples"])
        for algo in config.algorithms:
            for quantity in ("eps", "mse"):
                if quantity not in result.summary[algo]:
                    continue
                mean, err = result.summary[algo][quantity]
                writer.writerow([quantity, algo, _fmt(mean), _fmt(err), result.n_samples])

    if result.stage_trace is not None:
        st = result.stage_trace
        with (out / "aggregate_trace.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "mu", "T", "eps_mean", "eps_err", "mse_mean", "mse_err"])
            has_mse = "mse_mean" in st
            for a in range(st["mus"].size):
                row = [a + 1, _fmt(st["mus"][a]), _fmt(st["temperatures"][a]),
                       _fmt(st["eps_mean"][a]), _fmt(st["eps_err"][a])]
                if has_mse:
                    row += [_fmt(st["mse_mean"][a]), _fmt(st["mse_err"][a])]
                else:
                    row += ["", ""]
                writer.writerow(row)

    if "sa" in config.algorithms:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        for o in result.per_sample:
            if o.trace is not None:
                o.trace.to_csv(trace_dir / f"trace_sa_sample_{o.index:04d}.csv")

    # wall-clock data is machine-dependent and lives in its own file
    with (out / "timings.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "algorithm", "seconds"])
        for o in result.per_sample:
            for algo in config.algorithms:
                writer.writerow([o.index, algo, f"{o.timings[algo]:.6f}"])

    references = reference_distortions(
        config.alpha, config.rho, config.sigma_xi2, config.sigma_x2
    )
    metadata = {
        "config": asdict(config),
        "generator": GENERATOR_ID,
        "instance_format_version": FORMAT_VERSION,
        "trace_columns": list(TRACE_COLUMNS),
        "reference_table_version": REFERENCE_TABLE_VERSION,
        "reference_distortions": references,
        "reference_note": "analytical reference, not computed" if references else None,
        "build": _build_id(),
        "failures": [{"sample": idx, "traceback": err} for idx, err in result.failures],
    }
    (out / "metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ----------------------------------------------------------------------
# timing / scaling report
# ----------------------------------------------------------------------

@dataclass
class TimingReport:
    n_values: list
    seconds: list
    slope: float

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "seconds"])
            for n, s in zip(self.n_values, self.seconds):
                writer.writerow([n, f"{s:.6f}"])
            writer.writerow(["slope", f"{self.slope:.4f}"])
        return path


def timing_report(config: ExperimentConfig, n_values, repeats: int = 1) -> TimingReport:
    """Wall-clock of one SA run per system size, with the log-log slope.

    Needs at least three sizes. The kernel is warmed up on a small throwaway
    run first so JIT compilation never lands in the measurements; each size
    reports the best of ``repeats`` runs.
    """
    n_values = sorted(int(v) for v in n_values)
    if len(n_values) < 3:
        raise ConfigError("timing report needs at least three system sizes")
    warm = generate(ModelParams(
        n=40, alpha=config.alpha, rho_hat=config.rho_hat,
        sigma_x2=config.sigma_x2, sigma_xi2=config.sigma_xi2,
        seed=config.base_seed,
    ))
    run_sa(warm, config.rho, geometric_schedule(config.mu0, config.r, 1, 5),
           config.base_seed)
    seconds = []
    for n in n_values:
        params = ModelParams(
            n=n, alpha=config.alpha, rho_hat=config.rho_hat,
            sigma_x2=config.sigma_x2, sigma_xi2=config.sigma_xi2,
            seed=config.base_seed,
        )
        instance = generate(params)
        schedule = config.schedule()
        best = np.inf
        for _ in range(max(1, repeats)):
            tic = time.perf_counter()
            run_sa(instance, config.rho, schedule, config.base_seed,
                   record_sweeps=False, refresh_every=config.refresh_every)
            best = min(best, time.perf_counter() - tic)
        seconds.append(best)
    slope = float(np.polyfit(np.log(n_values), np.log(seconds), 1)[0])
    return TimingReport(n_values=list(n_values), seconds=seconds, slope=slope)
