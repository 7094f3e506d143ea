"""Simulated-annealing driver over a stage schedule.

A schedule is an ordered list of (inverse temperature, sweep count) stages.
The chain starts from a uniformly random support of the requested
cardinality, runs ``tau_a`` sweeps at each stage without ever resetting, and
records stage-averaged distortion and (when a planted solution exists)
mean-squared error.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError
from .gram_cache import DEFAULT_REFRESH_EVERY, SupportState
from .instance import STREAM_CHAIN, ProblemInstance, stream_rng
from .sampler import ChainStats, McState, sweep

TRACE_COLUMNS = ("stage", "mu", "T", "eps_mean", "eps_std",
                 "mse_mean", "mse_std", "accept_rate")


@dataclass(frozen=True)
class Schedule:
    """Ordered inverse-temperature stages (mu strictly increasing)."""

    mus: np.ndarray
    taus: np.ndarray
    geometric_params: dict | None = None   # (mu0, r, tau, n_stages) when geometric

    def __post_init__(self) -> None:
        mus = np.asarray(self.mus, dtype=float)
        taus = np.asarray(self.taus, dtype=np.int64)
        if mus.ndim != 1 or mus.size == 0 or mus.shape != taus.shape:
            raise ParameterError("schedule needs matching 1-d mu and tau arrays")
        if np.any(mus < 0.0):
            raise ParameterError("inverse temperatures must be >= 0")
        if np.any(np.diff(mus) <= 0.0):
            raise ParameterError("inverse temperatures must be strictly increasing")
        if np.any(taus < 1):
            raise ParameterError("every stage needs at least one sweep")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "taus", taus)

    @property
    def n_stages(self) -> int:
        return self.mus.size

    @property
    def total_sweeps(self) -> int:
        return int(self.taus.sum())


def geometric_schedule(mu0: float, r: float, tau: int, n_stages: int) -> Schedule:
    """Stages mu_a = mu0 + r**(a-1) - 1 with a constant sweep count tau."""
    if mu0 < 0.0:
        raise ParameterError(f"mu0 must be >= 0, got {mu0}")
    if r <= 1.0:
        raise ParameterError(f"growth factor must exceed 1 (temperature must decrease), got r={r}")
    if tau < 1 or n_stages < 1:
        raise ParameterError("tau and the stage count must be positive integers")
    a = np.arange(1, n_stages + 1)
    mus = mu0 + (np.power(float(r), a - 1) - 1.0)   # stage 1 is exactly mu0
    taus = np.full(n_stages, int(tau), dtype=np.int64)
    return Schedule(mus, taus, {"mu0": mu0, "r": r, "tau": tau, "n_stages": n_stages})


@dataclass
class AnnealTrace:
    """Per-stage averages plus optional per-sweep records of one SA run.

    ``mse_*`` entries are None when the instance has no planted solution
    (sigma_x2 = 0); the CSV export leaves those fields empty.
    """

    mus: np.ndarray
    temperatures: np.ndarray
    eps_mean: np.ndarray
    eps_std: np.ndarray
    mse_mean: np.ndarray | None
    mse_std: np.ndarray | None
    accept_rate: np.ndarray
    degeneracy_count: np.ndarray
    sweep_eps: list[np.ndarray] | None
    sweep_mse: list[np.ndarray] | None
    initial_eps: float = np.nan   # distortion of the random starting support

    @property
    def n_stages(self) -> int:
        return self.mus.size

    @property
    def final_eps(self) -> float:
        """Distortion of the configuration after the very last sweep."""
        if self.sweep_eps is not None:
            return float(self.sweep_eps[-1][-1])
        return float(self.eps_mean[-1])

    @property
    def final_mse(self) -> float | None:
        if self.mse_mean is None:
            return None
        if self.sweep_mse is not None:
            return float(self.sweep_mse[-1][-1])
        return float(self.mse_mean[-1])

    def to_csv(self, path: str | Path) -> Path:
        """Write the stage table with the documented header line."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for a in range(self.n_stages):
                row = [a + 1, repr(float(self.mus[a])), repr(float(self.temperatures[a])),
                       repr(float(self.eps_mean[a])), repr(float(self.eps_std[a]))]
                if self.mse_mean is None:
                    row += ["", ""]
                else:
                    row += [repr(float(self.mse_mean[a])), repr(float(self.mse_std[a]))]
                row.append(repr(float(self.accept_rate[a])))
                writer.writerow(row)
        return path


def _sweep_mse(instance: ProblemInstance, support: SupportState) -> float:
    diff = instance.x_hat - support.dense_solution()
    return float(diff @ diff) / instance.n


def run_sa(instance: ProblemInstance, rho: float, schedule: Schedule, seed: int,
           record_sweeps: bool = True,
           refresh_every: int | None = DEFAULT_REFRESH_EVERY):
    """Anneal one instance; returns (final support, trace).

    The chain state carries over across stage boundaries. Deterministic
    given ``seed`` (chain stream of the documented split).
    """
    n, m = instance.n, instance.m
    k = int(round(n * rho))
    if not 0.0 < rho < instance.params.alpha:
        raise ConfigError(f"rho must lie in (0, alpha={instance.params.alpha}), got {rho}")
    if k < 1 or k > m or k > n - 1:
        raise ConfigError(f"cardinality K={k} infeasible for N={n}, M={m}")
    if abs(k - n * rho) > 1e-6:
        warnings.warn(
            f"N*rho = {n * rho} is not an integer; using K={k} (rho={k / n})",
            stacklevel=2,
        )
    rng = stream_rng(seed, STREAM_CHAIN)
    c0 = np.zeros(n, dtype=np.uint8)
    c0[rng.choice(n, size=k, replace=False)] = 1
    support = SupportState.from_support(instance, c0, refresh_every=refresh_every)
    chain = McState(support=support, mu=0.0, rng=rng)
    initial_eps = support.distortion

    with_mse = instance.has_planted_solution
    n_stages = schedule.n_stages
    eps_mean = np.empty(n_stages)
    eps_std = np.empty(n_stages)
    mse_mean = np.empty(n_stages) if with_mse else None
    mse_std = np.empty(n_stages) if with_mse else None
    accept_rate = np.empty(n_stages)
    degeneracy = np.zeros(n_stages, dtype=np.int64)
    sweep_eps = [] if record_sweeps else None
    sweep_mse = [] if (record_sweeps and with_mse) else None

    for a in range(n_stages):
        chain.mu = float(schedule.mus[a])
        tau_a = int(schedule.taus[a])
        eps_t = np.empty(tau_a)
        mse_t = np.empty(tau_a) if with_mse else None
        before = ChainStats(**vars(chain.stats))
        for t in range(tau_a):
            eps_t[t] = sweep(chain)
            if with_mse:
                mse_t[t] = _sweep_mse(instance, support)
        eps_mean[a] = eps_t.mean()
        eps_std[a] = eps_t.std()
        if with_mse:
            mse_mean[a] = mse_t.mean()
            mse_std[a] = mse_t.std()
        proposals = chain.stats.proposals - before.proposals
        accept_rate[a] = (chain.stats.acceptances - before.acceptances) / proposals
        degeneracy[a] = chain.stats.degeneracy_rejections - before.degeneracy_rejections
        if record_sweeps:
            sweep_eps.append(eps_t)
            if with_mse:
                sweep_mse.append(mse_t)

    with np.errstate(divide="ignore"):
        temperatures = np.where(schedule.mus > 0.0, 1.0 / schedule.mus, np.inf)
    trace = AnnealTrace(
        mus=schedule.mus.copy(),
        temperatures=temperatures,
        eps_mean=eps_mean, eps_std=eps_std,
        mse_mean=mse_mean, mse_std=mse_std,
        accept_rate=accept_rate, degeneracy_count=degeneracy,
        sweep_eps=sweep_eps, sweep_mse=sweep_mse,
        initial_eps=initial_eps,
    )
    return support.c.copy(), trace
