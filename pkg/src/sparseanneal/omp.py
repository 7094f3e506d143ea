"""Orthogonal matching pursuit baseline with a fixed column budget.

Greedily adds the column with the largest norm-scaled absolute correlation
|a_k . r| / ||a_k|| with the current residual (for a single column this is
exactly the energy-optimal choice; ties break toward the lowest index),
refits the restricted least squares through the incremental cache, and stops
after exactly K = round(N * rho) columns, the same cardinality budget the
annealer gets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateColumnError
from .gram_cache import SupportState
from .instance import ProblemInstance


@dataclass
class OmpResult:
    c: np.ndarray             # binary support, shape (N,)
    ones: np.ndarray          # selected indices in selection order
    coeffs: np.ndarray        # least-squares coefficients, aligned with ones
    eps: float                # final intensive distortion E/M
    eps_history: np.ndarray   # distortion after each added column
    n_degenerate_skips: int   # columns skipped as numerically dependent


def run_omp(instance: ProblemInstance, rho: float) -> OmpResult:
    """Greedy K-column pursuit; pure function of its inputs."""
    n, m = instance.n, instance.m
    k = int(round(n * rho))
    if not 0.0 < rho < instance.params.alpha:
        raise ConfigError(f"rho must lie in (0, alpha={instance.params.alpha}), got {rho}")
    if k < 1 or k > m:
        raise ConfigError(f"cardinality K={k} infeasible for N={n}, M={m}")

    state = SupportState.from_support(instance, np.zeros(n, dtype=np.uint8))
    residual = instance.y.copy()
    norms = np.sqrt(instance.column_sq_norms)
    eps_history = np.empty(k)
    skips = 0
    for step in range(k):
        corr = (instance.at @ residual) / norms
        corr[state.ones] = 0.0  # already-active columns are orthogonal to r
        order = np.argsort(-np.abs(corr), kind="stable")
        for candidate in order:
            if state.c[candidate]:
                continue
            try:
                state.add_column(int(candidate))
            except DegenerateColumnError:
                skips += 1
                continue
            break
        else:
            raise DegenerateColumnError(
                f"no feasible column left after {step} selections"
            )
        residual = state.residual()
        eps_history[step] = state.distortion
    return OmpResult(
        c=state.c.copy(),
        ones=state.ones.copy(),
        coeffs=state.coeffs.copy(),
        eps=state.distortion,
        eps_history=eps_history,
        n_degenerate_skips=skips,
    )
