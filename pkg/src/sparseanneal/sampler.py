"""Metropolis pair-flip updates at fixed inverse temperature.

A move exchanges one active and one inactive column (preserving the support
cardinality), is proposed uniformly over ONES x ZEROS, and is accepted with
probability min(1, exp(-mu * dE)). Proposals whose incoming column is
numerically dependent count as rejections, which keeps the chain on the
feasible set.

``mc_pair_flip`` performs one update through the numpy cache operations and
draws its three random numbers (active position, inactive position,
acceptance uniform) as scalars. ``sweep``/``advance`` drive many updates at
once: they pre-draw the same three numbers per move as blocks and run the
compiled kernel, so a sweep is deterministic given the generator state but
consumes the stream in a different order than repeated ``mc_pair_flip``
calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateColumnError
from .gram_cache import TAU_SING, SupportState


@dataclass
class ChainStats:
    """Cumulative proposal bookkeeping for one chain."""

    proposals: int = 0
    acceptances: int = 0
    degeneracy_rejections: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.acceptances / self.proposals if self.proposals else 0.0


@dataclass
class McState:
    """One Markov chain: a support cache, an inverse temperature, and a RNG."""

    support: SupportState
    mu: float
    rng: np.random.Generator
    stats: ChainStats = field(default_factory=ChainStats)

    def __post_init__(self) -> None:
        if self.mu < 0.0:
            raise ValueError(f"inverse temperature must be >= 0, got {self.mu}")


def _check_flippable(state: McState) -> None:
    k, n = state.support.k, state.support.n
    if k < 1 or k > n - 1:
        raise ValueError(
            f"pair flips need both active and inactive columns (K={k}, N={n})"
        )


def mc_pair_flip(state: McState) -> McState:
    """One Metropolis pair-flip update, mutating and returning ``state``."""
    _check_flippable(state)
    support = state.support
    rng = state.rng
    i = int(support.ones[rng.integers(0, support.k)])
    j = int(support.zeros[rng.integers(0, support.n - support.k)])
    u = rng.random()
    state.stats.proposals += 1
    try:
        e_new = support.probe_pair_flip(i, j)
    except DegenerateColumnError:
        state.stats.degeneracy_rejections += 1
        return state
    d_e = e_new - support.energy
    if d_e <= 0.0 or u < math.exp(-state.mu * d_e):
        support.commit_pair_flip(i, j)
        state.stats.acceptances += 1
    return state


def advance(state: McState, n_moves: int, record_supports: bool = False):
    """Run ``n_moves`` kernel-driven updates; optionally record supports.

    When ``record_supports`` is true (requires N <= 63) the visited support
    after every proposal is returned as an int64 bitmask array of length
    ``n_moves``; otherwise returns None.
    """
    _check_flippable(state)
    support = state.support
    if record_supports and support.n > 63:
        raise ValueError("support recording uses 64-bit masks and needs N <= 63")
    rng = state.rng
    k, n = support.k, support.n
    i_pos = rng.integers(0, k, size=n_moves)
    j_pos = rng.integers(0, n - k, size=n_moves)
    unif = rng.random(n_moves)
    codes = np.empty(n_moves if record_supports else 1, dtype=np.int64)
    inst = support.instance

    support._pending = None
    start = 0
    while start < n_moves:
        if support.refresh_every:
            allowance = support.refresh_every - support.commits_since_refresh
        else:
            allowance = 0
        energy, accepts, degens, commits, nxt, reason = _kernels.run_moves(
            inst.at, inst.y, inst.column_sq_norms, inst.aty,
            support.c, support.ones, support.zeros, support.at_sel,
            support.gram, support.gram_inv, support.aty, support.coeffs,
            support.energy, state.mu, i_pos, j_pos, unif,
            start, allowance, TAU_SING,
            record_supports, codes,
        )
        support.energy = float(energy)
        support.commits_since_refresh += int(commits)
        state.stats.proposals += nxt - start
        state.stats.acceptances += int(accepts)
        state.stats.degeneracy_rejections += int(degens)
        start = nxt
        if reason == _kernels.DONE:
            break
        support.refresh()  # PIVOT_DEGENERATE or REFRESH_DUE
    return codes if record_supports else None


def sweep(state: McState) -> float:
    """N pair-flip updates; returns the post-sweep intensive distortion."""
    advance(state, state.support.n)
    return state.support.distortion
