"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the package's incremental code paths:
energies come from SVD-based ``np.linalg.lstsq`` on the raw columns, and
stationary distributions from exhaustive enumeration, so the tests check the
fast implementations against genuinely independent computations.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from sparseanneal import ModelParams, generate


def make_instance(n=20, alpha=0.6, rho_hat=0.2, sigma_x2=1.0, sigma_xi2=0.0, seed=0):
    return generate(ModelParams(
        n=n, alpha=alpha, rho_hat=rho_hat,
        sigma_x2=sigma_x2, sigma_xi2=sigma_xi2, seed=seed,
    ))


def lstsq_energy(instance, columns) -> float:
    """Residual energy by dense least squares on the raw columns."""
    columns = list(columns)
    if not columns:
        return 0.5 * float(instance.y @ instance.y)
    sub = instance.A[:, columns]
    x, *_ = np.linalg.lstsq(sub, instance.y, rcond=None)
    r = instance.y - sub @ x
    return 0.5 * float(r @ r)


def lstsq_coeffs(instance, columns) -> np.ndarray:
    sub = instance.A[:, list(columns)]
    x, *_ = np.linalg.lstsq(sub, instance.y, rcond=None)
    return x


def enumerate_energies(instance, k) -> dict[tuple, float]:
    """Energy of every support of size k, by the lstsq oracle."""
    return {
        combo: lstsq_energy(instance, combo)
        for combo in itertools.combinations(range(instance.n), k)
    }


def boltzmann_probs(instance, k, mu) -> dict[tuple, float]:
    """Exact fixed-cardinality Gibbs weights over all supports of size k."""
    energies = enumerate_energies(instance, k)
    # subtract the minimum for overflow safety; normalization removes it
    e0 = min(energies.values())
    weights = {combo: np.exp(-mu * (e - e0)) for combo, e in energies.items()}
    z = sum(weights.values())
    return {combo: w / z for combo, w in weights.items()}


def support_code(indices) -> int:
    return sum(1 << int(i) for i in indices)


def rel_err(a, b) -> float:
    """Relative difference of two arrays in the Frobenius norm."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return diff / denom if denom > 0 else diff


def assert_states_match(state, reference, rtol, atol=1e-12):
    """Field-wise comparison of two SupportStates with the same ordering."""
    assert np.array_equal(state.ones, reference.ones)
    assert np.array_equal(np.sort(state.zeros), np.sort(reference.zeros))
    np.testing.assert_allclose(state.gram, reference.gram, rtol=rtol, atol=atol)
    np.testing.assert_allclose(state.gram_inv, reference.gram_inv, rtol=rtol, atol=atol)
    np.testing.assert_allclose(state.coeffs, reference.coeffs, rtol=rtol, atol=atol)
    np.testing.assert_allclose(state.aty, reference.aty, rtol=rtol, atol=atol)
    assert state.energy == pytest.approx(reference.energy, rel=rtol, abs=atol)
