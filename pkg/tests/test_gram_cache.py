import numpy as np
import pytest

from sparseanneal import (
    DegenerateColumnError,
    InfeasibleSupportError,
    ModelParams,
    ProblemInstance,
    SingularSupportError,
    SupportState,
    TAU_INV,
)
from conftest import assert_states_match, lstsq_energy, make_instance, rel_err


def random_support(n, k, seed):
    rng = np.random.default_rng(seed)
    c = np.zeros(n, dtype=np.uint8)
    c[rng.choice(n, size=k, replace=False)] = 1
    return c


def duplicate_column_instance(seed=0, n=8, alpha=0.75):
    """Instance whose column 3 is an exact copy of column 0."""
    base = make_instance(n=n, alpha=alpha, seed=seed)
    A = base.A.copy()
    A[:, 3] = A[:, 0]
    params = ModelParams(n=n, alpha=alpha, rho_hat=0.2, sigma_x2=1.0,
                         sigma_xi2=0.0, seed=seed)
    y = A @ base.x_hat
    return ProblemInstance(A=A, y=y, x_hat=base.x_hat, params=params,
                           planted_count=base.planted_count)


# ----------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------

def test_init_energy_matches_lstsq_oracle():
    inst = make_instance(n=20, alpha=0.6, sigma_xi2=0.2, seed=11)  # 12 x 20
    for seed in range(5):
        c = random_support(20, 7, seed)
        state = SupportState.from_support(inst, c)
        oracle = lstsq_energy(inst, np.flatnonzero(c))
        assert state.energy == pytest.approx(oracle, rel=1e-10, abs=1e-12)
        assert state.energy >= 0.0


def test_planted_support_reproduces_signal_exactly():
    inst = make_instance(n=40, alpha=0.6, rho_hat=0.15, sigma_xi2=0.0, seed=8)
    c = (inst.x_hat != 0).astype(np.uint8)
    state = SupportState.from_support(inst, c)
    assert state.energy < 1e-20
    np.testing.assert_allclose(state.coeffs, inst.x_hat[state.ones], rtol=1e-8)


def test_empty_support():
    inst = make_instance(seed=3)
    state = SupportState.from_support(inst, np.zeros(inst.n, dtype=np.uint8))
    assert state.k == 0
    assert state.energy == pytest.approx(0.5 * float(inst.y @ inst.y))
    assert state.coeffs.shape == (0,)
    assert state.gram.shape == (0, 0)


def test_infeasible_support_rejected():
    inst = make_instance(n=20, alpha=0.3, seed=1)  # M = 6
    c = np.zeros(20, dtype=np.uint8)
    c[:7] = 1
    with pytest.raises(InfeasibleSupportError):
        SupportState.from_support(inst, c)


def test_singular_support_rejected():
    inst = duplicate_column_instance()
    with pytest.raises(SingularSupportError):
        SupportState.from_indices(inst, [0, 3])


def test_cached_fields_invariants():
    inst = make_instance(n=24, alpha=0.5, sigma_xi2=0.1, seed=17)
    state = SupportState.from_support(inst, random_support(24, 8, 5))
    assert state.inverse_error() < TAU_INV
    np.testing.assert_allclose(state.coeffs, state.gram_inv @ state.aty, rtol=1e-10)
    r = state.residual()
    assert state.energy == pytest.approx(0.5 * float(r @ r), rel=1e-12)


# ----------------------------------------------------------------------
# delete / add
# ----------------------------------------------------------------------

def test_delete_matches_fresh_factorization():
    inst = make_instance(n=30, alpha=0.6, sigma_xi2=0.3, seed=23)
    c = random_support(30, 10, 2)
    for i in np.flatnonzero(c):
        state = SupportState.from_support(inst, c.copy())
        state.delete_column(int(i))
        fresh = SupportState.from_indices(inst, state.ones)
        assert_states_match(state, fresh, rtol=1e-10)


def test_delete_then_readd_last_column_roundtrips():
    inst = make_instance(n=25, alpha=0.6, seed=31)
    state = SupportState.from_support(inst, random_support(25, 9, 7))
    original_inv = state.gram_inv.copy()
    last = int(state.ones[-1])
    state.delete_column(last)
    state.add_column(last)
    assert rel_err(state.gram_inv, original_inv) < 1e-10


def test_delete_only_column_gives_empty_state():
    inst = make_instance(seed=3)
    state = SupportState.from_indices(inst, [4])
    state.delete_column(4)
    assert state.k == 0
    assert state.energy == pytest.approx(0.5 * float(inst.y @ inst.y))


def test_add_matches_fresh_factorization():
    inst = make_instance(n=30, alpha=0.6, sigma_xi2=0.3, seed=29)
    c = random_support(30, 8, 3)
    state0 = SupportState.from_support(inst, c)
    for j in list(state0.zeros[:6]):
        state = SupportState.from_support(inst, c.copy())
        state.add_column(int(j))
        fresh = SupportState.from_indices(inst, state.ones)
        assert_states_match(state, fresh, rtol=1e-10)


def test_add_to_empty_support_scalar_least_squares():
    inst = make_instance(seed=19)
    state = SupportState.from_support(inst, np.zeros(inst.n, dtype=np.uint8))
    j = 5
    state.add_column(j)
    a_j = inst.A[:, j]
    assert state.gram[0, 0] == pytest.approx(float(a_j @ a_j), rel=1e-12)
    assert state.coeffs[0] == pytest.approx(float(a_j @ inst.y) / float(a_j @ a_j),
                                            rel=1e-12)


def test_add_spanned_column_signals_degeneracy():
    inst = duplicate_column_instance()
    state = SupportState.from_indices(inst, [0, 1])
    before_energy = state.energy
    before_ones = state.ones.copy()
    with pytest.raises(DegenerateColumnError):
        state.add_column(3)  # exact duplicate of column 0
    assert state.energy == before_energy
    np.testing.assert_array_equal(state.ones, before_ones)


def test_add_never_increases_energy():
    inst = make_instance(n=30, alpha=0.6, sigma_xi2=0.5, seed=37)
    state = SupportState.from_support(inst, np.zeros(30, dtype=np.uint8))
    rng = np.random.default_rng(0)
    previous = state.energy
    for j in rng.choice(30, size=12, replace=False):
        state.add_column(int(j))
        assert state.energy <= previous + 1e-12
        previous = state.energy


def test_energy_invariant_under_ordering():
    inst = make_instance(n=30, alpha=0.6, sigma_xi2=0.3, seed=41)
    idx = [4, 9, 17, 2, 26]
    e0 = SupportState.from_indices(inst, idx).energy
    rng = np.random.default_rng(1)
    for _ in range(4):
        shuffled = list(rng.permutation(idx))
        e1 = SupportState.from_indices(inst, shuffled).energy
        assert e1 == pytest.approx(e0, rel=1e-10)


# ----------------------------------------------------------------------
# pair flips
# ----------------------------------------------------------------------

def test_probe_matches_fresh_energy():
    inst = make_instance(n=22, alpha=0.6, sigma_xi2=0.2, seed=43)
    state = SupportState.from_support(inst, random_support(22, 7, 11))
    rng = np.random.default_rng(2)
    for _ in range(10):
        i = int(rng.choice(state.ones))
        j = int(rng.choice(state.zeros))
        probed = state.probe_pair_flip(i, j)
        flipped = state.c.copy()
        flipped[i], flipped[j] = 0, 1
        fresh = SupportState.from_support(inst, flipped)
        assert probed == pytest.approx(fresh.energy, rel=1e-10, abs=1e-12)


def test_probe_never_mutates_state():
    inst = make_instance(n=22, alpha=0.6, seed=47)
    state = SupportState.from_support(inst, random_support(22, 6, 13))
    snapshot = state.copy()
    state.probe_pair_flip(int(state.ones[0]), int(state.zeros[0]))
    assert state.energy == snapshot.energy
    np.testing.assert_array_equal(state.c, snapshot.c)
    np.testing.assert_array_equal(state.ones, snapshot.ones)
    np.testing.assert_array_equal(state.gram, snapshot.gram)
    np.testing.assert_array_equal(state.gram_inv, snapshot.gram_inv)
    np.testing.assert_array_equal(state.coeffs, snapshot.coeffs)


def test_commit_energy_equals_probe_exactly():
    inst = make_instance(n=22, alpha=0.6, sigma_xi2=0.1, seed=53)
    state = SupportState.from_support(inst, random_support(22, 7, 17))
    i, j = int(state.ones[2]), int(state.zeros[4])
    probed = state.probe_pair_flip(i, j)
    state.commit_pair_flip(i, j)
    assert state.energy == probed  # bitwise: commit reuses the probe caches


def test_commit_reverse_pair_is_involution():
    inst = make_instance(n=22, alpha=0.6, sigma_xi2=0.1, seed=59)
    state = SupportState.from_support(inst, random_support(22, 7, 19))
    reference = state.copy()
    i, j = int(state.ones[3]), int(state.zeros[5])
    state.commit_pair_flip(i, j)
    state.commit_pair_flip(j, i)
    assert state.energy == pytest.approx(reference.energy, rel=1e-10)
    np.testing.assert_array_equal(np.sort(state.ones), np.sort(reference.ones))
    fresh = SupportState.from_indices(inst, state.ones)
    assert_states_match(state, fresh, rtol=1e-10)


def test_probe_then_reverse_probe_recovers_energy():
    inst = make_instance(n=22, alpha=0.6, seed=61)
    state = SupportState.from_support(inst, random_support(22, 7, 23))
    original = state.energy
    i, j = int(state.ones[0]), int(state.zeros[0])
    state.probe_pair_flip(i, j)
    state.commit_pair_flip(i, j)
    back = state.probe_pair_flip(j, i)
    assert back == pytest.approx(original, rel=1e-10, abs=1e-14)


def test_commit_matches_fresh_without_probe():
    inst = make_instance(n=22, alpha=0.6, seed=67)
    state = SupportState.from_support(inst, random_support(22, 7, 29))
    i, j = int(state.ones[1]), int(state.zeros[2])
    state.commit_pair_flip(i, j)
    fresh = SupportState.from_indices(inst, state.ones)
    assert_states_match(state, fresh, rtol=1e-10)


def test_pair_flip_to_spanned_column_degenerate():
    inst = duplicate_column_instance()
    state = SupportState.from_indices(inst, [0, 1])
    with pytest.raises(DegenerateColumnError):
        state.probe_pair_flip(1, 3)  # keeps column 0, adds its duplicate


def test_thousand_commits_stay_on_fresh_factorization():
    # refresh disabled so the incremental path itself is exercised
    inst = make_instance(n=40, alpha=0.5, sigma_xi2=0.2, seed=71)
    state = SupportState.from_support(inst, random_support(40, 8, 31),
                                      refresh_every=None)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        i = int(rng.choice(state.ones))
        j = int(rng.choice(state.zeros))
        state.commit_pair_flip(i, j)
    fresh = SupportState.from_indices(inst, state.ones)
    assert_states_match(state, fresh, rtol=1e-8, atol=1e-10)
    assert state.inverse_error() < TAU_INV


def test_refresh_counter_and_policy():
    inst = make_instance(n=20, alpha=0.6, seed=73)
    state = SupportState.from_support(inst, random_support(20, 6, 37),
                                      refresh_every=10)
    rng = np.random.default_rng(7)
    for _ in range(10):
        i = int(rng.choice(state.ones))
        j = int(rng.choice(state.zeros))
        state.commit_pair_flip(i, j)
    assert state.commits_since_refresh == 0  # auto-refresh fired
    assert state.inverse_error() < TAU_INV


def test_dense_solution_materializes_zeros():
    inst = make_instance(n=20, alpha=0.6, seed=79)
    state = SupportState.from_indices(inst, [2, 11, 5])
    x = state.dense_solution()
    assert x.shape == (20,)
    np.testing.assert_array_equal(x[state.ones], state.coeffs)
    mask = np.ones(20, dtype=bool)
    mask[state.ones] = False
    assert np.all(x[mask] == 0.0)
