import numpy as np
import pytest

from sparseanneal import (
    FormatError,
    ModelParams,
    ParameterError,
    generate,
    load,
    save,
    stream_rng,
)
from conftest import make_instance


def test_shapes_and_signal_model():
    inst = make_instance(n=50, alpha=0.8, seed=3)
    assert inst.params.m == 40
    assert inst.A.shape == (40, 50)
    assert inst.y.shape == (40,)
    assert inst.x_hat.shape == (50,)
    assert inst.planted_count == np.count_nonzero(inst.x_hat)
    # noiseless: y is exactly the dictionary applied to the planted vector
    np.testing.assert_array_equal(inst.y, inst.A @ inst.x_hat)


def test_noise_reconstruction_identity():
    inst = make_instance(n=30, sigma_xi2=0.5, seed=9)
    np.testing.assert_array_equal(inst.y, inst.A @ inst.x_hat + inst.noise)


def test_determinism_same_seed():
    a = make_instance(n=25, seed=13)
    b = make_instance(n=25, seed=13)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.x_hat, b.x_hat)
    c = make_instance(n=25, seed=14)
    assert not np.array_equal(a.A, c.A)


def test_zero_amplitude_plants_nothing():
    inst = make_instance(n=30, sigma_x2=0.0, sigma_xi2=1.0, seed=2)
    assert np.count_nonzero(inst.x_hat) == 0
    assert inst.planted_count == 0
    assert not inst.has_planted_solution
    # y is pure noise with the configured variance (loose sanity bound)
    assert 0.2 < np.var(inst.y) < 5.0


def test_entry_variance_matches_model():
    n = 40
    entries = np.concatenate(
        [make_instance(n=n, alpha=0.5, seed=s).A.ravel() for s in range(30)]
    )
    var = entries.var()
    se = (1.0 / n) * np.sqrt(2.0 / (entries.size - 1))
    assert abs(var - 1.0 / n) < 3.0 * se


def test_nonzero_fraction_matches_density():
    rho_hat = 0.3
    total = 0
    count = 0
    for s in range(30):
        inst = make_instance(n=60, rho_hat=rho_hat, seed=100 + s)
        count += inst.planted_count
        total += inst.n
    se = np.sqrt(rho_hat * (1 - rho_hat) * total)
    assert abs(count - rho_hat * total) < 3.0 * se


@pytest.mark.parametrize("kwargs", [
    dict(n=1),
    dict(alpha=0.0),
    dict(alpha=1.0),
    dict(alpha=1.3),
    dict(rho_hat=0.0),
    dict(rho_hat=1.0),
    dict(rho_hat=0.9),          # >= alpha
    dict(sigma_x2=-1.0),
    dict(sigma_xi2=-0.5),
    dict(seed=-1),
    dict(seed=2**64),
])
def test_invalid_params_rejected(kwargs):
    base = dict(n=20, alpha=0.6, rho_hat=0.2, sigma_x2=1.0, sigma_xi2=0.0, seed=0)
    base.update(kwargs)
    with pytest.raises(ParameterError):
        ModelParams(**base)


def test_stream_split_is_independent():
    a = stream_rng(7, 0).random(8)
    b = stream_rng(7, 1).random(8)
    assert not np.array_equal(a, b)
    # drawing from the chain stream does not perturb instance generation
    inst1 = make_instance(seed=7)
    stream_rng(7, 1).random(1000)
    inst2 = make_instance(seed=7)
    np.testing.assert_array_equal(inst1.A, inst2.A)


@pytest.mark.parametrize("suffix", [".npz", ".json"])
def test_roundtrip_bit_exact(tmp_path, suffix):
    inst = make_instance(n=17, alpha=0.7, sigma_xi2=0.3, seed=21)
    path = save(inst, tmp_path / f"inst{suffix}")
    back = load(path)
    np.testing.assert_array_equal(back.A, inst.A)
    np.testing.assert_array_equal(back.y, inst.y)
    np.testing.assert_array_equal(back.x_hat, inst.x_hat)
    assert back.params == inst.params
    assert back.planted_count == inst.planted_count


def test_save_appends_npz_suffix(tmp_path):
    inst = make_instance(seed=1)
    path = save(inst, tmp_path / "bare")
    assert path.suffix == ".npz"
    assert load(path).params == inst.params


@pytest.mark.parametrize("suffix", [".npz", ".json"])
def test_truncated_file_raises_format_error(tmp_path, suffix):
    inst = make_instance(seed=4)
    path = save(inst, tmp_path / f"inst{suffix}")
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(FormatError):
        load(path)


def test_dimension_mismatch_raises_format_error(tmp_path):
    inst = make_instance(n=20, seed=5)
    path = save(inst, tmp_path / "inst.npz")
    with np.load(path) as data:
        fields = {k: data[k] for k in data.files}
    fields["y"] = fields["y"][:-2]  # payload no longer matches the header
    np.savez(tmp_path / "bad.npz", **fields)
    with pytest.raises(FormatError, match="'y'"):
        load(tmp_path / "bad.npz")


def test_missing_field_raises_format_error(tmp_path):
    inst = make_instance(n=20, seed=5)
    path = save(inst, tmp_path / "inst.npz")
    with np.load(path) as data:
        fields = {k: data[k] for k in data.files}
    del fields["x_hat"]
    np.savez(tmp_path / "bad.npz", **fields)
    with pytest.raises(FormatError, match="x_hat"):
        load(tmp_path / "bad.npz")


def test_unsupported_format_version(tmp_path):
    inst = make_instance(n=20, seed=5)
    path = save(inst, tmp_path / "inst.npz")
    with np.load(path) as data:
        fields = {k: data[k] for k in data.files}
    fields["format_version"] = np.int64(99)
    np.savez(tmp_path / "bad.npz", **fields)
    with pytest.raises(FormatError, match="format_version 99"):
        load(tmp_path / "bad.npz")


def test_instances_are_immutable():
    inst = make_instance(seed=6)
    with pytest.raises(ValueError):
        inst.A[0, 0] = 1.0
    with pytest.raises(ValueError):
        inst.y[0] = 1.0
