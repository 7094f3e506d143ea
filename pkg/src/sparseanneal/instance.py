"""Synthetic planted problem instances: generation and (de)serialization.

An instance consists of a dense dictionary ``A`` (M x N, M < N), a planted
sparse vector ``x_hat`` drawn from a Bernoulli-Gaussian law, and the observed
signal ``y = A @ x_hat + xi`` with i.i.d. Gaussian measurement noise ``xi``.

Randomness is produced by numpy's PCG64 generator behind ``SeedSequence``.
The same 64-bit seed feeds several independent streams, selected by a fixed
``spawn_key``: stream 0 generates instances, stream 1 drives Monte-Carlo
chains. ``GENERATOR_ID`` names this scheme and is recorded in all output
metadata and saved files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError

GENERATOR_ID = "numpy-pcg64-seedsequence-v1"
FORMAT_VERSION = 1

# spawn_key values for the documented stream split
STREAM_INSTANCE = 0
STREAM_CHAIN = 1


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Return the PCG64 generator for one of the documented streams."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    )


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the planted signal model.

    ``n`` is the signal dimension, ``alpha`` the aspect ratio M/N of the
    dictionary, ``rho_hat`` the planted density, ``sigma_x2`` the variance of
    the non-zero planted amplitudes, and ``sigma_xi2`` the noise variance.
    """

    n: int
    alpha: float
    rho_hat: float
    sigma_x2: float
    sigma_xi2: float
    seed: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"n must be an integer >= 2, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.rho_hat < 1.0:
            raise ParameterError(f"rho_hat must lie in (0, 1), got {self.rho_hat}")
        if self.rho_hat >= self.alpha:
            raise ParameterError(
                f"rho_hat must be smaller than alpha, got "
                f"rho_hat={self.rho_hat} >= alpha={self.alpha}"
            )
        if self.sigma_x2 < 0.0:
            raise ParameterError(f"sigma_x2 must be >= 0, got {self.sigma_x2}")
        if self.sigma_xi2 < 0.0:
            raise ParameterError(f"sigma_xi2 must be >= 0, got {self.sigma_xi2}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not 0 < self.m < self.n:
            raise ParameterError(
                f"round(alpha * n) = {self.m} must lie strictly between 0 and n={self.n}"
            )

    @property
    def m(self) -> int:
        """Number of measurements, M = round(alpha * N)."""
        return int(round(self.alpha * self.n))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A realized instance: dictionary, observation, and planted solution.

    Immutable after creation; all arrays are read-only and safe to share
    across threads. ``noise`` is reconstructible as ``y - A @ x_hat``.
    """

    A: np.ndarray       # (M, N) dictionary, entries i.i.d. N(0, 1/N)
    y: np.ndarray       # (M,) observed signal
    x_hat: np.ndarray   # (N,) planted solution
    params: ModelParams
    planted_count: int  # realized number of non-zeros of x_hat

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def has_planted_solution(self) -> bool:
        """MSE against ``x_hat`` is meaningful only when sigma_x2 > 0."""
        return self.params.sigma_x2 > 0.0

    @property
    def noise(self) -> np.ndarray:
        return self.y - self.A @ self.x_hat

    # Derived caches used by the solvers; computed once per instance.
    @cached_property
    def at(self) -> np.ndarray:
        """Transposed dictionary (N, M), C-contiguous so rows are columns of A."""
        at = np.ascontiguousarray(self.A.T)
        at.setflags(write=False)
        return at

    @cached_property
    def column_sq_norms(self) -> np.ndarray:
        """Squared Euclidean norms of the dictionary columns, shape (N,)."""
        sq = np.einsum("ij,ij->i", self.at, self.at)
        sq.setflags(write=False)
        return sq

    @cached_property
    def aty(self) -> np.ndarray:
        """Correlations A.T @ y of every column with the observation, shape (N,)."""
        v = self.at @ self.y
        v.setflags(write=False)
        return v


def generate(params: ModelParams) -> ProblemInstance:
    """Draw an instance of the planted model; pure function of ``params``.

    Draw order (fixed for reproducibility): dictionary entries, planted
    support mask, planted amplitudes, measurement noise.
    """
    n, m = params.n, params.m
    rng = stream_rng(params.seed, STREAM_INSTANCE)
    A = rng.normal(0.0, np.sqrt(1.0 / n), size=(m, n))
    mask = rng.random(n) < params.rho_hat
    amplitudes = rng.normal(0.0, np.sqrt(params.sigma_x2), size=n)
    x_hat = np.where(mask, amplitudes, 0.0)
    xi = rng.normal(0.0, np.sqrt(params.sigma_xi2), size=m)
    y = A @ x_hat + xi
    for arr in (A, y, x_hat):
        arr.setflags(write=False)
    return ProblemInstance(
        A=A, y=y, x_hat=x_hat, params=params,
        planted_count=int(np.count_nonzero(x_hat)),
    )


_ARRAY_FIELDS = ("A", "y", "x_hat")
_PARAM_FIELDS = ("n", "alpha", "rho_hat", "sigma_x2", "sigma_xi2", "seed")


def save(instance: ProblemInstance, path: str | Path) -> Path:
    """Write an instance to ``path``.

    The suffix selects the variant: ``.json`` writes the text format, any
    other suffix writes the canonical binary (npz) format. Both carry a
    self-describing header (format version, generator id, model parameters,
    realized planted count) and round-trip bit-exactly.
    """
    path = Path(path)
    p = instance.params
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "problem_instance",
        "generator": GENERATOR_ID,
        "planted_count": instance.planted_count,
        **{name: getattr(p, name) for name in _PARAM_FIELDS},
    }
    if path.suffix == ".json":
        payload = dict(header)
        payload["A"] = instance.A.tolist()
        payload["y"] = instance.y.tolist()
        payload["x_hat"] = instance.x_hat.tolist()
        path.write_text(json.dumps(payload), encoding="utf-8")
    else:
        np.savez(
            path,
            A=instance.A,
            y=instance.y,
            x_hat=instance.x_hat,
            **header,
        )
        # np.savez appends .npz when missing; normalize the reported path
        if path.suffix != ".npz":
            path = path.with_name(path.name + ".npz")
    return path


def load(path: str | Path) -> ProblemInstance:
    """Read an instance written by :func:`save`; raises FormatError on damage."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"{path}: not a valid text instance file ({exc})") from exc
        getter = raw.get
        arrays = {name: np.asarray(raw.get(name), dtype=float) for name in _ARRAY_FIELDS
                  if raw.get(name) is not None}
    else:
        try:
            with np.load(path, allow_pickle=False) as data:
                contents = {key: data[key] for key in data.files}
        except Exception as exc:  # zipfile/np raise several types on truncation
            raise FormatError(f"{path}: not a valid binary instance file ({exc})") from exc
        getter = contents.get
        arrays = {name: np.asarray(contents[name], dtype=float) for name in _ARRAY_FIELDS
                  if name in contents}

    def scalar(name):
        value = getter(name)
        if value is None:
            raise FormatError(f"{path}: missing header field '{name}'")
        return value.item() if isinstance(value, np.ndarray) else value

    version = int(scalar("format_version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version}")
    for name in _ARRAY_FIELDS:
        if name not in arrays:
            raise FormatError(f"{path}: missing payload field '{name}'")

    params = ModelParams(
        n=int(scalar("n")),
        alpha=float(scalar("alpha")),
        rho_hat=float(scalar("rho_hat")),
        sigma_x2=float(scalar("sigma_x2")),
        sigma_xi2=float(scalar("sigma_xi2")),
        seed=int(scalar("seed")),
    )
    A, y, x_hat = arrays["A"], arrays["y"], arrays["x_hat"]
    if A.shape != (params.m, params.n):
        raise FormatError(
            f"{path}: field 'A' has shape {A.shape}, header implies {(params.m, params.n)}"
        )
    if y.shape != (params.m,):
        raise FormatError(f"{path}: field 'y' has shape {y.shape}, expected ({params.m},)")
    if x_hat.shape != (params.n,):
        raise FormatError(
            f"{path}: field 'x_hat' has shape {x_hat.shape}, expected ({params.n},)"
        )
    for arr in (A, y, x_hat):
        arr.setflags(write=False)
    return ProblemInstance(
        A=A, y=y, x_hat=x_hat, params=params,
        planted_count=int(scalar("planted_count")),
    )
