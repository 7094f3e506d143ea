"""Incremental least-squares caches over a binary column support.

For a support ``c`` selecting K columns of the dictionary, the state holds
the restricted Gram matrix ``G``, its inverse, the restricted least-squares
coefficients ``G^-1 @ (A_sel @ y)``, and the residual energy
``0.5 * ||y - A_sel.T @ coeffs||^2``. Single-column deletions and additions
update the inverse with rank-one downdates and bordered extensions in
O(K^2) + O(M*K) instead of refactorizing, which is what makes pair-flip
Monte-Carlo moves cheap.

Conventions:
  * ``ones`` is an ordered index array; ``gram``/``coeffs``/``aty`` follow
    that order. Deleting an interior index symmetrically permutes it to the
    last position first, so the downdate always peels the trailing block.
  * The pivot threshold ``TAU_SING`` is absolute. A Schur complement at or
    below it means the candidate column is numerically dependent
    (DegenerateColumnError); a downdate pivot at or below it means the cached
    inverse is no longer trustworthy and a full refactorization is performed.
  * Rank-one updates accumulate roundoff, so the inverse is refactorized
    after every ``refresh_every`` committed moves (default 1000).
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateColumnError,
    InfeasibleSupportError,
    SingularSupportError,
)
from .instance import ProblemInstance

TAU_SING = 1e-10           # absolute pivot / Schur-complement threshold
TAU_INV = 1e-8             # documented tolerance on ||G @ G^-1 - I||_max
DEFAULT_REFRESH_EVERY = 1000


def _checked_inverse(gram: np.ndarray) -> np.ndarray:
    """Invert an SPD Gram matrix, gating on the Cholesky pivots."""
    k = gram.shape[0]
    if k == 0:
        return np.zeros((0, 0))
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSupportError(f"restricted Gram matrix is not positive definite: {exc}")
    smallest_pivot = float(np.min(np.diag(chol)) ** 2)
    if smallest_pivot <= TAU_SING:
        raise SingularSupportError(
            f"restricted Gram matrix has pivot {smallest_pivot:.3e} <= {TAU_SING:.0e}"
        )
    return np.linalg.inv(gram)


class SupportState:
    """Mutable least-squares cache for one support over a fixed instance.

    Single-owner mutable: do not mutate one state from several threads.
    Distinct states over the same (immutable) instance are independent.
    """

    def __init__(self, instance: ProblemInstance, c: np.ndarray, ones: np.ndarray,
                 zeros: np.ndarray, at_sel: np.ndarray, gram: np.ndarray,
                 gram_inv: np.ndarray, aty: np.ndarray, coeffs: np.ndarray,
                 energy: float, refresh_every: int | None):
        self.instance = instance
        self.c = c
        self.ones = ones
        self.zeros = zeros
        self.at_sel = at_sel          # (K, M); row k is column ones[k] of A
        self.gram = gram
        self.gram_inv = gram_inv
        self.aty = aty
        self.coeffs = coeffs
        self.energy = energy
        self.refresh_every = refresh_every
        self.commits_since_refresh = 0
        self._pending = None          # stashed caches from the last probe

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def from_support(cls, instance: ProblemInstance, c: np.ndarray,
                     refresh_every: int | None = DEFAULT_REFRESH_EVERY) -> "SupportState":
        """Build all caches from scratch by direct factorization."""
        c = np.asarray(c)
        if c.shape != (instance.n,):
            raise ValueError(f"support must have shape ({instance.n},), got {c.shape}")
        if not np.all((c == 0) | (c == 1)):
            raise ValueError("support entries must be 0 or 1")
        c = c.astype(np.uint8)
        ones = np.flatnonzero(c).astype(np.int64)
        zeros = np.flatnonzero(c == 0).astype(np.int64)
        return cls._build(instance, c, ones, zeros, refresh_every)

    @classmethod
    def from_indices(cls, instance: ProblemInstance, indices,
                     refresh_every: int | None = DEFAULT_REFRESH_EVERY) -> "SupportState":
        """Build from an ordered index list; the cache keeps that order."""
        ones = np.asarray(list(indices), dtype=np.int64)
        if ones.size and (ones.min() < 0 or ones.max() >= instance.n):
            raise ValueError("column index out of range")
        if np.unique(ones).size != ones.size:
            raise ValueError("duplicate column index")
        c = np.zeros(instance.n, dtype=np.uint8)
        c[ones] = 1
        zeros = np.flatnonzero(c == 0).astype(np.int64)
        return cls._build(instance, c, ones, zeros, refresh_every)

    @classmethod
    def _build(cls, instance, c, ones, zeros, refresh_every) -> "SupportState":
        k = ones.size
        if k > instance.m:
            raise InfeasibleSupportError(
                f"support of size {k} exceeds the {instance.m} measurements"
            )
        at_sel = np.ascontiguousarray(instance.at[ones])
        gram = at_sel @ at_sel.T
        gram_inv = _checked_inverse(gram)
        aty = at_sel @ instance.y
        coeffs = gram_inv @ aty
        energy = cls._residual_energy(instance.y, at_sel, coeffs)
        return cls(instance, c, ones, zeros, at_sel, gram, gram_inv, aty,
                   coeffs, energy, refresh_every)

    @staticmethod
    def _residual_energy(y: np.ndarray, at_sel: np.ndarray, coeffs: np.ndarray) -> float:
        r = y - coeffs @ at_sel if coeffs.size else y
        return 0.5 * float(r @ r)

    # ------------------------------------------------------------------
    # basic accessors
    # ------------------------------------------------------------------

    @property
    def k(self) -> int:
        return self.ones.size

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def m(self) -> int:
        return self.instance.m

    @property
    def distortion(self) -> float:
        """Intensive distortion, energy / M."""
        return self.energy / self.instance.m

    def dense_solution(self) -> np.ndarray:
        """Full-length solution vector with zeros on the inactive indices."""
        x = np.zeros(self.n)
        x[self.ones] = self.coeffs
        return x

    def residual(self) -> np.ndarray:
        return self.instance.y - self.coeffs @ self.at_sel if self.k \
            else self.instance.y.copy()

    def inverse_error(self) -> float:
        """Max-norm departure of gram @ gram_inv from the identity."""
        if self.k == 0:
            return 0.0
        return float(np.max(np.abs(self.gram @ self.gram_inv - np.eye(self.k))))

    def copy(self) -> "SupportState":
        dup = SupportState(
            self.instance, self.c.copy(), self.ones.copy(), self.zeros.copy(),
            self.at_sel.copy(), self.gram.copy(), self.gram_inv.copy(),
            self.aty.copy(), self.coeffs.copy(), self.energy, self.refresh_every,
        )
        dup.commits_since_refresh = self.commits_since_refresh
        return dup

    # ------------------------------------------------------------------
    # incremental operations
    # ------------------------------------------------------------------

    def _position(self, index: int, active: bool) -> int:
        arr = self.ones if active else self.zeros
        hits = np.nonzero(arr == index)[0]
        if hits.size == 0:
            raise ValueError(
                f"column {index} is not {'active' if active else 'inactive'}"
            )
        return int(hits[0])

    def refresh(self) -> None:
        """Refactorize the inverse and dependent caches, keeping the order."""
        self._pending = None
        self.gram = self.at_sel @ self.at_sel.T
        self.gram_inv = _checked_inverse(self.gram)
        self.coeffs = self.gram_inv @ self.aty
        self.energy = self._residual_energy(self.instance.y, self.at_sel, self.coeffs)
        self.commits_since_refresh = 0

    def _count_commit(self) -> None:
        self.commits_since_refresh += 1
        if self.refresh_every and self.commits_since_refresh >= self.refresh_every:
            self.refresh()

    def delete_column(self, i: int) -> "SupportState":
        """Drop active column ``i``; rank-one downdate of the inverse."""
        p = self._position(i, active=True)
        self._pending = None
        k = self.k
        pivot = float(self.gram_inv[p, p])
        # permute i to the trailing position so the downdate peels the border
        perm = np.arange(k)
        if p != k - 1:
            perm[[p, k - 1]] = perm[[k - 1, p]]
        ones = self.ones[perm][:-1]
        at_sel = np.ascontiguousarray(self.at_sel[perm][:-1])
        aty = self.aty[perm][:-1]
        gram = np.ascontiguousarray(self.gram[np.ix_(perm, perm)][:-1, :-1])
        self.c[i] = 0
        self.zeros = np.append(self.zeros, np.int64(i))
        self.ones, self.at_sel, self.aty, self.gram = ones, at_sel, aty, gram
        if pivot <= TAU_SING:
            # cache-degenerate: the downdate would divide by a dead pivot
            self.refresh()
            return self
        pinv = self.gram_inv[np.ix_(perm, perm)]
        u = pinv[:-1, -1]
        self.gram_inv = pinv[:-1, :-1] - np.outer(u, u) / pivot
        self.coeffs = self.gram_inv @ self.aty
        self.energy = self._residual_energy(self.instance.y, self.at_sel, self.coeffs)
        self._count_commit()
        return self

    def add_column(self, j: int) -> "SupportState":
        """Activate column ``j``; bordered extension of the inverse.

        Raises DegenerateColumnError (state untouched) when the Schur
        complement of the new column is at or below TAU_SING.
        """
        zp = self._position(j, active=False)
        if self.k + 1 > self.instance.m:
            raise InfeasibleSupportError(
                f"support of size {self.k + 1} exceeds the {self.instance.m} measurements"
            )
        a_j = self.instance.at[j]
        g = self.at_sel @ a_j
        g_jj = float(self.instance.column_sq_norms[j])
        w = self.gram_inv @ g
        gamma = g_jj - float(g @ w)
        if gamma <= TAU_SING:
            raise DegenerateColumnError(
                f"column {j} has Schur complement {gamma:.3e} <= {TAU_SING:.0e}"
            )
        self._pending = None
        k = self.k
        gram_inv = np.empty((k + 1, k + 1))
        gram_inv[:k, :k] = self.gram_inv + np.outer(w, w) / gamma
        gram_inv[:k, k] = -w / gamma
        gram_inv[k, :k] = -w / gamma
        gram_inv[k, k] = 1.0 / gamma
        gram = np.empty((k + 1, k + 1))
        gram[:k, :k] = self.gram
        gram[:k, k] = g
        gram[k, :k] = g
        gram[k, k] = g_jj
        self.c[j] = 1
        self.ones = np.append(self.ones, np.int64(j))
        self.zeros = np.delete(self.zeros, zp)
        self.at_sel = np.vstack([self.at_sel, a_j])
        self.aty = np.append(self.aty, float(self.instance.aty[j]))
        self.gram, self.gram_inv = gram, gram_inv
        self.coeffs = self.gram_inv @ self.aty
        self.energy = self._residual_energy(self.instance.y, self.at_sel, self.coeffs)
        self._count_commit()
        return self

    # ------------------------------------------------------------------
    # pair flips
    # ------------------------------------------------------------------

    def _pair_flip_caches(self, i: int, j: int) -> dict:
        """Candidate caches for the support with i deactivated, j activated.

        Pure computation on scratch arrays; ``self`` is not touched. Falls
        back to a full fresh factorization when the downdate pivot is dead.
        """
        p = self._position(i, active=True)
        zp = self._position(j, active=False)
        k = self.k
        pivot = float(self.gram_inv[p, p])
        if pivot <= TAU_SING:
            flipped = self.c.copy()
            flipped[i] = 0
            flipped[j] = 1
            fresh = SupportState.from_support(self.instance, flipped, self.refresh_every)
            return {"fresh": fresh, "i": i, "j": j, "zp": zp}

        perm = np.arange(k)
        if p != k - 1:
            perm[[p, k - 1]] = perm[[k - 1, p]]
        pinv = self.gram_inv[np.ix_(perm, perm)]
        u = pinv[:-1, -1]
        sub_inv = pinv[:-1, :-1] - np.outer(u, u) / pivot

        a_j = self.instance.at[j]
        g_full = self.at_sel @ a_j
        g1 = g_full[perm][:-1]
        g_jj = float(self.instance.column_sq_norms[j])
        w = sub_inv @ g1
        gamma = g_jj - float(g1 @ w)
        if gamma <= TAU_SING:
            raise DegenerateColumnError(
                f"column {j} has Schur complement {gamma:.3e} <= {TAU_SING:.0e}"
            )

        gram_inv = np.empty((k, k))
        gram_inv[:-1, :-1] = sub_inv + np.outer(w, w) / gamma
        gram_inv[:-1, -1] = -w / gamma
        gram_inv[-1, :-1] = -w / gamma
        gram_inv[-1, -1] = 1.0 / gamma

        gram = np.empty((k, k))
        gram[:-1, :-1] = self.gram[np.ix_(perm, perm)][:-1, :-1]
        gram[:-1, -1] = g1
        gram[-1, :-1] = g1
        gram[-1, -1] = g_jj

        ones = self.ones[perm]
        ones[-1] = j
        at_sel = self.at_sel[perm]
        at_sel[-1] = a_j
        aty = self.aty[perm]
        aty[-1] = float(self.instance.aty[j])
        coeffs = gram_inv @ aty
        energy = self._residual_energy(self.instance.y, at_sel, coeffs)
        return {
            "i": i, "j": j, "zp": zp, "ones": ones, "at_sel": at_sel,
            "aty": aty, "gram": gram, "gram_inv": gram_inv,
            "coeffs": coeffs, "energy": energy,
        }

    def probe_pair_flip(self, i: int, j: int) -> float:
        """Energy of the pair-flipped support, without mutating the state."""
        caches = self._pair_flip_caches(i, j)
        self._pending = caches
        if "fresh" in caches:
            return caches["fresh"].energy
        return caches["energy"]

    def commit_pair_flip(self, i: int, j: int) -> "SupportState":
        """Apply the pair flip; reuses the caches of a matching probe."""
        caches = self._pending
        if caches is None or caches["i"] != i or caches["j"] != j:
            caches = self._pair_flip_caches(i, j)
        self._pending = None
        if "fresh" in caches:
            fresh = caches["fresh"]
            self.c = fresh.c
            self.ones, self.zeros = fresh.ones, fresh.zeros
            self.at_sel, self.gram, self.gram_inv = fresh.at_sel, fresh.gram, fresh.gram_inv
            self.aty, self.coeffs, self.energy = fresh.aty, fresh.coeffs, fresh.energy
            self.commits_since_refresh = 0
            return self
        self.c[i] = 0
        self.c[j] = 1
        self.zeros[caches["zp"]] = i
        self.ones = caches["ones"]
        self.at_sel = np.ascontiguousarray(caches["at_sel"])
        self.aty = caches["aty"]
        self.gram = caches["gram"]
        self.gram_inv = caches["gram_inv"]
        self.coeffs = caches["coeffs"]
        self.energy = caches["energy"]
        self._count_commit()
        return self
