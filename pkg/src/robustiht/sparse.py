"""Hard thresholding and small-instance brute-force sparse spectral oracles.

The brute-force routines enumerate supports explicitly and are meant for
certification and testing at small dimension, not for production solves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationLimitError, InvalidInputError

# C(d, s) above this triggers EnumerationLimitError (unless d <= 25).
ENUMERATION_LIMIT = 10**6


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(getattr(v, "values", v), dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("vector has non-finite entries")
    return arr


@dataclass
class SparseVector:
    """Dense vector carrying an explicit sparsity budget.

    The number of nonzero entries must not exceed ``declared_sparsity``;
    the budget may be loose (a thresholded vector keeps its budget even
    when some kept entries happen to be zero).
    """

    values: np.ndarray
    declared_sparsity: int

    def __post_init__(self):
        self.values = _as_vector(self.values)
        self.declared_sparsity = int(self.declared_sparsity)
        if self.declared_sparsity < 0:
            raise InvalidInputError("declared_sparsity must be nonnegative")
        if self.nnz > self.declared_sparsity:
            raise InvalidInputError(
                f"{self.nnz} nonzeros exceed declared sparsity {self.declared_sparsity}"
            )

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)


@dataclass
class SymMatrix:
    """Dense symmetric matrix; symmetrized on construction.

    Accepts any square matrix whose asymmetry is floating-point noise and
    stores (A + A^T) / 2.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(getattr(self.entries, "entries", self.entries), dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("matrix has non-finite entries")
        self.entries = (arr + arr.T) / 2.0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _as_sym_array(a) -> np.ndarray:
    if isinstance(a, SymMatrix):
        return a.entries
    return SymMatrix(a).entries


def hard_threshold_array(v: np.ndarray, s: int) -> np.ndarray:
    """Raw-array hard threshold used on hot paths; no validation."""
    if s <= 0:
        return np.zeros_like(v)
    if s >= v.shape[0]:
        return v.copy()
    # stable sort on negated magnitudes: ties keep the lowest index
    order = np.argsort(-np.abs(v), kind="stable")
    out = np.zeros_like(v)
    keep = order[:s]
    out[keep] = v[keep]
    return out


def hard_threshold(v, s: int) -> SparseVector:
    """Keep the ``s`` largest-magnitude entries of ``v`` and zero the rest.

    Ties are broken toward the lowest index, so the operator is
    deterministic and idempotent.
    """
    arr = _as_vector(v)
    s = int(s)
    if s < 0:
        raise InvalidInputError("sparsity budget must be nonnegative")
    return SparseVector(hard_threshold_array(arr, s), min(s, arr.shape[0]))


def _check_enumeration_size(d: int, s: int) -> None:
    if d <= 25:
        return
    if math.comb(d, s) > ENUMERATION_LIMIT:
        raise EnumerationLimitError(
            f"C({d},{s}) supports exceed the enumeration limit of {ENUMERATION_LIMIT}"
        )


def sparse_largest_eigenvalue_bf(a, s: int):
    """Exact max of v^T A v over unit vectors with at most ``s`` nonzeros.

    Enumerates all supports of size min(s, d); by eigenvalue interlacing the
    maximum over supports of size <= s is attained at full size. Returns
    ``(value, support, direction)`` with the eigenvector embedded in R^d.
    """
    arr = _as_sym_array(a)
    d = arr.shape[0]
    s = int(s)
    if s < 1:
        raise InvalidInputError("sparsity budget must be at least 1")
    s = min(s, d)
    _check_enumeration_size(d, s)

    supports = list(itertools.combinations(range(d), s))
    blocks = np.empty((len(supports), s, s))
    for i, sup in enumerate(supports):
        idx = np.asarray(sup)
        blocks[i] = arr[np.ix_(idx, idx)]
    top = np.linalg.eigvalsh(blocks)[:, -1]
    best = int(np.argmax(top))

    idx = np.asarray(supports[best])
    vals, vecs = np.linalg.eigh(arr[np.ix_(idx, idx)])
    direction = np.zeros(d)
    direction[idx] = vecs[:, -1]
    return float(top[best]), set(supports[best]), direction


def sparse_operator_norm_bf(a, s: int) -> float:
    """Exact max of |v^T A v| over unit vectors with at most ``s`` nonzeros."""
    arr = _as_sym_array(a)
    pos, _, _ = sparse_largest_eigenvalue_bf(arr, s)
    neg, _, _ = sparse_largest_eigenvalue_bf(-arr, s)
    return max(pos, neg)


def threshold_contraction_factor(k: int, k_prime: int, d: int) -> float:
    """Squared contraction constant of hard thresholding toward a k-sparse target.

    For any z and any k-sparse b with k' >= k,
    ||H_{k'}(z) - b||_2 <= sqrt(zeta) * ||z - b||_2 with the zeta returned here.
    """
    if not (0 < k <= k_prime <= d):
        raise InvalidInputError("need 0 < k <= k_prime <= d")
    m = min(k, d - k_prime)
    if m == 0:
        return 1.0
    rho = m / (k_prime - k + m)
    return 1.0 + (rho + math.sqrt((4.0 + rho) * rho)) / 2.0
