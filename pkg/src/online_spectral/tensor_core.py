"""Dense symmetric matrix / order-3 tensor helpers.

Tensors are plain ``numpy`` arrays of shape ``(dim, dim, dim)``; the
functions here validate shapes and never modify their inputs.  Dense
``d x d x d`` tensors are only meant for small vocabularies (see
``DENSE_LIMIT``); large-vocabulary code works on the rank-K form instead.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

#: Largest vocabulary for which a dense d^3 tensor may be materialized.
DENSE_LIMIT = 32

SLOT_ORDERINGS = tuple(permutations(range(3)))
SLOT_PAIRS = tuple(permutations(range(3), 2))


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


@dataclass(frozen=True)
class OneHotTriple:
    """A document reduced to three word indices in ``range(d)``."""

    w1: int
    w2: int
    w3: int
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"vocabulary size must be >= 1, got {self.d}")
        for w in (self.w1, self.w2, self.w3):
            if not 0 <= w < self.d:
                raise DimensionError(f"word index {w} outside [0, {self.d})")

    @property
    def words(self):
        return (self.w1, self.w2, self.w3)

    def dense(self):
        """The one-hot outer product x1 (x) x2 (x) x3 (only for small d)."""
        check_dense_dim(self.d)
        out = np.zeros((self.d,) * 3)
        out[self.words] = 1.0
        return out


def as_triples(samples, d=None):
    """Coerce triples (``OneHotTriple`` or 3-sequences) to an ``(n, 3)`` int array.

    If ``d`` is given every index is checked against it.
    """
    if isinstance(samples, np.ndarray):
        arr = np.asarray(samples, dtype=np.int64)
    else:
        rows = [s.words if isinstance(s, OneHotTriple) else tuple(s) for s in samples]
        arr = np.asarray(rows, dtype=np.int64).reshape(len(rows), -1)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionError(f"expected an (n, 3) array of word indices, got shape {arr.shape}")
    if d is not None and arr.size and (arr.min() < 0 or arr.max() >= d):
        raise DimensionError(f"word index outside [0, {d})")
    return arr


def check_dense_dim(dim):
    if dim > DENSE_LIMIT:
        raise DimensionError(
            f"refusing to materialize a dense {dim}^3 tensor (limit {DENSE_LIMIT})"
        )


def _check_tensor(T):
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or not (T.shape[0] == T.shape[1] == T.shape[2]):
        raise DimensionError(f"expected a cubic order-3 tensor, got shape {T.shape}")
    return T


def _check_vector(v, dim):
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise DimensionError(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


def zeros3(dim):
    return np.zeros((dim, dim, dim))


def outer3(a, b, c):
    return np.einsum("i,j,k->ijk", a, b, c)


def rank1_update(T, a, b, c, s=1.0):
    """Return ``T + s * a (x) b (x) c`` as a new tensor."""
    T = _check_tensor(T)
    dim = T.shape[0]
    a, b, c = (_check_vector(x, dim) for x in (a, b, c))
    return T + s * outer3(a, b, c)


def _canonical_index(dim):
    i, j, k = np.indices((dim,) * 3)
    srt = np.sort(np.stack([i, j, k]), axis=0)
    return srt[0], srt[1], srt[2]


def symmetrize(T):
    """Average ``T`` over the 6 index permutations.

    Every entry is then overwritten by the value at its sorted index so
    the result is symmetric bit for bit, not just to rounding.
    """
    T = _check_tensor(T)
    S = sum(T.transpose(p) for p in SLOT_ORDERINGS) / 6.0
    return S[_canonical_index(T.shape[0])]


def symmetrize_matrix(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    S = 0.5 * (M + M.T)
    upper = np.triu(S)
    return upper + np.triu(S, 1).T


def is_symmetric(T, atol=0.0):
    T = np.asarray(T)
    return all(np.allclose(T, T.transpose(p), rtol=0.0, atol=atol) for p in SLOT_ORDERINGS)


def frobenius_norm(T):
    return float(np.sqrt(np.sum(np.square(T))))


def frobenius_distance(A, B):
    A = _check_tensor(A)
    B = _check_tensor(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch: {A.shape} vs {B.shape}")
    return frobenius_norm(A - B)


def contract_to_vector(T, v):
    """T(I, v, v): out[i] = sum_jk T[i,j,k] v[j] v[k]."""
    T = _check_tensor(T)
    v = _check_vector(v, T.shape[0])
    return np.einsum("ijk,j,k->i", T, v, v)


def contract_to_scalar(T, v):
    """T(v, v, v)."""
    T = _check_tensor(T)
    v = _check_vector(v, T.shape[0])
    return float(np.einsum("ijk,i,j,k->", T, v, v, v))


def rank_k_tensor(weights, vectors):
    """Dense ``sum_c weights[c] * vectors[:, c]^(x)3``."""
    vectors = np.asarray(vectors, dtype=float)
    check_dense_dim(vectors.shape[0])
    return np.einsum("c,ic,jc,kc->ijk", np.asarray(weights, dtype=float), vectors, vectors, vectors)
