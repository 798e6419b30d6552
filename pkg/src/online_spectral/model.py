"""Single-topic model parameters and topic-permutation matching."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TopicParams:
    """Topic prior ``omega`` (length K) and word-given-topic matrix ``U`` (d x K)."""

    omega: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        U = np.asarray(self.U, dtype=float)
        if omega.ndim != 1 or U.ndim != 2 or U.shape[1] != omega.shape[0]:
            raise ValueError(f"incompatible shapes omega {omega.shape}, U {U.shape}")
        if np.any(omega < 0) or abs(omega.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"omega is not on the simplex: {omega}")
        if np.any(U < 0) or np.any(np.abs(U.sum(axis=0) - 1.0) > SIMPLEX_TOL):
            raise ValueError("columns of U are not on the simplex")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "U", U)

    @property
    def K(self):
        return self.omega.shape[0]

    @property
    def d(self):
        return self.U.shape[0]

    @classmethod
    def uniform(cls, d, K):
        return cls(np.full(K, 1.0 / K), np.full((d, K), 1.0 / d))

    @classmethod
    def concentrated(cls, prior, p, d=None):
        """The synthetic model where topic j emits word j w.p. ``p``, others evenly."""
        prior = np.asarray(prior, dtype=float)
        K = prior.shape[0]
        d = K if d is None else d
        if d < K:
            raise ValueError("need d >= K for the concentrated model")
        if d == 1:
            return cls(prior, np.ones((1, K)))
        U = np.full((d, K), (1.0 - p) / (d - 1))
        U[np.arange(K), np.arange(K)] = p
        return cls(prior, U)

    def sorted(self):
        """Topics reordered by descending prior mass (stable)."""
        order = np.argsort(-self.omega, kind="stable")
        return TopicParams(self.omega[order], self.U[:, order])

    def smoothed(self, delta):
        omega = self.omega + delta
        U = self.U + delta
        return TopicParams(omega / omega.sum(), U / U.sum(axis=0))

    def permuted(self, perm):
        perm = np.asarray(perm)
        return TopicParams(self.omega[perm], self.U[:, perm])

    def allclose(self, other, atol):
        return (
            self.omega.shape == other.omega.shape
            and self.U.shape == other.U.shape
            and np.allclose(self.omega, other.omega, rtol=0, atol=atol)
            and np.allclose(self.U, other.U, rtol=0, atol=atol)
        )


def normalize_columns(X):
    """Clamp negatives to zero and rescale each column to sum to one.

    Returns ``None`` in place of the matrix if some column sums to zero.
    """
    X = np.clip(np.asarray(X, dtype=float), 0.0, None)
    sums = X.sum(axis=0)
    if np.any(sums <= 0):
        return None
    return X / sums


def best_permutation(estimate, truth):
    """Column permutation of ``estimate`` minimizing the summed L1 distance to ``truth``.

    Returns ``perm`` such that ``estimate.permuted(perm)`` lines up with ``truth``.
    """
    cost = np.abs(truth.U[:, :, None] - estimate.U[:, None, :]).sum(axis=0)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(truth.K, dtype=int)
    perm[rows] = cols
    return perm


def matched_error(estimate, truth):
    """Largest entrywise |estimate - truth| over omega and U after topic matching."""
    if estimate.K != truth.K or estimate.d != truth.d:
        raise ValueError("parameter shapes differ")
    aligned = estimate.permuted(best_permutation(estimate, truth))
    return float(
        max(np.max(np.abs(aligned.omega - truth.omega)), np.max(np.abs(aligned.U - truth.U)))
    )
