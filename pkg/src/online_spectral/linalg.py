"""Symmetric eigendecomposition and whitening.

Two eigensolvers sit behind :func:`sym_eig`: a cyclic Jacobi sweep
(pure numpy, deterministic, fine for small matrices and used as the
reference in tests) and LAPACK's ``syevd`` through :func:`numpy.linalg.eigh`
for vocabulary-sized matrices.  Both return the same normalized output:
eigenvalues in descending order, eigenvectors with their largest-magnitude
entry positive.
"""

from dataclasses import dataclass

import numpy as np

from .tensor_core import DimensionError

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
#: Relative eigenvalue threshold below which M2 is treated as rank deficient.
RANK_RTOL = 1e-9


class ConvergenceError(ArithmeticError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class RankDeficiencyError(ArithmeticError):
    """Fewer than K eigenvalues of the second moment exceed the rank threshold."""

    def __init__(self, message, rank, requested):
        super().__init__(message)
        self.rank = rank
        self.requested = requested


@dataclass(frozen=True)
class EigenDecomp:
    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class Whitener:
    """W = U diag(A)^(-1/2) built from the top-K eigenpairs of M2."""

    W: np.ndarray
    U: np.ndarray
    A: np.ndarray

    @property
    def d(self):
        return self.W.shape[0]

    @property
    def K(self):
        return self.W.shape[1]

    def pinv_transpose(self):
        """(W^T)^+, which equals U diag(A)^(1/2) because U has orthonormal columns."""
        return self.U * np.sqrt(self.A)

    def whiten(self, x):
        return self.W.T @ x


def _off_diagonal_norm(A):
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def _jacobi(M, tol, max_sweeps):
    A = np.array(M, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        if _off_diagonal_norm(A) <= tol * scale:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = np.copysign(1.0, tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    residual = _off_diagonal_norm(A)
    if residual <= tol * scale:
        return np.diag(A).copy(), V
    raise ConvergenceError(
        f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal mass {residual:.3e})",
        residual,
    )


def _normalize(values, vectors):
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    if vectors.size:
        pivot = np.argmax(np.abs(vectors), axis=0)
        signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
        signs[signs == 0] = 1.0
        vectors = vectors * signs
    return EigenDecomp(values, vectors)


def sym_eig(M, tol=JACOBI_TOL, method="lapack", max_sweeps=JACOBI_MAX_SWEEPS):
    """Full eigendecomposition of a symmetric matrix.

    ``method`` is ``"lapack"`` or ``"jacobi"``; ``tol`` and ``max_sweeps``
    only affect Jacobi.  Raises :class:`ConvergenceError` when Jacobi hits
    the sweep cap.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "jacobi":
        values, vectors = _jacobi(M, tol, max_sweeps)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(M)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return _normalize(values, vectors)


def usable_rank(values, eps_rank=None):
    """Number of eigenvalues above ``eps_rank`` (default: 1e-9 x the largest)."""
    values = np.asarray(values)
    if values.size == 0 or values[0] <= 0:
        return 0
    threshold = RANK_RTOL * values[0] if eps_rank is None else eps_rank
    return int(np.count_nonzero(values > threshold))


def build_whitener(M2, K, eps_rank=None, method="lapack"):
    if K < 1:
        raise ValueError("K must be >= 1")
    eig = sym_eig(M2, method=method)
    rank = usable_rank(eig.values, eps_rank)
    if rank < K:
        raise RankDeficiencyError(
            f"second moment has {rank} usable eigenvalues, {K} requested", rank, K
        )
    A = eig.values[:K]
    U = eig.vectors[:, :K]
    return Whitener(W=U / np.sqrt(A), U=U, A=A)


def unwhiten(wh, v, lam=1.0):
    """lam * (W^T)^+ v, mapping a whitened direction back to R^d."""
    v = np.asarray(v, dtype=float)
    if v.shape != (wh.K,):
        raise DimensionError(f"expected a vector of length {wh.K}, got shape {v.shape}")
    return lam * (wh.U @ (np.sqrt(wh.A) * v))
