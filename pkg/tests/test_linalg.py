import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from online_spectral.linalg import (
    ConvergenceError,
    RankDeficiencyError,
    Whitener,
    build_whitener,
    sym_eig,
    unwhiten,
)
from online_spectral.spectral import PowerConfig, tensor_power_method
from online_spectral.tensor_core import DimensionError

METHODS = ("lapack", "jacobi")


def charpoly_roots(M):
    """Eigenvalues of a 3x3 symmetric matrix from its characteristic polynomial."""
    c2 = -np.trace(M)
    c1 = (M[0, 0] * M[1, 1] - M[0, 1] ** 2 + M[0, 0] * M[2, 2] - M[0, 2] ** 2
          + M[1, 1] * M[2, 2] - M[1, 2] ** 2)
    c0 = -np.linalg.det(M)
    return np.sort(np.roots([1.0, c2, c1, c0]).real)[::-1]


def random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


def easy_m2(params):
    return (params.U * params.omega) @ params.U.T


@pytest.mark.parametrize("method", METHODS)
class TestSymEig:
    def test_identity(self, method):
        np.testing.assert_allclose(sym_eig(np.eye(3), method=method).values, [1, 1, 1])

    def test_diagonal(self, method):
        eig = sym_eig(np.diag([1.0, 3.0]), method=method)
        np.testing.assert_allclose(eig.values, [3, 1])
        np.testing.assert_allclose(np.abs(eig.vectors), [[0, 1], [1, 0]], atol=1e-15)

    def test_easy_problem_against_charpoly(self, method, easy):
        M = easy_m2(easy)
        np.testing.assert_allclose(sym_eig(M, method=method).values, charpoly_roots(M), atol=1e-8)

    @pytest.mark.parametrize("n", [1, 2, 5, 20, 60])
    def test_random_reconstruction(self, method, n):
        rng = np.random.default_rng(n)
        M = random_symmetric(rng, n)
        eig = sym_eig(M, method=method)
        V, lam = eig.vectors, eig.values
        assert np.all(np.diff(lam) <= 0)
        np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)
        assert np.linalg.norm(M - (V * lam) @ V.T) <= 1e-8 * max(1.0, np.linalg.norm(M))
        assert lam.sum() == pytest.approx(np.trace(M), abs=1e-8)
        # largest-magnitude entry of each eigenvector is positive
        assert np.all(V[np.argmax(np.abs(V), axis=0), np.arange(n)] > 0)


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(11)
    M = random_symmetric(rng, 30)
    a = sym_eig(M, method="jacobi")
    b = sym_eig(M, method="lapack")
    np.testing.assert_allclose(a.values, b.values, atol=1e-10)
    np.testing.assert_allclose(a.vectors, b.vectors, atol=1e-8)


def test_jacobi_sweep_cap_reports_residual():
    M = random_symmetric(np.random.default_rng(0), 8)
    with pytest.raises(ConvergenceError) as info:
        sym_eig(M, method="jacobi", max_sweeps=1)
    assert info.value.residual > 0


def test_rejects_bad_input():
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(ValueError):
        sym_eig(np.eye(2), tol=0)
    with pytest.raises(ValueError):
        sym_eig(np.eye(2), method="qr")


class TestWhitener:
    def test_isotropic(self):
        K = 4
        wh = build_whitener(np.eye(K) / K, K)
        np.testing.assert_allclose(np.abs(wh.W), np.sqrt(K) * np.eye(K)[:, np.argmax(np.abs(wh.W), 0)],
                                   atol=1e-12)
        np.testing.assert_allclose(wh.W.T @ (np.eye(K) / K) @ wh.W, np.eye(K), atol=1e-12)

    def test_easy_problem_whitening_identity(self, easy):
        M2 = easy_m2(easy)
        wh = build_whitener(M2, 3)
        np.testing.assert_allclose(wh.W.T @ M2 @ wh.W, np.eye(3), atol=1e-8)

    def test_rank_one_input(self):
        M2 = np.zeros((2, 2))
        M2[0, 0] = 1.0
        with pytest.raises(RankDeficiencyError) as info:
            build_whitener(M2, 2)
        assert (info.value.rank, info.value.requested) == (1, 2)

    def test_explicit_rank_threshold(self):
        with pytest.raises(RankDeficiencyError):
            build_whitener(np.diag([1.0, 0.5]), 2, eps_rank=0.6)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(0, 5))
    def test_random_rank_k_whitening(self, seed, K, extra):
        rng = np.random.default_rng(seed)
        d = K + extra
        U = rng.dirichlet(np.ones(d), size=K).T
        omega = rng.dirichlet(np.ones(K)) + 0.05
        M2 = (U * omega) @ U.T
        if np.linalg.svd(M2, compute_uv=False)[K - 1] < 1e-6:
            return
        wh = build_whitener(M2, K)
        assert np.linalg.norm(wh.W.T @ M2 @ wh.W - np.eye(K)) <= 1e-6
        np.testing.assert_allclose(wh.W.T @ wh.pinv_transpose(), np.eye(K), atol=1e-10)


class TestUnwhiten:
    def test_identity_whitener(self):
        wh = Whitener(np.eye(3), np.eye(3), np.ones(3))
        v = np.array([0.2, -0.3, 0.5])
        np.testing.assert_array_equal(unwhiten(wh, v), v)

    def test_pseudoinverse_round_trip(self):
        rng = np.random.default_rng(2)
        M = random_symmetric(rng, 6)
        M = M @ M.T
        wh = build_whitener(M, 3)
        v = rng.standard_normal(3)
        np.testing.assert_allclose(wh.W.T @ unwhiten(wh, v), v, atol=1e-10)

    def test_dimension_mismatch(self):
        wh = Whitener(np.eye(3), np.eye(3), np.ones(3))
        with pytest.raises(DimensionError):
            unwhiten(wh, np.ones(2))

    def test_recovers_true_word_distributions(self, easy):
        wh = build_whitener(easy_m2(easy), 3)
        Y = wh.W.T @ easy.U
        T = np.einsum("c,ic,jc,kc->ijk", easy.omega, Y, Y, Y)
        f = tensor_power_method(T, 3, PowerConfig(), np.random.default_rng(0))
        cols = np.column_stack([unwhiten(wh, f.vs[:, i], f.lambdas[i]) for i in range(3)])
        # descending lambda means ascending omega: topics 0, 1, 2
        np.testing.assert_allclose(cols, easy.U, atol=1e-6)
