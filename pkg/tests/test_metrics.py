import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from online_spectral.data import StreamConfig, gen_nonstochastic, gen_stochastic
from online_spectral.linalg import Whitener
from online_spectral.model import TopicParams
from online_spectral.moments import ExactModel, Reservoir, empirical_whitened_t3, stationary
from online_spectral.metrics import (
    dense_loss,
    hindsight_tensor,
    inner,
    loss,
    losses,
    nll,
    nll_metric,
    recovery_metric,
    regret_bound,
    regret_trace,
    running_average,
    sq_distance,
)
from online_spectral.tensor_core import DimensionError, rank_k_tensor


def dense(p):
    return rank_k_tensor(p.omega, p.U)


def random_probability_tensor(rng, d):
    M = rng.random((d, d, d)) ** 3
    return M / M.sum()


class TestLoss:
    def test_perfect_prediction(self):
        p = TopicParams(np.ones(1), np.eye(3)[:, [1]])
        assert loss(p, (1, 1, 1)) == pytest.approx(0.0, abs=1e-15)

    def test_zero_tensor(self):
        assert loss(np.zeros((3, 3, 3)), (0, 1, 2)) == 1.0
        assert dense_loss(np.zeros((3, 3, 3)), (0, 1, 2)) == 1.0

    def test_uniform_single_topic(self):
        assert loss(TopicParams.uniform(3, 1), (2, 0, 1)) == pytest.approx(26 / 27, abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 4))
    def test_implicit_matches_dense(self, seed, d, K):
        rng = np.random.default_rng(seed)
        p = TopicParams(rng.dirichlet(np.ones(K)), rng.dirichlet(np.ones(d), size=K).T)
        q = TopicParams(rng.dirichlet(np.ones(K)), rng.dirichlet(np.ones(d), size=K).T)
        x = tuple(rng.integers(0, d, 3))
        assert abs(loss(p, x) - dense_loss(dense(p), x)) <= 1e-10
        assert abs(sq_distance(p, q) - np.sum((dense(p) - dense(q)) ** 2)) <= 1e-10
        assert abs(inner(p, q) - np.sum(dense(p) * dense(q))) <= 1e-10

    def test_vectorized_losses(self, easy):
        docs = np.random.default_rng(0).integers(0, 3, (20, 3))
        np.testing.assert_allclose(losses(easy, docs), [loss(easy, x) for x in docs], atol=1e-15)

    def test_dense_guard(self):
        with pytest.raises(DimensionError):
            dense_loss(np.zeros((33, 33, 33)), (0, 0, 0))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_loss_gap_bounded_by_distance(self, seed):
        rng = np.random.default_rng(seed)
        M, M2 = random_probability_tensor(rng, 3), random_probability_tensor(rng, 3)
        x = tuple(rng.integers(0, 3, 3))
        assert loss(M, x) - loss(M2, x) <= 4 * np.linalg.norm(M - M2) + 1e-12


class TestHindsight:
    def test_stationary_is_independent_of_horizon(self, easy):
        model = ExactModel(easy, stationary(easy.omega))
        a = hindsight_tensor(model, 10, dense=True)
        b = hindsight_tensor(model, 1000, dense=True)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_schedule_matches_stationary_over_whole_blocks(self, easy):
        s = gen_nonstochastic(StreamConfig(kind="nonstochastic", schedule=(15, 35, 50), n=300, p=0.9))
        a = hindsight_tensor(s.exact_model(), 300, dense=True)
        b = hindsight_tensor(ExactModel(easy, stationary(easy.omega)), 300, dense=True)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_fixed_params_pass_through(self, easy):
        assert hindsight_tensor(easy) is easy

    def test_expected_loss_gradient_vanishes_at_average(self):
        # sum_t E[l_t(M)] = sum_t (|M|^2 - 2 <M, P_t> + 1), gradient 2 n M - 2 sum_t P_t
        rng = np.random.default_rng(0)
        P = [random_probability_tensor(rng, 3) for _ in range(50)]
        Mbar = np.mean(P, axis=0)
        grad = 2 * len(P) * Mbar - 2 * np.sum(P, axis=0)
        assert np.max(np.abs(grad)) <= 1e-10

        def expected(M):
            return sum(np.sum(M * M) - 2 * np.sum(M * Pt) + 1 for Pt in P)

        base = expected(Mbar)
        for idx in [(0, 0, 0), (1, 2, 0), (2, 2, 2)]:
            E = np.zeros((3, 3, 3))
            E[idx] = 1e-3
            assert expected(Mbar + E) > base and expected(Mbar - E) > base

    def test_average_beats_perturbations_on_a_long_sample(self, easy):
        s = gen_stochastic(StreamConfig(n=50_000, p=0.9, seed=0))
        Mbar = dense(easy)
        counts = np.zeros((3, 3, 3))
        np.add.at(counts, tuple(s.triples.T), 1)
        emp = counts / len(s)

        def mean_loss(M):
            return np.sum(M * M) - 2 * np.sum(M * emp) + 1

        base = mean_loss(Mbar)
        for idx in [(0, 0, 0), (1, 1, 1), (0, 1, 2)]:
            E = np.zeros((3, 3, 3))
            E[idx] = 0.02
            assert mean_loss(Mbar + E) > base and mean_loss(Mbar - E) > base


class TestRegret:
    def test_identical_losses(self):
        np.testing.assert_array_equal(regret_trace([0.3, 0.4], [0.3, 0.4]), [0, 0])

    def test_single_gap(self):
        assert regret_trace([0.9], [0.4])[-1] == pytest.approx(0.5)

    def test_bound(self):
        assert regret_bound(np.e, 3) == pytest.approx(4 * np.sqrt(27))

    def test_hindsight_leader_lower_bound(self):
        # cumulative expected loss of the final average is at least that of the running averages
        for seed in range(100):
            rng = np.random.default_rng(seed)
            U = rng.dirichlet(np.ones(3), size=3).T
            priors = rng.dirichlet(np.ones(3), size=40)
            P = [rank_k_tensor(w, U) for w in priors]
            running = np.cumsum(P, axis=0) / np.arange(1, 41)[:, None, None, None]

            def expected(M, Pt):
                return np.sum(M * M) - 2 * np.sum(M * Pt) + 1

            final = sum(expected(running[-1], Pt) for Pt in P)
            leader = sum(expected(running[t], P[t]) for t in range(40))
            assert final >= leader - 1e-12


class TestNll:
    def test_uniform(self):
        assert nll(TopicParams.uniform(3, 2), (0, 1, 2)) == pytest.approx(3 * np.log(3))
        assert 3 * np.log(3) == pytest.approx(3.2958, abs=1e-4)

    def test_zero_likelihood_needs_smoothing(self):
        p = TopicParams(np.ones(1), np.eye(2)[:, [0]])
        assert nll(p, (1, 1, 1)) == np.inf
        assert np.isfinite(nll(p, (1, 1, 1), delta=1e-8))

    def test_running_average_skips_first_step(self):
        np.testing.assert_allclose(running_average([100.0, 2.0, 4.0]), [0, 1, 2])

    def test_metric_alignment(self, easy):
        with pytest.raises(ValueError):
            nll_metric([easy], [(0, 0, 0), (1, 1, 1)])

    def test_metric_values(self, easy):
        docs = [(0, 0, 0), (1, 2, 0), (2, 2, 2)]
        expected = (nll(easy, docs[1]) + nll(easy, docs[2])) / 3
        assert nll_metric([easy] * 3, docs, delta=0.0) == pytest.approx(expected)


class TestRecovery:
    def test_truth_has_zero_error(self, easy):
        assert recovery_metric([easy] * 5, easy) == pytest.approx(0.0, abs=1e-15)

    def test_uniform_error(self, easy):
        u = TopicParams.uniform(3, 3)
        expected = np.sum((dense(easy) - dense(u)) ** 2) * 2 / 3
        assert recovery_metric([easy, u, u], easy) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("eps", [0.2, 0.3])
def test_reservoir_size_rule_keeps_moments_close(eps, easy):
    d, n = 3, 1000
    m = int(np.ceil(eps**-2 * np.log(d**3 * n)))
    exact = dense(easy)
    identity = Whitener(np.eye(3), np.eye(3), np.ones(3))
    misses = 0
    for seed in range(200):
        s = gen_stochastic(StreamConfig(n=n, p=0.9, seed=seed))
        r = Reservoir(m, seed=seed).extend(s.triples)
        M = empirical_whitened_t3(r.items, identity)
        misses += np.max(np.abs(M - exact)) > eps
    assert misses / 200 < 0.05
