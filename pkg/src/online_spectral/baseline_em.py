"""Stepwise EM for the single-topic mixture of multinomials.

Sufficient statistics are kept on the probability scale: ``s_omega[c]``
is the expected topic frequency and ``s_u[w, c]`` the expected fraction
of word tokens that are ``w`` and come from topic ``c``.  After each full
mini-batch the statistics move toward the batch estimate with step size
eta_k = (k + 2) ** -alpha.
"""

import numpy as np

from .model import TopicParams
from .moments import make_rng
from .tensor_core import as_triples

SMOOTHING = 1e-8


def log_likelihoods(params, docs):
    """log P(doc | topic) for every doc (rows) and topic (columns)."""
    docs = as_triples(docs, params.d)
    with np.errstate(divide="ignore"):
        logU = np.log(params.U)
    return logU[docs].sum(axis=1)


def posteriors(params, docs):
    """Topic posteriors, one row per document; uniform where every topic has zero mass."""
    with np.errstate(divide="ignore"):
        logq = np.log(params.omega) + log_likelihoods(params, docs)
    top = logq.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    top[dead] = 0.0
    q = np.exp(logq - top)
    q[dead] = 1.0
    return q / q.sum(axis=1, keepdims=True)


def posterior(params, x):
    return posteriors(params, [getattr(x, "words", x)])[0]


def batch_statistics(params, docs):
    """Expected (topic, word-topic) statistics of a batch on the probability scale."""
    docs = as_triples(docs, params.d)
    q = posteriors(params, docs)
    s_omega = q.mean(axis=0)
    s_u = np.zeros((params.d, params.K))
    for slot in range(docs.shape[1]):
        np.add.at(s_u, docs[:, slot], q)
    return s_omega, s_u / (docs.shape[1] * len(docs))


def step_size(k, alpha):
    return (k + 2.0) ** -alpha


class StepwiseEM:
    """Online EM with mini-batches of ``minibatch`` documents."""

    def __init__(self, d, K, alpha=0.7, minibatch=1, seed=0, delta=SMOOTHING):
        if not 0.5 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0.5, 1], got {alpha}")
        if minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        rng = make_rng(seed)
        U = rng.dirichlet(np.ones(d), size=K).T
        self.d = d
        self.K = K
        self.alpha = alpha
        self.minibatch = minibatch
        self.delta = delta
        self.s_omega = np.full(K, 1.0 / K)
        self.s_u = U * self.s_omega
        self.k = 0
        self.pending = []

    @property
    def params(self):
        omega = self.s_omega + self.delta
        U = self.s_u + self.delta
        return TopicParams(omega / omega.sum(), U / U.sum(axis=0))

    def observe(self, x):
        """Buffer ``x``; update the statistics once the mini-batch is full."""
        self.pending.append(tuple(getattr(x, "words", x)))
        if len(self.pending) == self.minibatch:
            s_omega, s_u = batch_statistics(self.params, self.pending)
            eta = step_size(self.k, self.alpha)
            self.s_omega = (1.0 - eta) * self.s_omega + eta * s_omega
            self.s_u = (1.0 - eta) * self.s_u + eta * s_u
            self.k += 1
            self.pending = []
        return self.params

    def step(self, x):
        """Return the current model (the prediction for ``x``), then learn from ``x``."""
        params = self.params
        self.observe(x)
        return params

