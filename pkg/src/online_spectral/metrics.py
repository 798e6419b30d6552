"""Losses, regret and the two reported metrics.

A model (omega, U) implies the word-triple tensor
M = sum_c omega_c u_c (x) u_c (x) u_c.  Every Frobenius quantity below is
computed from the K x K Gram matrix of word distributions, using
<u_a^(x)3, u_b^(x)3> = (u_a . u_b)^3, so the d^3 tensor is never built.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import TopicParams
from .tensor_core import as_triples, check_dense_dim

NLL_SMOOTHING = 1e-8


@dataclass
class StepMetrics:
    t: int
    loss: float
    nll: float
    recovery_err: float
    cum_regret: Optional[float] = None
    fallback: str = ""


def inner(p, q):
    """<M_p, M_q> for the tensors implied by two models."""
    G = p.U.T @ q.U
    return float(p.omega @ (G**3) @ q.omega)


def sq_norm(p):
    return inner(p, p)


def sq_distance(p, q):
    """||M_p - M_q||_F^2, clipped at zero against rounding."""
    return max(sq_norm(p) + sq_norm(q) - 2.0 * inner(p, q), 0.0)


def entry(p, x):
    i, j, k = getattr(x, "words", x)
    return float(np.sum(p.omega * p.U[i] * p.U[j] * p.U[k]))


def entries(p, docs):
    docs = as_triples(docs, p.d)
    return (p.U[docs[:, 0]] * p.U[docs[:, 1]] * p.U[docs[:, 2]]) @ p.omega


def loss(M, x):
    """||x1 (x) x2 (x) x3 - M||_F^2 for a model or a dense tensor M.

    Expands to ||M||^2 - 2 M[x] + 1 since the observation tensor has a
    single unit entry.
    """
    words = tuple(getattr(x, "words", x))
    if isinstance(M, TopicParams):
        return sq_norm(M) - 2.0 * entry(M, words) + 1.0
    M = np.asarray(M, dtype=float)
    return float(np.sum(M * M)) - 2.0 * float(M[words]) + 1.0


def dense_loss(M, x):
    """The loss evaluated literally on the dense d^3 tensors (small d only)."""
    M = np.asarray(M, dtype=float)
    check_dense_dim(M.shape[0])
    X = np.zeros_like(M)
    X[tuple(getattr(x, "words", x))] = 1.0
    return float(np.sum((X - M) ** 2))


def losses(p, docs):
    """Per-document losses of one model on many documents."""
    return sq_norm(p) - 2.0 * entries(p, docs) + 1.0


def hindsight_params(model, n):
    """Best model in hindsight over steps 1..n: the step-averaged distribution."""
    return model.averaged_params(range(1, n + 1))


def hindsight_tensor(reference, n=None, dense=False):
    """The hindsight tensor, as a model (default) or a dense d^3 array.

    ``reference`` is an :class:`~online_spectral.moments.ExactModel` (the
    exact average over steps 1..n is returned) or fixed TopicParams such
    as an offline spectral fit.
    """
    params = reference if isinstance(reference, TopicParams) else hindsight_params(reference, n)
    if not dense:
        return params
    check_dense_dim(params.d)
    return np.einsum("c,ic,jc,kc->ijk", params.omega, params.U, params.U, params.U)


def regret_trace(alg_losses, hindsight_losses):
    """Cumulative regret R(t) = sum_{s<=t} (l_s(alg) - l_s(hindsight))."""
    return np.cumsum(np.asarray(alg_losses, dtype=float) - np.asarray(hindsight_losses, dtype=float))


def regret_bound(t, d):
    """4 sqrt(d^3) log t."""
    return 4.0 * np.sqrt(float(d) ** 3) * np.log(t)


def nll(p, x, delta=0.0):
    """Negative predictive log-likelihood of one document under ``p``."""
    if delta:
        p = p.smoothed(delta)
    words = list(getattr(x, "words", x))
    lik = float(np.sum(p.omega * np.prod(p.U[words], axis=0)))
    return -np.log(lik) if lik > 0 else np.inf


def running_average(values):
    """(1/t) sum_{s=2..t} values[s] for t = 1..n (the first step is skipped)."""
    values = np.asarray(values, dtype=float).copy()
    if values.size:
        values[0] = 0.0
    return np.cumsum(values) / np.arange(1, values.size + 1)


def nll_metric(params_trace, docs, delta=NLL_SMOOTHING):
    """Average negative predictive log-likelihood up to step n.

    ``params_trace[t]`` must be the model learned before ``docs[t]``.
    """
    docs = as_triples(docs)
    if len(params_trace) != len(docs):
        raise ValueError("params trace and docs are not aligned")
    return float(running_average([nll(p, x, delta) for p, x in zip(params_trace, docs)])[-1])


def recovery_metric(params_trace, truth):
    """Average ||M_truth - M_t||_F^2 up to step n."""
    return float(running_average([sq_distance(truth, p) for p in params_trace])[-1])
