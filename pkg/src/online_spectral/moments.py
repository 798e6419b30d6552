"""Reservoir sampling and moment construction.

Empirical moments are symmetrized over all six slot orderings of each
word triple, so a triple ``(a, b, c)`` contributes the ordered pairs
``(a,b), (b,a), (a,c), (c,a), (b,c), (c,b)`` to M2 and all six orderings
to the whitened third moment.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import TopicParams
from .tensor_core import (
    SLOT_PAIRS,
    as_triples,
    check_dense_dim,
    rank_k_tensor,
    symmetrize,
    symmetrize_matrix,
)

RULES = ("uniform", "lagged")


def make_rng(seed):
    """The package-wide PRNG: numpy's PCG64 seeded through ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(seed))


class Reservoir:
    """Fixed-capacity uniform sample of a stream of word triples.

    ``rule="uniform"`` accepts the t-th element (1-based) with probability
    m/t, which keeps every element seen so far in the sample with
    probability m/t.  ``rule="lagged"`` accepts with probability m/(t-1);
    that rule keeps the first m elements with probability (m-1)/(t-1)
    and later ones with m/(t-1).

    With ``d`` given, integer pair counts for M2 are maintained
    incrementally and :meth:`m2` avoids a full recompute.
    """

    def __init__(self, capacity, seed=None, rule="uniform", d=None):
        if capacity < 1:
            raise ValueError("reservoir capacity must be >= 1")
        if rule not in RULES:
            raise ValueError(f"unknown acceptance rule {rule!r}; expected one of {RULES}")
        self.capacity = capacity
        self.rule = rule
        self.rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
        self.seen = 0
        self._items = np.zeros((capacity, 3), dtype=np.int64)
        self._size = 0
        self.d = d
        self._pairs = None if d is None else np.zeros((d, d), dtype=np.int64)

    def __len__(self):
        return self._size

    @property
    def items(self):
        return self._items[: self._size].copy()

    def view(self):
        """Read-only view of the held triples (no copy)."""
        v = self._items[: self._size]
        v.flags.writeable = False
        return v

    def acceptance_probability(self, t):
        if t <= self.capacity:
            return 1.0
        denom = t if self.rule == "uniform" else t - 1
        return self.capacity / denom

    def update(self, x):
        """Offer triple ``x`` to the reservoir.

        Returns the slot it was written to, or ``None`` if it was rejected.
        """
        x = np.asarray(getattr(x, "words", x), dtype=np.int64)
        self.seen += 1
        t = self.seen
        if t <= self.capacity:
            slot = self._size
            self._size += 1
        else:
            a = self.rng.random()
            if a > self.acceptance_probability(t):
                return None
            slot = int(self.rng.integers(self.capacity))
            if self._pairs is not None:
                _add_pairs(self._pairs, self._items[slot : slot + 1], -1)
        self._items[slot] = x
        if self._pairs is not None:
            _add_pairs(self._pairs, x[None, :], 1)
        return slot

    def extend(self, xs):
        for x in as_triples(xs):
            self.update(x)
        return self

    def m2(self):
        """Second moment of the held triples from the incremental pair counts."""
        if self._pairs is None:
            raise RuntimeError("reservoir was built without d; use empirical_m2")
        if self._size == 0:
            raise ValueError("empty reservoir")
        return self._pairs / (6.0 * self._size)


def _pair_indices(samples, d):
    a = np.concatenate([samples[:, i] for i, _ in SLOT_PAIRS])
    b = np.concatenate([samples[:, j] for _, j in SLOT_PAIRS])
    return a * d + b


def _add_pairs(counts, samples, sign):
    d = counts.shape[0]
    flat = np.bincount(_pair_indices(samples, d), minlength=d * d)
    counts += sign * flat.reshape(d, d)


def empirical_m2(samples, d, weights=None):
    """Symmetrized second moment of word triples.

    ``weights`` (one per triple, nonnegative) turns the plain average into
    a weighted one; with exact triple probabilities as weights this gives
    the exact M2.
    """
    samples = as_triples(samples, d)
    if len(samples) == 0:
        raise ValueError("empirical_m2 needs at least one sample")
    if weights is None:
        counts = np.bincount(_pair_indices(samples, d), minlength=d * d).astype(float)
        total = 6.0 * len(samples)
    else:
        weights = np.asarray(weights, dtype=float)
        counts = np.bincount(
            _pair_indices(samples, d), weights=np.tile(weights, len(SLOT_PAIRS)), minlength=d * d
        )
        total = 6.0 * weights.sum()
    return symmetrize_matrix(counts.reshape(d, d) / total)


def empirical_whitened_t3(samples, wh, weights=None):
    """Symmetrized third moment of whitened triples, a K x K x K tensor.

    W^T e_w is row ``w`` of W, so whitening a triple is three row lookups.
    """
    samples = as_triples(samples, wh.d)
    if len(samples) == 0:
        raise ValueError("empirical_whitened_t3 needs at least one sample")
    A, B, C = (wh.W[samples[:, i]] for i in range(3))
    if weights is None:
        S = np.einsum("ni,nj,nk->ijk", A, B, C, optimize=True) / len(samples)
    else:
        weights = np.asarray(weights, dtype=float)
        S = np.einsum("n,ni,nj,nk->ijk", weights, A, B, C, optimize=True) / weights.sum()
    return symmetrize(S)


class PriorTable:
    """Prior schedule read from a table, one row per 1-based step.

    A plain class rather than a closure so models pickle across processes.
    """

    def __init__(self, priors):
        self.priors = np.asarray(priors, dtype=float)

    def __call__(self, t):
        return self.priors[t - 1]


class Stationary:
    def __init__(self, prior):
        self.prior = np.asarray(prior, dtype=float)

    def __call__(self, t):
        return self.prior


def stationary(prior):
    return Stationary(prior)


@dataclass(frozen=True, eq=False)
class ExactModel:
    """Fixed word distributions with a (possibly time-varying) topic prior.

    ``prior_schedule(t)`` returns the topic prior at 1-based step ``t``.
    """

    params: TopicParams
    prior_schedule: Callable[[int], np.ndarray]

    def prior(self, t):
        p = np.asarray(self.prior_schedule(t), dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"prior at step {t} is not on the simplex: {p}")
        return p

    def average_prior(self, steps):
        steps = list(steps)
        if not steps:
            raise ValueError("empty step range")
        return np.mean([self.prior(t) for t in steps], axis=0)

    def averaged_params(self, steps):
        """TopicParams whose implied tensor is the step-averaged distribution."""
        return TopicParams(self.average_prior(steps), self.params.U)


def exact_m2(model, steps):
    omega = model.average_prior(steps)
    U = model.params.U
    return symmetrize_matrix((U * omega) @ U.T)


def exact_m3(model, steps):
    check_dense_dim(model.params.d)
    omega = model.average_prior(steps)
    return symmetrize(rank_k_tensor(omega, model.params.U))


def exact_triple_probabilities(params):
    """All d^3 triples with their probabilities under ``params`` (small d only)."""
    d = params.d
    check_dense_dim(d)
    P = rank_k_tensor(params.omega, params.U)
    idx = np.indices((d,) * 3).reshape(3, -1).T
    return idx, P[idx[:, 0], idx[:, 1], idx[:, 2]]
