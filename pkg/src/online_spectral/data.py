"""Document streams: synthetic single-topic problems, oracle mode and text corpora.

Synthetic problems follow the concentrated model: topic j emits word j
with probability ``p`` and every other word with probability
``(1 - p) / (d - 1)``.  Topics are drawn i.i.d. from ``prior``
(stochastic) or follow a fixed repeating block ``schedule``
(non-stochastic, e.g. 15 docs of topic 0, 35 of topic 1, 50 of topic 2).
"""

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import TopicParams
from .moments import ExactModel, PriorTable, make_rng

KINDS = ("stochastic", "nonstochastic", "oracle", "corpus")
POLICIES = ("first3", "rand3")

EASY_P = 0.9
HARD_P = 0.7
DEFAULT_PRIOR = (0.15, 0.35, 0.5)
DEFAULT_SCHEDULE = (15, 35, 50)


class ConfigError(ValueError):
    pass


class CorpusError(OSError):
    pass


@dataclass(frozen=True)
class StreamConfig:
    kind: str = "stochastic"
    K: int = 3
    d: int = 3
    n: int = 1000
    p: float = HARD_P
    prior: tuple = DEFAULT_PRIOR
    schedule: Optional[tuple] = None
    seed: int = 0
    corpus: Optional[str] = None
    policy: str = "first3"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"stream kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1 or self.K < 1 or self.d < 1:
            raise ConfigError("n, K and d must be positive")
        if self.kind == "corpus":
            if not self.corpus:
                raise ConfigError("corpus streams need a corpus path")
            if self.policy not in POLICIES:
                raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
            return
        if self.d < self.K:
            raise ConfigError(f"need d >= K, got d={self.d}, K={self.K}")
        if self.d > 1 and not 1.0 / self.d < self.p <= 1.0:
            raise ConfigError(f"p must lie in (1/d, 1], got {self.p}")
        prior = np.asarray(self.prior, dtype=float)
        if prior.shape != (self.K,) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise ConfigError(f"prior must be a length-{self.K} probability vector, got {self.prior}")
        if self.kind == "nonstochastic" and self.schedule is None:
            raise ConfigError("non-stochastic streams need a schedule")
        if self.schedule is not None:
            s = self.schedule
            if len(s) != self.K or any(c < 0 for c in s) or sum(s) < 1:
                raise ConfigError(f"schedule must hold {self.K} nonnegative counts, got {s}")

    @property
    def params(self):
        return TopicParams.concentrated(self.prior, self.p, self.d)


@dataclass
class Stream:
    """A generated stream: word triples plus what generated them.

    ``priors[t - 1]`` is the exact topic prior at step ``t`` (oracle
    information; learners never see it).
    """

    triples: np.ndarray
    topics: np.ndarray
    priors: np.ndarray
    params: TopicParams

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        return zip(map(tuple, self.triples), self.topics)

    def exact_model(self):
        return ExactModel(self.params, PriorTable(self.priors))

    def running_average_prior(self, t):
        """Average of the exact priors over steps 1..t."""
        return self.priors[:t].mean(axis=0)


def sample_words(params, topics, rng, length=3):
    """Draw ``length`` conditionally i.i.d. words for each topic label."""
    cdf = np.cumsum(params.U, axis=0)
    cdf[-1] = 1.0
    u = rng.random((len(topics), length))
    return np.sum(u[:, :, None] > cdf[:, topics].T[:, None, :], axis=2).astype(np.int64)


def schedule_topics(schedule, n):
    block = np.repeat(np.arange(len(schedule)), schedule)
    return np.resize(block, n)


def gen_stochastic(cfg):
    if cfg.kind not in ("stochastic", "oracle"):
        raise ConfigError(f"gen_stochastic needs a stochastic config, got {cfg.kind!r}")
    rng = make_rng(cfg.seed)
    params = cfg.params
    topics = rng.choice(cfg.K, size=cfg.n, p=params.omega)
    words = sample_words(params, topics, rng)
    priors = np.tile(params.omega, (cfg.n, 1))
    return Stream(words, topics, priors, params)


def gen_nonstochastic(cfg):
    if cfg.schedule is None:
        raise ConfigError("gen_nonstochastic needs a schedule")
    rng = make_rng(cfg.seed)
    params = cfg.params
    topics = schedule_topics(cfg.schedule, cfg.n)
    words = sample_words(params, topics, rng)
    return Stream(words, topics, np.eye(cfg.K)[topics], params)


def oracle_stream(cfg):
    """A synthetic stream paired with the exact per-step distributions.

    With a schedule the topic at each step is known exactly, so the
    per-step prior is a point mass; otherwise it is the stationary prior.
    """
    if cfg.schedule is not None:
        return gen_nonstochastic(cfg)
    return gen_stochastic(cfg)


@dataclass
class Corpus:
    triples: np.ndarray
    vocab: list
    counts: list
    n_docs: int
    skipped: int
    doc_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def d(self):
        return len(self.vocab)

    def write_manifest(self, path):
        """Vocabulary manifest, one ``index<TAB>token<TAB>count`` line per word."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, (tok, c) in enumerate(zip(self.vocab, self.counts)):
                fh.write(f"{i}\t{tok}\t{c}\n")


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                yield line.split()
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusError(f"cannot read corpus {path}: {e}") from e


def build_vocabulary(path, d):
    """Top-``d`` tokens by frequency, ties broken lexicographically."""
    freq = Counter()
    for tokens in _read_lines(path):
        freq.update(tokens)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:d]
    return [tok for tok, _ in ranked], [c for _, c in ranked]


def load_corpus(path, d, policy="first3", seed=0):
    """Two passes over a one-document-per-line file: vocabulary, then triples.

    ``first3`` keeps the first three in-vocabulary tokens of a document,
    ``rand3`` three distinct in-vocabulary positions drawn with a seeded
    generator.  Documents with fewer than three in-vocabulary tokens are
    skipped and counted.
    """
    if policy not in POLICIES:
        raise ConfigError(f"policy must be one of {POLICIES}, got {policy!r}")
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    vocab, counts = build_vocabulary(path, d)
    if not vocab:
        raise CorpusError(f"empty vocabulary: {path} holds no tokens")
    index = {tok: i for i, tok in enumerate(vocab)}
    rng = make_rng(seed)
    triples, doc_ids = [], []
    n_docs = skipped = 0
    for tokens in _read_lines(path):
        ids = [index[tok] for tok in tokens if tok in index]
        if len(ids) < 3:
            skipped += 1
        else:
            if policy == "first3":
                triples.append(ids[:3])
            else:
                triples.append([ids[j] for j in rng.choice(len(ids), size=3, replace=False)])
            doc_ids.append(n_docs)
        n_docs += 1
    if not triples:
        raise CorpusError(
            f"no document in {path} has 3 in-vocabulary tokens ({n_docs} read, {skipped} skipped)"
        )
    return Corpus(
        np.asarray(triples, dtype=np.int64).reshape(-1, 3), vocab, counts, n_docs, skipped,
        np.asarray(doc_ids, dtype=np.int64),
    )


def make_stream(cfg):
    """The synthetic stream a config describes (corpus configs use :func:`load_corpus`)."""
    if cfg.kind == "stochastic":
        return gen_stochastic(cfg)
    if cfg.kind == "nonstochastic":
        return gen_nonstochastic(cfg)
    if cfg.kind == "oracle":
        return oracle_stream(cfg)
    raise ConfigError("corpus streams are loaded with load_corpus")
