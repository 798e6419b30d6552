"""Experiment specs and the seeded experiment runner.

An experiment file is INI-style text (``[section]`` headers, ``key = value``
lines, ``#`` or ``;`` comments).  Grammar::

    [stream]
    kind      = stochastic | nonstochastic | oracle | corpus
    topics    = <int K>                       (default 3)
    vocab     = <int d>                       (default 3; corpus: vocabulary size)
    p         = <float in (1/d, 1]>           (default 0.7)
    prior     = <K comma-separated floats>    (default 0.15, 0.35, 0.5)
    schedule  = <K comma-separated ints>      (per-block topic counts)
    corpus    = <path>                        (corpus streams only)
    policy    = first3 | rand3                (corpus streams only)

    [run]
    n         = <int horizon>                 (default 1000)
    seeds     = <list, e.g. 0-9 or 1,4,7>     (default 0)
    output    = <directory>                   (default results)
    figures   = yes | no                      (default no)
    jobs      = <int worker processes>        (default 1)

    [spectral] / [spectral:<name>]
    reservoir  = <int m>                      (default n)
    restarts   = <int>  iterations = <int>  tol = <float>
    rule       = uniform | lagged             (default uniform)

    [em] / [em:<name>]
    alpha      = <floats in [0.5, 1]>         (default 0.7)
    minibatch  = <ints>                       (default 1)

    [oracle-spectral] / [oracle-spectral:<name>]
    restarts / iterations / tol as above

``alpha`` and ``minibatch`` accept comma lists; each combination becomes
its own algorithm labelled ``em_a<alpha>_b<minibatch>``.
"""

import configparser
import csv
import io
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import metrics
from .baseline_em import StepwiseEM
from .data import ConfigError, StreamConfig, load_corpus, make_stream
from .model import TopicParams
from .spectral import OracleSpectralLearner, PowerConfig, SpectralLearner, offline_recover

CSV_HEADER = ("t", "loss", "nll", "recovery_err", "cum_regret", "fallback")
ALGORITHM_TYPES = ("spectral", "em", "oracle-spectral")

_STREAM_KEYS = {"kind", "topics", "vocab", "p", "prior", "schedule", "corpus", "policy"}
_RUN_KEYS = {"n", "seeds", "output", "figures", "jobs"}
_ALG_KEYS = {
    "spectral": {"reservoir", "restarts", "iterations", "tol", "rule"},
    "em": {"alpha", "minibatch"},
    "oracle-spectral": {"restarts", "iterations", "tol"},
}


@dataclass(frozen=True)
class AlgorithmSpec:
    kind: str
    label: str
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    stream: StreamConfig
    algorithms: tuple
    n: int
    seeds: tuple
    output: str = "results"
    figures: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("the experiment lists no algorithms")
        if not self.seeds:
            raise ConfigError("the experiment lists no seeds")
        if self.n < 1:
            raise ConfigError("n must be positive")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate algorithm labels: {labels}")


def _field_error(section, key, message):
    return ConfigError(f"[{section}] {key}: {message}")


def _get(section, key, cast, default=None):
    if key not in section:
        return default
    raw = section[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as e:
        raise _field_error(section.name, key, f"cannot parse {raw!r} ({e})") from None


def _floats(raw):
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw):
    return tuple(int(v) for v in raw.split(",") if v.strip())


def parse_seeds(raw):
    """Seeds as ``0-9``, ``1,4,7`` or a mix such as ``0-2,10``."""
    seeds = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def _bool(raw):
    value = raw.strip().lower()
    if value in ("1", "yes", "true", "on"):
        return True
    if value in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes or no")


def _check_keys(section, allowed):
    unknown = set(section.keys()) - allowed
    if unknown:
        raise _field_error(section.name, sorted(unknown)[0], "unknown key")


def _fmt(x):
    return ("%g" % x) if isinstance(x, float) else str(x)


def _algorithms(parser, n):
    algorithms = []
    for name in parser.sections():
        kind = name.split(":", 1)[0].strip()
        if name in ("stream", "run"):
            continue
        if kind not in ALGORITHM_TYPES:
            raise ConfigError(f"[{name}]: unknown section; algorithms are {ALGORITHM_TYPES}")
        sec = parser[name]
        _check_keys(sec, _ALG_KEYS[kind])
        suffix = name.split(":", 1)[1].strip() if ":" in name else ""
        if kind == "em":
            alphas = _get(sec, "alpha", _floats, (0.7,))
            batches = _get(sec, "minibatch", _ints, (1,))
            for a, b in product(alphas, batches):
                if not 0.5 <= a <= 1.0:
                    raise _field_error(name, "alpha", f"{a} is outside [0.5, 1]")
                if b < 1:
                    raise _field_error(name, "minibatch", f"{b} is not positive")
                label = f"em_a{_fmt(a)}_b{b}" + (f"_{suffix}" if suffix else "")
                algorithms.append(AlgorithmSpec("em", label, {"alpha": a, "minibatch": b}))
            continue
        options = {
            "restarts": _get(sec, "restarts", int, 50),
            "iterations": _get(sec, "iterations", int, 100),
            "tol": _get(sec, "tol", float, 1e-10),
        }
        try:
            PowerConfig(options["restarts"], options["iterations"], options["tol"])
        except ValueError as e:
            raise ConfigError(f"[{name}]: {e}") from None
        if kind == "spectral":
            options["reservoir"] = _get(sec, "reservoir", int, n)
            options["rule"] = _get(sec, "rule", str, "uniform")
            if options["reservoir"] < 1:
                raise _field_error(name, "reservoir", "must be positive")
            if options["rule"] not in ("uniform", "lagged"):
                raise _field_error(name, "rule", "expected uniform or lagged")
        algorithms.append(AlgorithmSpec(kind, kind + (f"_{suffix}" if suffix else ""), options))
    return tuple(algorithms)


def parse_spec(text, overrides=(), source="<spec>"):
    """Parse experiment text; ``overrides`` are ``section.key=value`` strings."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().rpartition(".")
        if not sep or not dot or not section:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key.strip()] = value.strip()
    if not parser.has_section("stream"):
        raise ConfigError("missing [stream] section")
    stream, run = parser["stream"], parser["run"] if parser.has_section("run") else {}
    _check_keys(stream, _STREAM_KEYS)
    if run:
        _check_keys(run, _RUN_KEYS)
    n = _get(run, "n", int, 1000) if run else 1000
    try:
        cfg = StreamConfig(
            kind=_get(stream, "kind", str.strip, "stochastic"),
            K=_get(stream, "topics", int, 3),
            d=_get(stream, "vocab", int, 3),
            n=n,
            p=_get(stream, "p", float, 0.7),
            prior=_get(stream, "prior", _floats, (0.15, 0.35, 0.5)),
            schedule=_get(stream, "schedule", _ints, None),
            corpus=_get(stream, "corpus", str.strip, None),
            policy=_get(stream, "policy", str.strip, "first3"),
        )
    except ConfigError as e:
        raise ConfigError(f"[stream] {e}") from None
    return ExperimentSpec(
        stream=cfg,
        algorithms=_algorithms(parser, n),
        n=n,
        seeds=_get(run, "seeds", parse_seeds, (0,)) if run else (0,),
        output=_get(run, "output", str.strip, "results") if run else "results",
        figures=_get(run, "figures", _bool, False) if run else False,
        jobs=_get(run, "jobs", int, 1) if run else 1,
    )


def load_spec(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), overrides, source=str(path))


@dataclass
class Reference:
    """What one seed's cell is scored against."""

    triples: np.ndarray
    truth: TopicParams
    d: int
    K: int
    exact_model: object = None
    hindsight: TopicParams = None


def build_reference(spec, seed, corpus_truth=None, corpus=None):
    cfg = spec.stream
    if cfg.kind == "corpus":
        triples = corpus.triples[: spec.n]
        return Reference(triples, corpus_truth, corpus.d, cfg.K)
    stream = make_stream(replace(cfg, n=spec.n, seed=seed))
    ref = Reference(stream.triples, stream.params, cfg.d, cfg.K, stream.exact_model())
    if cfg.kind == "oracle":
        ref.hindsight = metrics.hindsight_params(ref.exact_model, len(stream))
    return ref


def make_learner(alg, ref, seed):
    opts = alg.options
    if alg.kind == "em":
        return StepwiseEM(ref.d, ref.K, opts["alpha"], opts["minibatch"], seed=seed)
    pm = PowerConfig(opts["restarts"], opts["iterations"], opts["tol"])
    if alg.kind == "spectral":
        return SpectralLearner(ref.d, ref.K, opts["reservoir"], pm, seed=seed, rule=opts["rule"])
    if ref.exact_model is None:
        raise ConfigError("oracle-spectral needs a synthetic stream with known distributions")
    return OracleSpectralLearner(ref.exact_model, pm, seed=seed)


def run_cell(alg, ref, seed):
    """Stream once through ``ref.triples``; returns a list of StepMetrics."""
    learner = make_learner(alg, ref, seed)
    delta = 0.0 if alg.kind == "em" else metrics.NLL_SMOOTHING
    rows = []
    regret = 0.0
    for t, x in enumerate(ref.triples, start=1):
        out = learner.step(x)
        params, fallback = (out[0], out[1].fallback) if isinstance(out, tuple) else (out, "")
        loss = metrics.loss(params, x)
        cum = None
        if ref.hindsight is not None:
            regret += loss - metrics.loss(ref.hindsight, x)
            cum = regret
        rows.append(
            metrics.StepMetrics(
                t=t,
                loss=loss,
                nll=metrics.nll(params, x, delta),
                recovery_err=metrics.sq_distance(ref.truth, params),
                cum_regret=cum,
                fallback=fallback,
            )
        )
    return rows


def _num(x):
    return "" if x is None else repr(float(x))


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.t, _num(r.loss), _num(r.nll), _num(r.recovery_err), _num(r.cum_regret), r.fallback])
    return buf.getvalue()


def mean_rows(per_seed):
    """Seed-averaged rows; ``fallback`` becomes the number of seeds that fell back."""
    out = []
    for step in zip(*per_seed):
        regrets = [r.cum_regret for r in step]
        out.append(
            metrics.StepMetrics(
                t=step[0].t,
                loss=float(np.mean([r.loss for r in step])),
                nll=float(np.mean([r.nll for r in step])),
                recovery_err=float(np.mean([r.recovery_err for r in step])),
                cum_regret=None if regrets[0] is None else float(np.mean(regrets)),
                fallback=str(sum(1 for r in step if r.fallback)),
            )
        )
    return out


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def summarize(rows):
    """Final L1 (average NLL), L2 (average recovery error) and regret of one trace."""
    return {
        "final_nll": float(metrics.running_average([r.nll for r in rows])[-1]),
        "final_recovery": float(metrics.running_average([r.recovery_err for r in rows])[-1]),
        "final_regret": rows[-1].cum_regret,
    }


def _cell_job(args):
    alg, ref, seed = args
    return run_cell(alg, ref, seed)


def run(spec, log=None):
    """Run every (algorithm, seed) cell and write CSV traces under ``spec.output``.

    Returns ``{label: {seed: rows}}``.
    """
    out = Path(spec.output)
    corpus = truth = None
    if spec.stream.kind == "corpus":
        corpus = load_corpus(spec.stream.corpus, spec.stream.d, spec.stream.policy, seed=0)
        truth = offline_recover(corpus.triples, corpus.d, spec.stream.K)
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        for i, (tok, c) in enumerate(zip(corpus.vocab, corpus.counts)):
            buf.write(f"{i}\t{tok}\t{c}\n")
        atomic_write(out / "vocab.tsv", buf.getvalue())
    refs = {s: build_reference(spec, s, truth, corpus) for s in spec.seeds}
    cells = [(alg, refs[s], s) for alg in spec.algorithms for s in spec.seeds]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            traces = list(pool.map(_cell_job, cells))
    else:
        traces = [_cell_job(c) for c in cells]
    results = {}
    for (alg, _, seed), rows in zip(cells, traces):
        results.setdefault(alg.label, {})[seed] = rows
        atomic_write(out / alg.label / f"seed_{seed}.csv", rows_to_csv(rows))
        if log:
            log(f"{alg.label} seed {seed}: {summarize(rows)}")
    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(("algorithm", "seed", "n", "final_nll", "final_recovery", "final_regret"))
    for label, by_seed in results.items():
        mean = mean_rows(list(by_seed.values()))
        atomic_write(out / label / "mean.csv", rows_to_csv(mean))
        for seed, rows in list(by_seed.items()) + [("mean", mean)]:
            s = summarize(rows)
            w.writerow((label, seed, len(rows), _num(s["final_nll"]), _num(s["final_recovery"]),
                        _num(s["final_regret"])))
    atomic_write(out / "summary.csv", summary.getvalue())
    if spec.figures:
        from .plotting import render_run

        render_run(results, out / "figures", d=refs[spec.seeds[0]].d)
    return results
