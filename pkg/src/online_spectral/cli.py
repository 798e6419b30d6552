"""Command-line entry point: ``online-spectral run`` and ``online-spectral recover``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 the data do
not support the requested number of topics (rank deficiency or a
degenerate decomposition).  ``ONLINE_SPECTRAL_LOG_LEVEL`` sets the log level.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import ConfigError, load_corpus
from .linalg import RankDeficiencyError
from .runner import atomic_write, load_spec, parse_seeds, run
from .spectral import (
    DegenerateDecompositionError,
    DegenerateRecoveryError,
    PowerConfig,
    offline_recover,
)

log = logging.getLogger("online_spectral")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_RANK = 0, 1, 2, 3


def _matrix_text(M):
    M = np.atleast_2d(M)
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in M)


def cmd_run(args):
    overrides = list(args.set or [])
    spec = load_spec(args.spec, overrides)
    if args.output:
        spec = replace(spec, output=args.output)
    if args.seeds:
        spec = replace(spec, seeds=parse_seeds(args.seeds))
    if args.figures:
        spec = replace(spec, figures=True)
    if args.jobs:
        spec = replace(spec, jobs=args.jobs)
    run(spec, log=log.info)
    log.info("wrote %s", spec.output)
    return EXIT_OK


def cmd_recover(args):
    corpus = load_corpus(args.corpus, args.vocab_size, args.policy, args.seed)
    log.info("%d documents, %d skipped, vocabulary %d", corpus.n_docs, corpus.skipped, corpus.d)
    pm = PowerConfig(args.restarts, args.iterations, args.tol)
    params = offline_recover(corpus.triples, corpus.d, args.topics, pm, seed=args.seed)
    out = Path(args.out)
    atomic_write(out / "omega.txt", _matrix_text(params.omega[:, None]))
    atomic_write(out / "U.txt", _matrix_text(params.U))
    corpus.write_manifest(out / "vocab.tsv")
    log.info("wrote %s", out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="online-spectral",
        description="Run online topic-model experiments or fit a corpus offline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment file and write CSV metric traces")
    p.add_argument("spec", help="experiment file (INI-style)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a value from the file (repeatable)")
    p.add_argument("--output", help="output directory")
    p.add_argument("--seeds", help="seed list such as 0-9")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("recover", help="offline spectral fit of a corpus")
    p.add_argument("--corpus", required=True, help="one whitespace-tokenized document per line")
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--topics", type=int, required=True)
    p.add_argument("--policy", choices=("first3", "rand3"), default="first3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="recovered")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("ONLINE_SPECTRAL_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficiencyError, DegenerateDecompositionError, DegenerateRecoveryError) as e:
        print(f"cannot recover the requested topics: {e}", file=sys.stderr)
        return EXIT_RANK
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
