"""Command line: ``seqbn sample``, ``seqbn run`` and ``seqbn learn``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, ParseError, SchemaError
from .harness import ALL_STRATEGIES, ExperimentSpec, learn, resolve_network, run_experiment, sample_dataset, write_dataset
from .scoring import SCORE_KINDS

__all__ = ["main", "build_parser"]


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x)


def _strategy_list(text):
    out = tuple(x for x in text.split(",") if x)
    bad = [s for s in out if s not in ALL_STRATEGIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown strategies {bad}; choose from {ALL_STRATEGIES}")
    return out


def _learning_flags(p, multi: bool):
    if multi:
        p.add_argument("--strategy", type=_strategy_list, default=("naive", "map", "incremental"),
                       help="comma-separated strategies (naive, map, incremental, em)")
        p.add_argument("--k", type=_int_list, default=(100,), help="comma-separated structure intervals")
    else:
        p.add_argument("--strategy", choices=ALL_STRATEGIES, default="incremental")
        p.add_argument("--k", type=int, default=100, help="instances between structure updates")
    p.add_argument("--score", choices=SCORE_KINDS, default=None,
                   help="score kind (default: bde for naive/map, avg-bde for incremental/em)")
    p.add_argument("--ess", type=float, default=5.0, help="equivalent sample size")
    p.add_argument("--alpha", type=float, default=0.99, help="EM decay")
    p.add_argument("--n0", type=float, default=10.0, help="EM weight of the initial network")
    p.add_argument("--fresh", choices=("sibling", "n0", "zero"), default="sibling",
                   help="EM weight for records created when the frontier moves")
    p.add_argument("--max-parents", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqbn", description="Sequential Bayesian network structure learning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a dataset from a network")
    p.add_argument("network", help="network file or shipped network name")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing", type=float, default=0.0, help="MCAR rate")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run the strategy x k x dataset grid")
    p.add_argument("network", help="generating network file or shipped network name")
    _learning_flags(p, multi=True)
    p.add_argument("--datasets", type=int, default=5)
    p.add_argument("--instances", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0, help="first dataset seed; datasets use seed, seed+1, ...")
    p.add_argument("--missing", type=float, default=0.0)
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("learn", help="stream one dataset file through one learner")
    p.add_argument("dataset")
    _learning_flags(p, multi=False)
    p.add_argument("--em", action="store_true", help="shorthand for --strategy em")
    p.add_argument("--init", help="initial network (file or shipped name)")
    p.add_argument("--truth", help="generating network, for the normalized loss column")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sample":
            net = resolve_network(args.network)
            _, masked = sample_dataset(net, args.count, args.seed, args.missing)
            write_dataset(args.out, net.variables, masked)
            return 0
        if args.command == "run":
            spec = ExperimentSpec(
                network=args.network, out=args.out, strategies=args.strategy, ks=args.k,
                score=args.score, ess=args.ess, alpha=args.alpha, n0=args.n0, fresh=args.fresh,
                max_parents=args.max_parents, n_datasets=args.datasets, n_instances=args.instances,
                seeds=tuple(range(args.seed, args.seed + args.datasets)), missing=args.missing,
                window=args.window, workers=args.workers)
            results, ok = run_experiment(spec)
            for r in results:
                if r.status != "ok":
                    print(f"cell {r.strategy} k={r.k} seed={r.seed} failed: {r.error}", file=sys.stderr)
            print(Path(args.out) / "summary.tsv")
            return 0 if ok else 1
        strategy = "em" if args.em else args.strategy
        learn(args.dataset, args.out, strategy, args.init, args.truth, args.k, args.score, args.ess,
              args.max_parents, args.alpha, args.n0, args.fresh)
        return 0
    except (ConfigError, ParseError, SchemaError, FileNotFoundError, KeyError) as exc:
        print(f"seqbn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
