"""``infoaccess`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
import scipy.sparse.linalg

from . import pipeline as pl

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

COMMANDS = {
    "signatures": pl.cmd_signatures,
    "cluster": pl.cmd_cluster,
    "compare-spectral": pl.cmd_compare_spectral,
    "consistency": pl.cmd_consistency,
    "attribute-tests": pl.cmd_attribute_tests,
    "seed-eval": pl.cmd_seed_eval,
    "report": pl.cmd_report,
    "validate": pl.cmd_validate,
    "run": lambda cfg: pl.run_all(cfg),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--graph", help="edge-list file")
    common.add_argument("--alpha", help="comma-separated transmission probabilities")
    common.add_argument("--trials", type=int)
    common.add_argument("--k", help="cluster count N or range LO-HI")
    common.add_argument("--strategy", choices=["random", "pagerank", "betweenness", "degree", "all"])
    common.add_argument("--num-seeds", help="N or 'sqrt'")
    common.add_argument("--master-seed", type=int)
    common.add_argument("--directed", action="store_true", default=None)
    common.add_argument("--workers", type=int)
    common.add_argument("--out")
    common.add_argument("--correction", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="infoaccess", description="Information access clustering toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args) -> pl.ExperimentConfig:
    cfg = pl.ExperimentConfig.from_file(args.config) if args.config else pl.ExperimentConfig()
    if args.graph is not None:
        cfg.graph = args.graph
    if args.alpha is not None:
        cfg.alphas = pl.parse_alphas(args.alpha)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.k is not None:
        cfg.k = args.k
    if args.strategy is not None:
        cfg.strategy = args.strategy
    if args.num_seeds is not None:
        cfg.num_seeds = int(args.num_seeds) if args.num_seeds.isdigit() else args.num_seeds
    if args.master_seed is not None:
        cfg.master_seed = args.master_seed
    if args.directed:
        cfg.directed = True
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if args.correction is not None:
        cfg.correction = args.correction
    return cfg


def _summary(result):
    return result.tolist() if isinstance(result, np.ndarray) else result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        result = COMMANDS[args.command](cfg)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pl.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError,
            scipy.sparse.linalg.ArpackNoConvergence) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if result is not None:
        print(json.dumps(_summary(result), indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
