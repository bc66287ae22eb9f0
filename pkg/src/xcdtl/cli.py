"""Command-line interface.

Subcommands: generate, features, classify, rank, transfer, report.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The XCDTL_THREADS environment variable caps worker parallelism.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import pipeline
from .features import features_for_ensemble, save_feature_matrix
from .graphs import DOMAINS, generate_ensemble, load_ensemble, save_ensemble
from .grid import GridConfig, run_grid
from .report import emit_report

log = logging.getLogger("xcdtl")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_seeds(text):
    try:
        seeds = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _parse_pairs(text):
    pairs = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"pair {token!r} is not SRC:TGT")
        src, tgt = parts
        for d in (src, tgt):
            if d not in DOMAINS:
                raise argparse.ArgumentTypeError(
                    f"unknown domain {d!r}; expected one of {', '.join(DOMAINS)}"
                )
        if src == tgt:
            raise argparse.ArgumentTypeError(f"pair {token!r} maps a domain to itself")
        pairs.append((src, tgt))
    if not pairs:
        raise argparse.ArgumentTypeError("pair list is empty")
    return pairs


def build_parser():
    parser = _Parser(prog="xcdtl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="generate a graph ensemble")
    p.add_argument("--domain", required=True, choices=DOMAINS)
    p.add_argument("--count", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="compute descriptors for an ensemble")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("classify", help="train the domain classifiers")
    p.add_argument("--features", required=True, help="directory of per-domain feature CSVs")
    p.add_argument("--seeds", required=True, type=_parse_seeds)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="compute transfer-score tables and anchors")
    p.add_argument("--features", required=True, help="directory of per-domain feature CSVs")
    p.add_argument("--borda", required=True, help="ranks.csv or borda.csv from classify")
    p.add_argument("--out", required=True)

    p = sub.add_parser("transfer", help="run the stress-test grid")
    p.add_argument("--config", required=True, help="GridConfig JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--features", choices=("anchors8", "all12"), default=None)
    p.add_argument("--pairs", type=_parse_pairs, default=None)
    p.add_argument("--jobs", type=int, default=0, help="0 = all available cores")

    p = sub.add_parser("report", help="aggregate results into tables and figures")
    p.add_argument("--results", required=True, help="transfer output directory")
    p.add_argument("--out", required=True)
    return parser


def _cmd_generate(args):
    ens = generate_ensemble(args.domain, args.count, args.seed)
    save_ensemble(ens, args.out)
    log.info("wrote %d graphs to %s", len(ens.graphs), args.out)
    return EXIT_OK


def _cmd_features(args):
    ens = load_ensemble(args.infile)
    fm = features_for_ensemble(ens)
    save_feature_matrix(fm, args.out)
    log.info("wrote %d feature rows to %s", len(fm), args.out)
    return EXIT_OK


def _cmd_classify(args):
    config = GridConfig(seeds=args.seeds)
    matrices = pipeline.load_feature_dir(config.domains, args.features)
    for domain, fm in matrices.items():
        need = config.train_pool + config.test_size
        if len(fm) < need:
            raise ValueError(f"{domain}: {len(fm)} rows < required {need}")
    pipeline.run_classifiers(config, args.out, matrices)
    log.info("classifier outputs in %s", args.out)
    return EXIT_OK


def _cmd_rank(args):
    config = GridConfig()
    matrices = pipeline.load_feature_dir(config.domains, args.features)
    borda = pipeline.load_borda_input(args.borda)
    pipeline.run_ranking(config, args.out, matrices, borda)
    log.info("ranking outputs in %s", args.out)
    return EXIT_OK


def _cmd_transfer(args):
    config = GridConfig.from_json(args.config)
    if args.features:
        config.feature_mode = args.features
    os.makedirs(args.out, exist_ok=True)
    config.to_json(os.path.join(args.out, "config_used.json"))
    runtime = pipeline.build_runtime(config, args.out, args.pairs)
    n = run_grid(runtime, os.path.join(args.out, "results.csv"), args.pairs, jobs=args.jobs)
    log.info("grid complete: %d cells in %s", n, os.path.join(args.out, "results.csv"))
    return EXIT_OK


def _cmd_report(args):
    written = emit_report(args.results, args.out)
    log.info("report files:")
    for path in written:
        log.info("  %s", path)
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "features": _cmd_features,
    "classify": _cmd_classify,
    "rank": _cmd_rank,
    "transfer": _cmd_transfer,
    "report": _cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.verbose == 0:
        logging.getLogger().setLevel(logging.WARNING)
        log.setLevel(logging.INFO)
    try:
        return _COMMANDS[args.command](args)
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (ValueError, KeyError, OSError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
