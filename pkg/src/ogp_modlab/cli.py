"""Command line entry point: ``ogp-modlab <verb> --config FILE [--seed S] [--out DIR]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import GraphFormatError, InvariantError, ModlabError, ParameterError
from .experiments import KINDS, ConfigError, ExperimentConfig, run
from .partitions import save_partition
from .sbm import generate_sbm, save_graph

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ogp-modlab", description="Modularity landscape experiments on block models.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb in KINDS + ("generate",):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="run this seed only")
        p.add_argument("--out", help="output directory (overrides the config)")
    v = sub.add_parser("verify")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.verb != "generate" and cfg.kind != args.verb:
        raise ConfigError("kind", f"config is for {cfg.kind!r}, not {args.verb!r}")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out=args.out)
    return cfg


def _generate(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        graph, planted = generate_sbm(cfg.model, seed)
        save_graph(graph, out / f"graph_seed{seed}.txt")
        save_partition(planted, out / f"planted_seed{seed}.txt")
        print(json.dumps({"seed": seed, "n": graph.n, "m": graph.m}))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "verify":
            from .verification import verify_suite
            results = verify_suite(args.level)
            failed = [r for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return EXIT_OK if not failed else EXIT_INVARIANT
        cfg = _load(args)
        if args.verb == "generate":
            _generate(cfg)
            return EXIT_OK
        result = run(cfg)
        for path in result.csv_files + [result.metadata_file]:
            print(path)
        return result.status
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, GraphFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, ModlabError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
