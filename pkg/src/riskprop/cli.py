"""Command-line pipeline driver.

Each subcommand runs one stage for every configured seed, reading and
writing the TSV artifacts under the output directory; run-all chains every
stage and prints the condition summary. Exit status is 0 on success and 1
with a diagnostic on any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiment
from .experiment import ExperimentConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskprop",
        description="Heterogeneous-graph pre-training and default-risk propagation pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    stages = {
        "generate": "generate synthetic graphs, cascades, and task features",
        "pretrain": "pre-train embedding models (with and without subgraph terms)",
        "embed": "write node embeddings from saved checkpoints",
        "pairs": "build and split labeled propagation pairs",
        "train": "train the per-condition classifiers",
        "evaluate": "evaluate classifiers and write results.tsv",
    }
    for name, help_text in stages.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    p = sub.add_parser("run-all", aliases=["run_all"], help="run every stage in order")
    _add_common(p)
    return parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="experiment config file")
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None, help="run only this pipeline seed")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def _load_config(args: argparse.Namespace) -> tuple[ExperimentConfig, Path, tuple[int, ...]]:
    exp = experiment.parse_experiment_config(args.config) if args.config else ExperimentConfig()
    out_dir = Path(args.out) if args.out else Path(exp.output_dir)
    seeds = (args.seed,) if args.seed is not None else exp.seeds
    return exp, out_dir, seeds


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    command = args.command.replace("_", "-")

    def say(msg: str) -> None:
        if not args.quiet:
            print(msg)

    try:
        exp, out_dir, seeds = _load_config(args)
        if command == "generate":
            experiment.run_generate(exp, out_dir, seeds)
            say(f"generated {len(seeds)} world(s) under {out_dir}")
        elif command == "pretrain":
            experiment.run_pretrain(exp, out_dir, seeds)
            say(f"pre-trained checkpoints for seeds {list(seeds)}")
        elif command == "embed":
            experiment.run_embed(exp, out_dir, seeds)
            say(f"wrote embeddings for seeds {list(seeds)}")
        elif command == "pairs":
            experiment.run_pairs(exp, out_dir, seeds)
            say(f"built pairs for seeds {list(seeds)}")
        elif command == "train":
            experiment.run_train(exp, out_dir, seeds)
            say(f"trained classifiers for seeds {list(seeds)}")
        elif command == "evaluate":
            results = experiment.run_evaluate(exp, out_dir, seeds)
            say(experiment.summary_text(results))
        elif command == "run-all":
            results = experiment.run_all(exp, out_dir, seeds)
            say(experiment.summary_text(results))
        else:  # pragma: no cover - argparse enforces choices
            raise ValueError(f"unknown command {command!r}")
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
