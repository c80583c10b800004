# src/cli.py
"""
provfusion command line.

    python -m src.cli [--config FILE] [--set section.key=value ...] <command>

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from src.config import PipelineConfig, dump_config, load_config
from src.errors import ConfigError, ProvFusionError
from src.pipeline import (
    ablate_stage,
    build_stage,
    detect_stage,
    evaluate_stage,
    run_stage,
    score_stage,
    synth_stage,
    train_stage,
)

logger = logging.getLogger("provfusion")

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def configure_logging(level: str = "INFO", log_file: str | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    formatter = logging.Formatter(LOG_FORMAT)
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    for h in handlers:
        h.setFormatter(formatter)
        root.addHandler(h)
    root.setLevel(level.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provfusion", description="Multi-view provenance graph anomaly detection")
    parser.add_argument("--config", help="YAML config file (defaults baked in)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config key; repeatable",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file")
    parser.add_argument("--force", action="store_true", help="re-run stages even when checkpoints are fresh")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", help="parse logs into train/validation/test graphs")
    sub.add_parser("train", help="train embeddings, encoders, causal decoder and kNN banks")
    score = sub.add_parser("score", help="compute the three raw view scores")
    score.add_argument("--split", choices=["validation", "test", "both"], default="both")
    sub.add_parser("detect", help="calibrate on validation scores and emit ranked alerts")
    sub.add_parser("evaluate", help="confusion counts, F1, MCC, ADP and coverage")
    sub.add_parser("synth", help="write a labeled synthetic corpus to the configured paths")
    sub.add_parser("ablate", help="detector-group, threshold, view, normalizer and alpha tables")
    sub.add_parser("run", help="build, train, score, detect and evaluate")
    sub.add_parser("show-config", help="print the effective configuration")
    return parser


def dispatch(args: argparse.Namespace, config: PipelineConfig) -> None:
    cmd = args.command
    if cmd == "build":
        build_stage(config, args.force)
    elif cmd == "train":
        train_stage(config, args.force)
    elif cmd == "score":
        splits = ("validation", "test") if args.split == "both" else (args.split,)
        for split in splits:
            score_stage(config, split, args.force)
    elif cmd == "detect":
        detect_stage(config, args.force)
    elif cmd == "evaluate":
        print(evaluate_stage(config).to_text())
    elif cmd == "synth":
        counts = synth_stage(config)
        print(", ".join(f"{k}={v}" for k, v in counts.items()))
    elif cmd == "ablate":
        for name, table in ablate_stage(config).items():
            print(f"\n[{name}]")
            print(table.to_string(index=False))
    elif cmd == "run":
        print(run_stage(config, args.force).to_text())
    elif cmd == "show-config":
        print(dump_config(config), end="")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    configure_logging(args.log_level, args.log_file)
    try:
        config = load_config(args.config, args.overrides)
        dispatch(args, config)
    except ConfigError as exc:
        logger.error("Config error: %s", exc)
        return EXIT_USAGE
    except (ProvFusionError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except Exception:
        logger.exception("Internal error")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
