"""CLI entry point for bprelab."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from bprelab.config import EXPERIMENT_KINDS
from bprelab.errors import ErrorCategory, ErrorCode, ErrorResponse, ExitCode, LabError

logger = logging.getLogger("bprelab")


def _setup_logging(level: str) -> None:
    """Configure logging on stderr."""
    numeric_level = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(
        level=numeric_level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bprelab",
        description="Simulation lab for critical multi-type branching processes in random environment",
    )
    parser.add_argument(
        "kind",
        choices=EXPERIMENT_KINDS,
        help="Experiment to run",
    )
    parser.add_argument(
        "--config",
        default=None,
        help="Path to JSON experiment configuration file",
    )
    parser.add_argument(
        "--ensemble",
        default=None,
        help="Path to JSON ensemble file (overrides the config)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Root 64-bit seed (overrides BPRELAB_SEED and the config)",
    )
    parser.add_argument(
        "--out",
        default=None,
        help="Output directory for report.json, CSV tables and provenance.jsonl",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker threads for replica blocks (results do not depend on it)",
    )
    parser.add_argument(
        "--force",
        action="store_true",
        default=None,
        help="Run limit-theorem experiments even when their hypotheses fail",
    )
    parser.add_argument(
        "--log-level",
        choices=["debug", "info", "warning", "error", "critical"],
        default=None,
        help="Log level (default: info)",
    )
    return parser


def _fail(error: ErrorResponse) -> int:
    print(error.to_json(), file=sys.stderr)
    return ExitCode.ERROR


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run the experiment and write its outputs; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Build CLI overrides dict (only non-None values)
    cli_overrides: dict = {"kind": args.kind}
    if args.config is not None:
        cli_overrides["_config_path"] = args.config
    if args.ensemble is not None:
        cli_overrides["ensemble"] = args.ensemble
    if args.seed is not None:
        cli_overrides["seed"] = args.seed
    if args.out is not None:
        cli_overrides["out_dir"] = args.out
    if args.workers is not None:
        cli_overrides["workers"] = args.workers
    if args.force is not None:
        cli_overrides["force"] = args.force
    if args.log_level is not None:
        cli_overrides["log_level"] = args.log_level

    from bprelab.config import load_config
    from bprelab.harness.report import ProvenanceLog
    from bprelab.harness.runner import run_experiment

    try:
        config = load_config(cli_overrides)
    except LabError as exc:
        return _fail(exc.to_response())
    _setup_logging(config.settings.log_level)

    provenance = ProvenanceLog.in_dir(config.settings.out_dir)
    started = time.perf_counter()
    try:
        report = run_experiment(config, provenance)
        path = report.write(config.settings.out_dir)
    except LabError as exc:
        logger.error("%s failed: %s", args.kind, exc)
        return _fail(exc.to_response())
    except KeyboardInterrupt:
        return ExitCode.ERROR
    except Exception as exc:
        logger.exception("Unexpected failure")
        return _fail(
            ErrorResponse(
                category=ErrorCategory.UNKNOWN.value,
                code=ErrorCode.UNKNOWN_ERROR,
                message=f"Fatal: {exc}",
            )
        )

    provenance.record(
        "run",
        kind=config.kind,
        report=str(path),
        seed=config.seed,
        seed_source=config.seed_source,
        workers=config.settings.workers,
        wall_clock_seconds=round(time.perf_counter() - started, 3),
        version=report.version,
        passed=report.passed,
    )
    failed = [v.name for v in report.verdicts if not v.passed]
    if failed:
        logger.warning("Verdicts failed: %s", ", ".join(failed))
        return ExitCode.VERDICT_FAILURE
    return ExitCode.OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
