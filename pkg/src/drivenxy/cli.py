"""Command-line entry point: one subcommand per experiment kind.

Usage:
    drivenxy <kind> CONFIG.json [--seed S] [--out DIR] [--workers N] [--dry-run]
    drivenxy validate CONFIG.json

Each run writes CSV tables plus a manifest into <out>/<kind>-<hash12>/. CSV
files start with a '# config_hash=...' comment line so every output is
traceable; volatile data (wall time) goes to run.log only, keeping the CSV
and manifest byte-identical across reruns with the same config and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import KINDS, ConfigError, ExperimentConfig
from .harness import ResultRecord, run_experiment


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_result(record: ResultRecord, config: ExperimentConfig,
                 out_dir: Path) -> Path:
    run_dir = out_dir / f"{config.kind}-{record.config_hash[:12]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "drivenxy-run-1",
        "kind": config.kind,
        "config_hash": record.config_hash,
        "version": record.version,
        "seed": record.seed,
        "files": {},
        "warnings": record.warnings,
    }
    for name, (columns, rows) in record.tables.items():
        path = run_dir / f"{name}.csv"
        with open(path, "w") as fh:
            fh.write(f"# config_hash={record.config_hash}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_format_value(v) for v in row) + "\n")
        manifest["files"][f"{name}.csv"] = {
            "columns": list(columns),
            "rows": len(rows),
        }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(run_dir / "run.log", "w") as fh:
        fh.write(f"wall_seconds={record.wall_seconds:.3f}\n")
    return run_dir


def _print_findings(findings) -> int:
    worst = 0
    for f in findings:
        print(f"[{f.level}] {f.field}: {f.message}")
        if f.level == "error":
            worst = 2
    if not findings:
        print("config ok")
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="drivenxy",
        description="Steady states of a driven-dissipative XY lattice")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config", type=Path)

    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("config", type=Path)
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", type=Path, default=Path("runs"),
                        help="output directory (default: ./runs)")
        sp.add_argument("--workers", type=int,
                        default=int(os.environ.get("DRIVENXY_WORKERS", "1")))
        sp.add_argument("--dry-run", action="store_true",
                        help="validate only, do not run")

    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig.from_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        return _print_findings(config.validate())

    if config.kind != args.command:
        print(f"error: config kind {config.kind!r} does not match "
              f"subcommand {args.command!r}", file=sys.stderr)
        return 2

    findings = config.validate()
    for f in findings:
        stream = sys.stderr if f.level in ("warn", "error") else sys.stdout
        print(f"[{f.level}] {f.field}: {f.message}", file=stream)
    if any(f.level == "error" for f in findings):
        return 2
    if args.dry_run:
        return 0

    out_dir = Path(config.output_dir) if config.output_dir else args.out
    record = run_experiment(config, workers=args.workers,
                            seed_override=args.seed)
    run_dir = write_result(record, config, out_dir)
    for w in record.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
