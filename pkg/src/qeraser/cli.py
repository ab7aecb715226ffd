"""Command-line entry point: ``qeraser run|sweep|tomo|list-scenarios``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, builtin_names, load_config
from .gaussian import UnphysicalStateError
from .scenarios import RunReport, _clean, run_scenario, run_sweep, run_tomography

OUT_ENV = "QERASER_OUT"


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out[prefix] = json.dumps(obj) if isinstance(obj, list) else obj


def _metrics_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["scenario", "point", "metric", "value"])
    for i, r in enumerate(reports):
        flat: dict = {}
        _flatten("", _clean(r.metrics), flat)
        for k, v in flat.items():
            w.writerow([r.scenario, i, k, v])
    return buf.getvalue()


def _emit(reports: Sequence[RunReport], fmt: str, single: bool) -> None:
    if fmt == "csv":
        sys.stdout.write(_metrics_csv(reports))
    elif single:
        sys.stdout.write(reports[0].to_json() + "\n")
    else:
        sys.stdout.write(json.dumps([_clean(r.to_dict()) for r in reports], indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeraser", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run one scenario"),
        ("sweep", "run every point of a scenario's sweep"),
        ("tomo", "sample and reconstruct the scenario's states"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML config path or built-in scenario name")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV})")
        p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    sub.add_parser("list-scenarios", help="list built-in scenarios")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "list-scenarios":
        for name in builtin_names():
            desc = " ".join(load_config(name).description.split())
            print(f"{name}\t{desc}")
        return 0
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed: must be an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"seed": args.seed})
        out = args.out or (Path(os.environ[OUT_ENV]) if os.environ.get(OUT_ENV) else None)
        if args.command == "run":
            reports = [run_scenario(cfg, out)]
        elif args.command == "sweep":
            reports = run_sweep(cfg, out)
        else:
            reports = [run_tomography(cfg, out)]
    except ConfigError as err:
        print(f"config error:\n{err}", file=sys.stderr)
        return 2
    except (UnphysicalStateError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    _emit(reports, args.format, args.command != "sweep")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
