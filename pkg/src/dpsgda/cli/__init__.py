"""Command-line harness: ``dpsgda {calibrate,run,sweep,stability,report}``.

Configs are TOML files (format ``dpsgda-config/1``) or shipped presets
given as ``--config preset:<name>``. Environment variables
``DPSGDA_<TABLE>__<KEY>`` override single config keys.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..data import ParseError
from .artifacts import SchemaError
from .commands import cmd_calibrate, cmd_report, cmd_run, cmd_stability, cmd_sweep
from .config import ConfigError, load_config, preset_names


def _parse_values(text: str | None):
    if text is None:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(tok)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsgda", description="DP-SGDA experiment harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=True):
        p.add_argument("--config", help="TOML config path or preset:<name> (" + ", ".join(preset_names()) + ")")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        if runs:
            p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
            p.add_argument("--seed-offset", type=int, default=0, help="added to every run seed")
        return p

    p = common(sub.add_parser("calibrate", help="noise scales and budget verification as JSON lines"), runs=False)
    p.add_argument("--seed-offset", type=int, default=0, help=argparse.SUPPRESS)
    p = common(sub.add_parser("run", help="run every (privacy coordinate, seed) and write run.csv"))
    p.add_argument("--timing", action="store_true", help="fill the wall_time column (breaks byte-identity)")
    p = common(sub.add_parser("sweep", help="sweep one axis and fit rates"))
    p.add_argument("--axis", choices=("epsilon", "n", "T", "batch", "hidden_units"))
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--timing", action="store_true", help="fill the wall_time column (breaks byte-identity)")
    common(sub.add_parser("stability", help="coupled neighbouring-dataset stability probe vs n"))
    p = sub.add_parser("report", help="summarise result CSVs")
    p.add_argument("csv", nargs="+", help="result CSV files")
    p.add_argument("--out", default=".", help="directory for report_long.csv and report_summary.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            _, table = cmd_report(args.csv, Path(args.out))
            print(table)
            return 0
        cfg = load_config(args.config)
        out = Path(args.out or cfg["output"]["dir"])
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "calibrate":
            for rec in cmd_calibrate(cfg, out, args.seed_offset):
                print(json.dumps(rec, sort_keys=True))
        elif args.command == "run":
            rows = cmd_run(cfg, out, args.workers, args.seed_offset, args.timing)
            aborted = sum(r.status == "aborted" for r in rows)
            print(f"wrote {len(rows)} rows ({aborted} aborted) to {out / 'run.csv'}")
        elif args.command == "sweep":
            rows, summary = cmd_sweep(cfg, out, args.axis, _parse_values(args.values), args.workers,
                                      args.seed_offset, args.timing)
            print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
            print(json.dumps(summary, sort_keys=True, default=str))
        elif args.command == "stability":
            rows, summary = cmd_stability(cfg, out, args.workers, args.seed_offset)
            print(f"wrote {len(rows)} rows to {out / 'stability.csv'}")
            print(json.dumps(summary, sort_keys=True, default=str))
    except (ConfigError, SchemaError, ParseError, FileNotFoundError) as exc:
        print(f"dpsgda: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
