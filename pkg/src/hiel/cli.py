"""Command line entry point.

    hiel run --config cfg.json [--target Ant-1.3] [--beta 0.1] [--seed 7] [--out dir]
    hiel sweep --config cfg.json [--betas 0.1 0.5] [--sizes 10 60] [--out dir]
    hiel compare --report out/report.json --baseline TDS=tds.csv [--baseline ...] [--out dir]
    hiel synth --out dir [--seed n]

Failures print one JSON object per diagnostic on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment
from .experiment import DEFAULT_BETAS, DEFAULT_SIZES


def _fail(kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return 2


def _baseline_arg(text: str) -> tuple[str, Path]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected MODEL=CSV, got {text!r}")
    return name, Path(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hiel", description="Hybrid-inducer ensemble for cross-project defect prediction")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate target releases")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--target", action="append", help="target release id, e.g. Ant-1.3 (repeatable)")
    run.add_argument("--beta", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path)

    sweep = sub.add_parser("sweep", help="F-measure over beta values and expert-set sizes")
    sweep.add_argument("--config", required=True, type=Path)
    sweep.add_argument("--betas", type=float, nargs="+", default=list(DEFAULT_BETAS))
    sweep.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    sweep.add_argument("--target", action="append")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--out", type=Path)

    cmp_ = sub.add_parser("compare", help="compare a run report with baseline score files")
    cmp_.add_argument("--report", required=True, type=Path)
    cmp_.add_argument("--baseline", required=True, action="append", type=_baseline_arg, metavar="MODEL=CSV")
    cmp_.add_argument("--out", type=Path)

    syn = sub.add_parser("synth", help="write the synthetic demo repository")
    syn.add_argument("--out", required=True, type=Path)
    syn.add_argument("--seed", type=int, default=20240611)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = experiment.load_config(args.config).with_overrides(
                beta=args.beta, seed=args.seed, targets=args.target, output_dir=args.out)
            report = experiment.run_experiment(cfg)
            for err in report["errors"]:
                print(json.dumps(err), file=sys.stderr)
            print(f"{len(report['rows'])} target(s) written to {cfg.output_dir}")
            return 1 if report["errors"] else 0
        if args.command == "sweep":
            cfg = experiment.load_config(args.config).with_overrides(
                seed=args.seed, targets=args.target, output_dir=args.out)
            rows = experiment.beta_sweep(cfg, args.betas, args.sizes)
            print(f"{len(rows)} sweep row(s) written to {Path(cfg.output_dir) / 'sweep.csv'}")
            return 0
        if args.command == "compare":
            report = json.loads(args.report.read_text(encoding="utf-8"))
            result = experiment.compare_models(report, dict(args.baseline))
            out = args.out or args.report.parent
            experiment.write_comparison(result, out)
            for model, targets in result["_excluded"].items():
                print(json.dumps({"warning": "unmatched targets excluded", "model": model, "targets": targets}),
                      file=sys.stderr)
            print(f"comparison tables written to {out}")
            return 0
        if args.command == "synth":
            from .synthetic import write_repository

            paths = write_repository(args.out, args.seed)
            print(f"{len(paths)} release file(s) written to {args.out}")
            return 0
    except experiment.ConfigError as e:
        return _fail("ConfigError", str(e))
    except (ValueError, OSError, KeyError) as e:
        return _fail(type(e).__name__, str(e))
    return 2


if __name__ == "__main__":
    sys.exit(main())
