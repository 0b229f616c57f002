"""Command line interface.

Exit codes distinguish failure families so callers can script around them:
2 configuration, 3 input data, 4 missing or malformed artifacts, 5 model
errors. Anything else crashing is a bug and exits 1 with a traceback.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

from .exceptions import (
    ArtifactError,
    ConfigError,
    DataValidationError,
    EisBridgeError,
    ModelError,
)
from .pipeline import (
    STAGES,
    FieldReading,
    load_config,
    run_diagnose,
    run_evaluate,
    run_prognose,
    run_select_freqs,
    run_synth_gen,
    run_train,
)

_EXIT_CODES = (
    (ConfigError, 2),
    (DataValidationError, 3),
    (ArtifactError, 4),
    (ModelError, 5),
)


def _exit_code(exc: EisBridgeError) -> int:
    for etype, code in _EXIT_CODES:
        if isinstance(exc, etype):
            return code
    return 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, metavar="PATH",
                   help="pipeline config JSON")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="override the configured output directory")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for forest fitting (default 1)")
    p.add_argument("--verbose", action="store_true",
                   help="log progress details to stderr")


def _add_reading_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--re1", type=float, required=True,
                   help="field Re at the first preset frequency [mOhm]")
    p.add_argument("--re2", type=float, required=True,
                   help="field Re at the second preset frequency [mOhm]")
    p.add_argument("--soc", type=float, required=True,
                   help="state of charge of the reading, in [0, 1]")
    p.add_argument("--temp", type=float, required=True,
                   help="cell temperature of the reading [degC]")
    p.add_argument("--cell", required=True,
                   help="dataset cell whose reference checkup anchors the "
                        "difference curves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eisbridge",
        description="Bridge on-board impedance readings to laboratory-grade "
                    "battery data and estimate remaining capacity and life.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="generate the configured synthetic dataset")
    _add_common(p)

    p = sub.add_parser("select-freqs",
                       help="vote the two preset frequencies from training lab curves")
    _add_common(p)

    p = sub.add_parser("train", help="train pipeline stages and write artifacts")
    _add_common(p)
    p.add_argument("--stage", choices=("all",) + STAGES, default="all",
                   help="train one stage only (default: all)")

    p = sub.add_parser("evaluate", help="replay the chain on one split half")
    _add_common(p)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")

    p = sub.add_parser("diagnose", help="remaining capacity from one field reading")
    _add_common(p)
    _add_reading_args(p)

    p = sub.add_parser("prognose", help="remaining life from one field reading")
    _add_common(p)
    _add_reading_args(p)

    return parser


def _fmt_num(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.6g}"


def _print_rows(rows) -> None:
    for r in rows:
        print(f"{r['step']:<6} {r['lab_data']:<40} "
              f"mae={_fmt_num(r['mae'])} rmse={_fmt_num(r['rmse'])} "
              f"mape={_fmt_num(r['mape'])}%")


def _dispatch(args: argparse.Namespace) -> int:
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    cfg = load_config(args.config, threads=args.threads)
    if args.out is not None:
        cfg = dataclasses.replace(
            cfg, out_dir=str(Path(args.out).expanduser()))

    if args.command == "synth-gen":
        path = run_synth_gen(cfg)
        print(f"dataset written to {path}")
    elif args.command == "select-freqs":
        preset = run_select_freqs(cfg)
        print(f"f1 = {preset.f1_hz:g} Hz")
        print(f"f2 = {preset.f2_hz:g} Hz")
    elif args.command == "train":
        summary = run_train(cfg, stage=args.stage)
        print(f"trained stage(s): {', '.join(summary['stages'])}")
        print(f"artifacts in {summary['out_dir']}")
        if summary["metrics"] is not None:
            print("training metrics:")
            _print_rows(summary["metrics"])
    elif args.command == "evaluate":
        rows = run_evaluate(cfg, which=args.split, plots=args.plots)
        _print_rows(rows)
        print(f"report written to {Path(cfg.out_dir) / f'evaluation_{args.split}.csv'}")
    elif args.command in ("diagnose", "prognose"):
        reading = FieldReading(
            re1_f_mohm=args.re1, re2_f_mohm=args.re2,
            soc=args.soc, temp_c=args.temp,
        )
        run = run_diagnose if args.command == "diagnose" else run_prognose
        result = run(cfg, reading, args.cell)
        print(json.dumps(result, indent=1, sort_keys=True))
    else:  # pragma: no cover - argparse enforces choices
        raise ConfigError(f"unknown command {args.command!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except EisBridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
