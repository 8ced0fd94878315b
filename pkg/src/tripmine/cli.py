"""Command-line entry point: ``tripmine <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 fit failure, 4 verify failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from datetime import date
from pathlib import Path

from .errors import FitError, TripMineError
from .geo import load_geo_config
from .pipeline import (ArtifactWriter, PipelineConfig, fit_values_file, stage_classify, stage_clean, stage_fit,
                       stage_mine, stage_stats)
from .synth import SynthSpec
from .verify import run_verify, stage_synth

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIT, EXIT_VERIFY = 0, 1, 2, 3, 4
SUBCOMMANDS = ("clean", "mine-places", "classify", "stats", "fit", "synth", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _hours(text):
    try:
        lo, hi = (int(v) for v in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START-END hours, got {text!r}")
    return lo, hi


def _onoff(text):
    if text.lower() in ("on", "true", "1", "yes"):
        return True
    if text.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _common(p):
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="PipelineConfig JSON document")
    g.add_argument("--region-config", help="JSON with region.kind/region.coords and grid.* keys")
    g.add_argument("--delimiter", help="field delimiter (default ',')")
    g.add_argument("--speed-cap", type=float, help="km/h; trips strictly faster are dropped")
    g.add_argument("--convert-gcj02", action="store_true", default=None, help="convert GCJ-02 input to WGS84")
    g.add_argument("--min-monthly-trips", type=int)
    g.add_argument("--frequency-mode", choices=("strict", "average"))
    g.add_argument("--window-start", type=date.fromisoformat)
    g.add_argument("--window-end", type=date.fromisoformat)
    g.add_argument("--dth-meters", type=float)
    g.add_argument("--ratio-threshold", type=float)
    g.add_argument("--morning-window", type=_hours, help="e.g. 6-11")
    g.add_argument("--evening-window", type=_hours, help="e.g. 15-20")
    g.add_argument("--strict-alg1-origin-first", type=_onoff, help="on/off")
    g.add_argument("--families", help="comma-separated family names")
    g.add_argument("--seed", type=int)


def build_parser():
    parser = _Parser(prog="tripmine", description="Trip mobility mining toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("clean", help="parse, clean and select frequent users")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("mine-places", help="label visited places, detect home and work")
    p.add_argument("--input", required=True, help="cleaned records CSV")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("classify", help="commuting / non-commuting labels")
    p.add_argument("--input", required=True, help="cleaned records CSV")
    p.add_argument("--places", required=True, help="places.json from mine-places")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("stats", help="temporal and spatial aggregates")
    p.add_argument("--input", required=True, help="classified CSV")
    p.add_argument("--places", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("fit", help="MLE fits ranked by K-S distance")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="classified CSV (fits class x {distance, time})")
    src.add_argument("--values", help="single-column numeric text file")
    p.add_argument("--out", required=True)
    p.add_argument("--pdf-csv", action="store_true", help="also write fitted pdf overlays")
    _common(p)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--spec", help="SynthSpec JSON (defaults used when omitted)")
    p.add_argument("--out", required=True, help="records CSV path")
    p.add_argument("--truth-out", required=True, help="ground truth JSON path")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("verify", help="synthesize, run the full pipeline, score against truth")
    p.add_argument("--spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    return parser


def config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = PipelineConfig.from_json(json.load(fh))
    if getattr(args, "region_config", None):
        region, grid = load_geo_config(args.region_config)
        cfg = replace(cfg, region=region, grid=grid)
    overrides = {
        "delimiter": args.delimiter,
        "speed_cap_kmh": args.speed_cap,
        "convert_gcj02": args.convert_gcj02,
        "min_monthly_trips": args.min_monthly_trips,
        "frequency_mode": args.frequency_mode,
        "window_start": args.window_start,
        "window_end": args.window_end,
        "d_th": args.dth_meters,
        "home_work_ratio": args.ratio_threshold,
        "morning_window": args.morning_window,
        "evening_window": args.evening_window,
        "strict_alg1_origin_first": args.strict_alg1_origin_first,
        "families": None if args.families is None else tuple(f.strip() for f in args.families.split(",")),
        "seed": args.seed,
    }
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def _load_spec(args) -> SynthSpec:
    if args.seed is None:
        raise UsageError("--seed is required for synth and verify")
    doc = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            doc = json.load(fh)
    return SynthSpec.from_json(doc, seed=args.seed)


def _dispatch(args, writer: ArtifactWriter) -> int:
    cmd = args.command
    if cmd == "synth":
        stage_synth(_load_spec(args), args.out, args.truth_out, writer)
        return EXIT_OK
    if cmd == "verify":
        spec = _load_spec(args)
        t0 = time.perf_counter()
        report = run_verify(spec, args.out, writer)
        elapsed = time.perf_counter() - t0
        for name, ok in report["checks"].items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        print(f"verify {'passed' if report['passed'] else 'FAILED'} in {elapsed:.1f} s", file=sys.stderr)
        return EXIT_OK if report["passed"] else EXIT_VERIFY

    cfg = config_from_args(args)
    out = Path(args.out)
    if cmd == "clean":
        stage_clean(args.input, out, cfg, writer)
    elif cmd == "mine-places":
        stage_mine(args.input, out, cfg, writer)
    elif cmd == "classify":
        stage_classify(args.input, args.places, out, cfg, writer)
    elif cmd == "stats":
        stage_stats(args.input, args.places, out, cfg, writer)
    elif cmd == "fit":
        if args.values:
            fit_values_file(args.values, out, cfg, writer, args.pdf_csv)
        else:
            stage_fit(args.input, out, cfg, writer, args.pdf_csv)
    return EXIT_OK


def _error(kind, exc, code):
    print(json.dumps({"error": kind, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    writer = ArtifactWriter()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        return _dispatch(args, writer)
    except UsageError as exc:
        writer.rollback()
        return _error("usage", exc, EXIT_USAGE)
    except FitError as exc:
        writer.rollback()
        return _error("fit_failure", exc, EXIT_FIT)
    except (TripMineError, OSError, ValueError) as exc:
        writer.rollback()
        return _error(type(exc).__name__, exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
