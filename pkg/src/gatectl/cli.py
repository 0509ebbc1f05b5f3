"""Command-line entry points.

Subcommands: train (single RL run), baseline (one comparison optimizer),
sweep (grid over evolution times), verify (re-simulate a protocol file),
ablate (architecture comparison), report (tables and figures from
persisted records).  ``--outdir`` and ``--workers`` fall back to the
GATECTL_OUTDIR and GATECTL_WORKERS environment variables.  Exit code is
zero only when every requested cell completed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness, report
from .harness import DEFAULT_T_GRID, ExperimentSpec


def _env_outdir() -> str:
    return os.environ.get("GATECTL_OUTDIR", "out")


def _env_workers() -> int:
    return int(os.environ.get("GATECTL_WORKERS", "1"))


def _parse_param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad T grid {text!r}; expected e.g. 0.5,1.0") from None


def _add_common(p: argparse.ArgumentParser, grid: bool) -> None:
    p.add_argument("--gate", default="hadamard", choices=("hadamard", "cnot"))
    if grid:
        p.add_argument("--T-grid", dest="t_grid", type=_parse_grid, default=None,
                       help="comma-separated evolution times (default 0.1..1.2)")
    else:
        p.add_argument("--T", dest="total_time", type=float, default=1.0)
    p.add_argument("--steps", "-N", type=int, default=None,
                   help="pulse steps per protocol (default per gate)")
    p.add_argument("--reps", type=int, default=1, help="repetitions per T")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--param", action="append", type=_parse_param, default=[],
                   metavar="KEY=VALUE", help="algorithm hyperparameter override")
    p.add_argument("--config", default=None, help="JSON file of spec fields")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gatectl",
                                     description="bang-bang gate synthesis workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the RL agent at one evolution time")
    _add_common(p, grid=False)

    p = sub.add_parser("baseline", help="run one comparison optimizer")
    p.add_argument("--algorithm", required=True, choices=("grape", "de", "ga", "brute"))
    _add_common(p, grid=False)

    p = sub.add_parser("sweep", help="run one algorithm over a grid of T values")
    p.add_argument("--algorithm", required=True,
                   choices=("rl", "grape", "de", "ga", "brute"))
    _add_common(p, grid=True)

    p = sub.add_parser("verify", help="re-simulate a protocol file")
    p.add_argument("protocol", help="protocol file path")
    p.add_argument("--gate", default="hadamard", choices=("hadamard", "cnot"))
    p.add_argument("--T", dest="total_time", type=float, required=True)
    p.add_argument("--steps", "-N", type=int, required=True)

    p = sub.add_parser("ablate", help="compare network architectures on one task")
    p.add_argument("--arch", action="append", required=True, metavar="E+HxW",
                   help="encoder+head layer counts and width, e.g. 3+4x600")
    _add_common(p, grid=False)

    p = sub.add_parser("report", help="render tables and figures from records")
    p.add_argument("--outdir", default=None)
    p.add_argument("--curves", nargs="*", default=None,
                   help="series.jsonl files to plot as learning curves")
    p.add_argument("--labels", nargs="*", default=None)
    return parser


def _build_spec(args, algorithm: str, grid: bool) -> ExperimentSpec:
    fields = {
        "gate": args.gate,
        "algorithm": algorithm,
        "T_grid": (args.t_grid or DEFAULT_T_GRID) if grid else (args.total_time,),
        "steps": args.steps,
        "repetitions": args.reps,
        "seed": args.seed,
        "outdir": args.outdir,
        "params": dict(args.param),
    }
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        for key, value in loaded.items():
            if key == "params":
                merged = dict(value)
                merged.update(fields["params"])
                fields["params"] = merged
            elif key == "T_grid":
                if grid and args.t_grid is None:
                    fields["T_grid"] = tuple(value)
            elif key in fields and fields[key] in (None, parser_default(key)):
                fields[key] = value
            elif key not in fields:
                raise SystemExit(f"config: unknown field {key!r}")
    if fields["outdir"] is None:
        fields["outdir"] = _env_outdir()
    return ExperimentSpec(**fields)


_PARSER_DEFAULTS = {"gate": "hadamard", "repetitions": 1, "seed": 0,
                    "steps": None, "outdir": None}


def parser_default(key: str):
    return _PARSER_DEFAULTS.get(key, object())


def _run_spec(spec: ExperimentSpec, workers: int | None) -> int:
    workers = workers if workers is not None else _env_workers()
    records = harness.run(spec, workers=workers)
    failed = [r for r in records if r["status"] != "ok"]
    for record in records:
        tag = (f"{record['algorithm']} T={record['T']:g} rep={record['repetition']}")
        if record["status"] == "ok":
            print(f"{tag}: best_L={record['best_L']:.6g} best_F={record['best_F']:.12g}")
        else:
            print(f"{tag}: FAILED ({record['error']})")
    print(f"records: {spec.outdir / 'records.jsonl'}")
    if failed:
        print(f"{len(failed)} of {len(records)} cells failed", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "train":
        return _run_spec(_build_spec(args, "rl", grid=False), args.workers)

    if args.command == "baseline":
        return _run_spec(_build_spec(args, args.algorithm, grid=False), args.workers)

    if args.command == "sweep":
        spec = _build_spec(args, args.algorithm, grid=True)
        code = _run_spec(spec, args.workers)
        report.write_sweep_report(harness.load_records(spec.outdir), spec.outdir)
        return code

    if args.command == "verify":
        try:
            result = harness.verify_protocol(args.gate, args.total_time,
                                             args.steps, args.protocol)
        except (ValueError, OSError) as exc:
            print(f"verify: {exc}", file=sys.stderr)
            return 1
        print(f"F={result['F']:.12g} L={result['L']:.12g}")
        return 0

    if args.command == "ablate":
        outdir = Path(args.outdir or _env_outdir())
        params = dict(args.param)
        results = harness.ablation(args.gate, args.total_time,
                                   args.steps or harness.DEFAULT_STEPS[args.gate],
                                   args.arch, outdir, seed=args.seed, **params)
        labels = []
        for meta in results:
            print(f"{meta['architecture']}: best_L={meta['best_L']:.6g}")
            labels.append(meta["architecture"])
        series = [report.load_series(outdir / "ablation" /
                                     arch.replace("+", "p") / "series.jsonl")
                  for arch in args.arch]
        csv_path, svg_path = report.write_learning_curves(
            series, outdir, basename="ablation", labels=labels)
        print(f"curves: {csv_path} {svg_path}")
        return 0

    if args.command == "report":
        outdir = Path(args.outdir or _env_outdir())
        try:
            records = harness.load_records(outdir)
        except FileNotFoundError as exc:
            # curves need only series files, so missing records are fatal
            # only when there is nothing else to render
            if not args.curves:
                print(f"report: {exc}", file=sys.stderr)
                return 1
            records = None
        if records is not None:
            csv_path, svg_path = report.write_sweep_report(records, outdir)
            print(f"sweep: {csv_path} {svg_path}")
        if args.curves:
            series = [report.load_series(p) for p in args.curves]
            csv_path, svg_path = report.write_learning_curves(
                series, outdir, labels=args.labels)
            print(f"curves: {csv_path} {svg_path}")
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
