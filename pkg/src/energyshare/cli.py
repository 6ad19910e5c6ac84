"""Command-line front end: generate, ingest, compose, sweep, validate.

Exit codes: 0 success, 2 parameter error, 3 validation error, 4 I/O error.
All randomness flows from explicit seeds; nothing is wall-clock seeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from .composition import Strategy, StrategyConfig, compose
from .domain import load_instance, save_instance, validate_composition, validate_instance
from .errors import (
    BudgetError,
    IngestError,
    InstanceValidationError,
    ParameterError,
    UndefinedRatioError,
)
from .harness import SweepSpec, run_sweep, write_figure_data
from .metrics import flatten_report_rows, qoe
from .workload import GeneratorConfig, generate, ingest_transactions

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--out", type=str, default=None, help="output file or directory")
    parser.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="energyshare",
        description="Compose crowdsourced energy services over time slots and score the result.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic instance JSON")
    _common_flags(p)
    p.add_argument("--config", type=str, help="GeneratorConfig JSON file; flags override it")
    p.add_argument("--requests", type=int, default=None)
    p.add_argument("--ratio", type=float, default=None, help="service-to-request ratio")
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--battery", type=int, default=None, help="nominal battery capacity (mAh)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="build an instance from transaction/energy CSVs")
    _common_flags(p)
    p.add_argument("--transactions", required=True)
    p.add_argument("--energy", required=True)
    p.add_argument("--mapping", required=True, help="mapping config JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("compose", help="run one strategy on an instance")
    _common_flags(p)
    p.add_argument("instance", help="instance JSON path")
    p.add_argument("--strategy", required=True, help="pb, db, greedy, or maxmin")
    p.add_argument("--threshold", type=int, default=0, help="minimum partial chunk (mAh)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("sweep", help="run a benchmark sweep from a spec file")
    _common_flags(p)
    p.add_argument("spec", help="SweepSpec JSON path")
    p.add_argument("--repetitions", type=int, default=None, help="override spec repetitions")
    p.add_argument(
        "--plot-data",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="emit per-figure fig_*.csv files",
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check an instance against every invariant")
    _common_flags(p)
    p.add_argument("instance", help="instance JSON path")
    p.set_defaults(func=cmd_validate)

    return parser


def cmd_generate(args) -> int:
    cfg_kwargs = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg_kwargs.update(json.load(fh))
        for key in ("amount_range_pct", "slots_per_service_range", "slot_weights"):
            if cfg_kwargs.get(key) is not None:
                cfg_kwargs[key] = tuple(cfg_kwargs[key])
    if args.seed is not None:
        cfg_kwargs["seed"] = args.seed
    if args.requests is not None:
        cfg_kwargs["num_requests"] = args.requests
    if args.ratio is not None:
        cfg_kwargs["service_to_request_ratio"] = args.ratio
    if args.slots is not None:
        cfg_kwargs["num_slots"] = args.slots
    if args.battery is not None:
        cfg_kwargs["nominal_battery_mah"] = args.battery
    try:
        cfg = GeneratorConfig(**cfg_kwargs)
    except TypeError as exc:
        raise ParameterError(f"incomplete generator config: {exc}") from exc

    demand, services = generate(cfg)
    out = args.out or "instance.json"
    save_instance(out, demand, services)
    print(
        f"wrote {out}: {len(demand.slots)} slots, "
        f"{len(demand.all_requests())} requests, {len(services)} services"
    )
    return EXIT_OK


def cmd_ingest(args) -> int:
    with open(args.mapping, "r", encoding="utf-8") as fh:
        mapping = json.load(fh)
    if args.seed is not None:
        mapping["seed"] = args.seed
    demand, services = ingest_transactions(args.transactions, args.energy, mapping)
    out = args.out or "instance.json"
    save_instance(out, demand, services)
    print(
        f"wrote {out}: {len(demand.slots)} slots, "
        f"{len(demand.all_requests())} requests, {len(services)} services"
    )
    return EXIT_OK


def cmd_compose(args) -> int:
    demand, services = load_instance(args.instance)
    try:
        strategy = Strategy(args.strategy.lower())
    except ValueError:
        raise ParameterError(f"unknown strategy {args.strategy!r}") from None
    result = compose(demand, services, StrategyConfig(strategy, args.threshold))
    leftover = validate_composition(result, demand, services)
    if leftover:
        for v in leftover:
            print(str(v), file=sys.stderr)
        return EXIT_VALIDATION
    if args.out:
        Path(args.out).write_text(result.to_json(), encoding="utf-8")
    report = qoe(demand, services, result, args.alpha)
    if args.format == "csv":
        writer = csv.DictWriter(sys.stdout, fieldnames=list(flatten_report_rows(report)[0]))
        writer.writeheader()
        for row in flatten_report_rows(report):
            writer.writerow(row)
    else:
        print(report.to_json())
    return EXIT_OK


def cmd_sweep(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        spec_data = json.load(fh)
    spec = SweepSpec.from_dict(spec_data)
    if args.repetitions is not None:
        spec = replace(spec, repetitions=args.repetitions)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)

    out_dir = Path(args.out or "sweep_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        result = run_sweep(spec)
        csv_path = out_dir / "sweep.csv"
        result.write_csv(csv_path)
        written.append(csv_path)
        json_path = out_dir / "sweep.json"
        result.write_json(json_path)
        written.append(json_path)
        if args.plot_data:
            for name in write_figure_data(result, out_dir):
                written.append(out_dir / name)
        manifest = {
            "config_path": str(args.spec),
            "spec": spec.to_dict(),
            "output_dir": str(out_dir),
            "files": {p.name: _sha256(p) for p in written},
        }
        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8")
        written.append(manifest_path)
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    print(f"wrote {len(written)} files to {out_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    demand, services = load_instance(args.instance)
    violations = validate_instance(demand, services)
    if violations:
        for v in violations:
            print(str(v), file=sys.stderr)
        print(f"{len(violations)} violations", file=sys.stderr)
        return EXIT_VALIDATION
    print("instance is valid")
    return EXIT_OK


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, BudgetError, UndefinedRatioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except InstanceValidationError as exc:
        for v in exc.violations:
            print(str(v), file=sys.stderr)
        print(f"error: {exc.args[0].splitlines()[0][:120]}", file=sys.stderr)
        return EXIT_VALIDATION
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
