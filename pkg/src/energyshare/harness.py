"""Experiment sweeps over service-to-request ratios and chunk thresholds.

Each (ratio, repetition) pair deterministically derives a child seed from
the master seed and generates exactly one instance; every selected strategy
and threshold then runs on that same instance, so comparisons are paired.
Composition wall time is measured around the compose call only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from statistics import pstdev

from .composition import Strategy, StrategyConfig, compose
from .domain import EnergyRequest, EnergyService, MicrocellDemand, build_demand
from .errors import EnergyShareError, ParameterError
from .metrics import qoe
from .workload import GeneratorConfig, generate

DEFAULT_RATIOS = tuple(round(0.15 + 0.05 * i, 2) for i in range(16))  # 0.15 .. 0.90
DEFAULT_THRESHOLDS = (10, 30, 50, 70, 90)

SWEEP_COLUMNS = (
    "strategy",
    "ratio",
    "threshold",
    "mean_sr",
    "mean_fr",
    "mean_qoe",
    "mean_eu",
    "mean_runtime_ns",
    "std_qoe",
    "repetitions",
)


def _default_base_config() -> GeneratorConfig:
    return GeneratorConfig(seed=0, num_requests=200, service_to_request_ratio=0.5)


@dataclass
class SweepSpec:
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    thresholds: tuple[int, ...] = DEFAULT_THRESHOLDS
    repetitions: int = 100
    alpha: float = 0.5
    strategies: tuple[Strategy, ...] = tuple(Strategy)
    base_config: GeneratorConfig = field(default_factory=_default_base_config)
    master_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if any(not 0.0 < r <= 1.0 for r in self.ratios):
            raise ParameterError("ratios must lie in (0, 1]")
        if not self.ratios or not self.thresholds or not self.strategies:
            raise ParameterError("ratios, thresholds and strategies must be nonempty")
        self.strategies = tuple(Strategy(s) for s in self.strategies)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["strategies"] = [s.value for s in self.strategies]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        kwargs = dict(data)
        if "base_config" in kwargs and isinstance(kwargs["base_config"], dict):
            base = dict(kwargs["base_config"])
            for key in ("amount_range_pct", "slots_per_service_range", "slot_weights"):
                if key in base and base[key] is not None:
                    base[key] = tuple(base[key])
            kwargs["base_config"] = GeneratorConfig(**base)
        for key in ("ratios", "thresholds", "strategies"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class SweepRow:
    strategy: str
    ratio: float
    threshold: int
    mean_sr: float
    mean_fr: float
    mean_qoe: float
    mean_eu: float
    mean_runtime_ns: float
    std_qoe: float
    repetitions: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    spec: SweepSpec

    def row(self, strategy: str, ratio: float, threshold: int) -> SweepRow:
        for r in self.rows:
            if r.strategy == strategy and r.ratio == ratio and r.threshold == threshold:
                return r
        raise KeyError((strategy, ratio, threshold))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for r in self.rows:
                writer.writerow([getattr(r, c) for c in SWEEP_COLUMNS])

    def write_json(self, path) -> None:
        payload = {
            "spec": self.spec.to_dict(),
            "rows": [asdict(r) for r in self.rows],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)


def child_seed(master_seed: int, ratio_index: int, repetition: int) -> int:
    """Counter-based seed derivation: stable, splittable, order-independent."""
    digest = hashlib.blake2b(
        f"{master_seed}:{ratio_index}:{repetition}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run the full (ratio x repetition x strategy x threshold) grid."""
    acc: dict[tuple[str, float, int], dict[str, list[float]]] = {}

    def bucket(strategy: str, ratio: float, threshold: int) -> dict[str, list[float]]:
        return acc.setdefault(
            (strategy, ratio, threshold),
            {"sr": [], "fr": [], "qoe": [], "eu": [], "runtime": []},
        )

    for ri, ratio in enumerate(spec.ratios):
        for rep in range(spec.repetitions):
            seed = child_seed(spec.master_seed, ri, rep)
            cfg = replace(spec.base_config, seed=seed, service_to_request_ratio=ratio)
            try:
                demand, services = generate(cfg)
            except EnergyShareError as exc:
                raise type(exc)(f"ratio {ratio} repetition {rep} seed {seed}: {exc}") from exc
            for strategy in spec.strategies:
                for threshold in spec.thresholds:
                    try:
                        start = time.perf_counter_ns()
                        result = compose(
                            demand, services, StrategyConfig(strategy, threshold)
                        )
                        elapsed = time.perf_counter_ns() - start
                        report = qoe(demand, services, result, spec.alpha)
                    except EnergyShareError as exc:
                        raise type(exc)(
                            f"ratio {ratio} repetition {rep} seed {seed} "
                            f"strategy {strategy.value}: {exc}"
                        ) from exc
                    b = bucket(strategy.value, ratio, threshold)
                    b["sr"].append(report.weighted_sr)
                    b["fr"].append(report.weighted_fr)
                    b["qoe"].append(report.qoe)
                    b["eu"].append(report.energy_utilization)
                    b["runtime"].append(elapsed)

    rows = []
    for strategy in spec.strategies:
        for ratio in spec.ratios:
            for threshold in spec.thresholds:
                b = acc[(strategy.value, ratio, threshold)]
                n = len(b["qoe"])
                rows.append(
                    SweepRow(
                        strategy=strategy.value,
                        ratio=ratio,
                        threshold=threshold,
                        mean_sr=sum(b["sr"]) / n,
                        mean_fr=sum(b["fr"]) / n,
                        mean_qoe=sum(b["qoe"]) / n,
                        mean_eu=sum(b["eu"]) / n,
                        mean_runtime_ns=sum(b["runtime"]) / n,
                        std_qoe=pstdev(b["qoe"]) if n > 1 else 0.0,
                        repetitions=n,
                    )
                )
    return SweepResult(rows=rows, spec=spec)


FIGURE_FILES = (
    "fig_sr.csv",
    "fig_eu.csv",
    "fig_fr.csv",
    "fig_qoe.csv",
    "fig_threshold.csv",
    "fig_runtime.csv",
)

_RATIO_FIGS = {
    "fig_sr.csv": "mean_sr",
    "fig_eu.csv": "mean_eu",
    "fig_fr.csv": "mean_fr",
    "fig_qoe.csv": "mean_qoe",
    "fig_runtime.csv": "mean_runtime_ns",
}


def write_figure_data(result: SweepResult, out_dir) -> list[str]:
    """Emit one CSV per benchmark figure; returns the written file names.

    Ratio figures pivot strategies into columns at the first threshold;
    the threshold figure tracks sr/fr/qoe across thresholds for the
    partial-based strategy (or the first selected one) at the first ratio.
    """
    out = Path(out_dir)
    spec = result.spec
    base_threshold = spec.thresholds[0]
    strategies = [s.value for s in spec.strategies]
    written = []

    for name, column in _RATIO_FIGS.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ratio", *strategies])
            for ratio in spec.ratios:
                row = [ratio]
                for s in strategies:
                    row.append(getattr(result.row(s, ratio, base_threshold), column))
                writer.writerow(row)
        written.append(name)

    focus = Strategy.PB.value if Strategy.PB in spec.strategies else strategies[0]
    base_ratio = spec.ratios[0]
    path = out / "fig_threshold.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "mean_sr", "mean_fr", "mean_qoe"])
        for threshold in spec.thresholds:
            r = result.row(focus, base_ratio, threshold)
            writer.writerow([threshold, r.mean_sr, r.mean_fr, r.mean_qoe])
    written.append("fig_threshold.csv")
    return written


def reference_scenario() -> tuple[MicrocellDemand, list[EnergyService]]:
    """Frozen three-slot scenario used as the golden baseline fixture.

    Totals: 3200 mAh requested by 14 consumers, 2300 mAh offered. Running
    the greedy baseline on it serves exactly 7 consumers and delivers
    exactly 1300 mAh (satisfaction 0.5, fulfillment 0.40625).
    """
    def req(i: int, amount: int, slot: int) -> EnergyRequest:
        return EnergyRequest(
            request_id=f"r{i:02d}",
            consumer_id=f"c{i:02d}",
            amount_mah=amount,
            location=(float(i), 0.0),
            slot_index=slot,
        )

    requests = [
        # slot 0: six small requests, exactly covered by the slot's pool
        req(0, 100, 0),
        req(1, 150, 0),
        req(2, 150, 0),
        req(3, 200, 0),
        req(4, 250, 0),
        req(5, 350, 0),
        # slot 1: one oversized request the pool cannot complete
        req(6, 1000, 1),
        # slot 2: one small request that fits, six that no longer do
        req(7, 100, 2),
        req(8, 200, 2),
        req(9, 200, 2),
        req(10, 150, 2),
        req(11, 150, 2),
        req(12, 100, 2),
        req(13, 100, 2),
    ]
    services = [
        EnergyService("s00", "p00", 1200, (0.0, 0.0), (0,)),
        EnergyService("s01", "p01", 950, (1.0, 0.0), (1,)),
        EnergyService("s02", "p02", 150, (2.0, 0.0), (2,)),
    ]
    slot_specs = [
        {"index": 0, "start": "2022-04-01T09:00:00", "end": "2022-04-01T10:00:00"},
        {"index": 1, "start": "2022-04-01T10:00:00", "end": "2022-04-01T11:00:00"},
        {"index": 2, "start": "2022-04-01T11:00:00", "end": "2022-04-01T12:00:00"},
    ]
    demand = build_demand(slot_specs, requests, services)
    return demand, services
