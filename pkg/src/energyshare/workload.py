"""Synthetic instance generation and transaction-CSV ingestion.

The generator mirrors the benchmark setup: a 6-slot, hour-long-slot
interval; request and service amounts drawn uniformly from a percentage
band of a nominal battery; each service registered to a random subset of
1-3 slots. Identical seeds produce identical instances.

Ingestion turns two CSVs into the same instance format: a transactions
file supplies the spatio-temporal features of requests (who, when, where),
and an energy-transfer file supplies the empirical amount and duration
distributions plus the provider rows that seed services.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Mapping, Sequence

import numpy as np

from .domain import EnergyRequest, EnergyService, MicrocellDemand, build_demand
from .errors import IngestError, ParameterError

logger = logging.getLogger(__name__)

_MAX_PLACEMENT_TRIES = 10_000


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    num_requests: int
    service_to_request_ratio: float
    num_slots: int = 6
    slot_duration_minutes: int = 60
    interval_start: str = "2022-04-01T09:00:00"
    amount_range_pct: tuple[float, float] = (0.05, 1.0)
    nominal_battery_mah: int = 3000
    slots_per_service_range: tuple[int, int] = (1, 3)
    slot_weights: tuple[float, ...] | None = None
    ratio_mode: str = "count"  # or "energy"
    area_size: float = 100.0


def _check_config(cfg: GeneratorConfig) -> None:
    if not 0.0 < cfg.service_to_request_ratio <= 1.0:
        raise ParameterError(f"service_to_request_ratio {cfg.service_to_request_ratio} outside (0, 1]")
    lo, hi = cfg.amount_range_pct
    if not (0.0 < lo <= hi <= 1.0):
        raise ParameterError(f"amount_range_pct {cfg.amount_range_pct} outside (0, 1]")
    slo, shi = cfg.slots_per_service_range
    if not (1 <= slo <= shi <= cfg.num_slots):
        raise ParameterError(f"slots_per_service_range {cfg.slots_per_service_range} outside [1, {cfg.num_slots}]")
    if cfg.num_slots < 1:
        raise ParameterError("num_slots must be >= 1")
    if cfg.num_requests < cfg.num_slots:
        raise ParameterError(
            f"num_requests {cfg.num_requests} cannot populate every one of {cfg.num_slots} slots"
        )
    if cfg.nominal_battery_mah < 1 or cfg.slot_duration_minutes < 1:
        raise ParameterError("battery size and slot duration must be positive")
    if cfg.ratio_mode not in ("count", "energy"):
        raise ParameterError(f"unknown ratio_mode {cfg.ratio_mode!r}")
    if cfg.slot_weights is not None:
        if len(cfg.slot_weights) != cfg.num_slots:
            raise ParameterError("slot_weights length must equal num_slots")
        if any(w < 0 for w in cfg.slot_weights) or sum(cfg.slot_weights) <= 0:
            raise ParameterError("slot_weights must be nonnegative and sum to > 0")


def generate(cfg: GeneratorConfig) -> tuple[MicrocellDemand, list[EnergyService]]:
    """Draw one instance; the same config (seed included) gives the same bytes."""
    _check_config(cfg)
    rng = np.random.default_rng(cfg.seed)
    lo = math.ceil(cfg.amount_range_pct[0] * cfg.nominal_battery_mah)
    hi = math.floor(cfg.amount_range_pct[1] * cfg.nominal_battery_mah)
    lo = max(lo, 1)
    if lo > hi:
        raise ParameterError("amount range collapses to no integer mAh value")

    weights = None
    if cfg.slot_weights is not None:
        total = sum(cfg.slot_weights)
        weights = [w / total for w in cfg.slot_weights]

    # every slot must end with at least one request (re > 0); redraw if not
    for _ in range(_MAX_PLACEMENT_TRIES):
        placement = rng.choice(cfg.num_slots, size=cfg.num_requests, p=weights)
        if len(set(placement.tolist())) == cfg.num_slots:
            break
    else:
        raise ParameterError("could not place at least one request in every slot")

    request_amounts = rng.integers(lo, hi + 1, size=cfg.num_requests)
    request_xy = rng.uniform(0.0, cfg.area_size, size=(cfg.num_requests, 2))
    requests = [
        EnergyRequest(
            request_id=f"r{i:05d}",
            consumer_id=f"c{i:05d}",
            amount_mah=int(request_amounts[i]),
            location=(float(request_xy[i, 0]), float(request_xy[i, 1])),
            slot_index=int(placement[i]),
        )
        for i in range(cfg.num_requests)
    ]

    services: list[EnergyService] = []
    slo, shi = cfg.slots_per_service_range

    def draw_service(i: int) -> EnergyService:
        amount = int(rng.integers(lo, hi + 1))
        k = int(rng.integers(slo, shi + 1))
        cands = tuple(sorted(int(c) for c in rng.choice(cfg.num_slots, size=k, replace=False)))
        x, y = rng.uniform(0.0, cfg.area_size, size=2)
        return EnergyService(
            service_id=f"s{i:05d}",
            provider_id=f"p{i:05d}",
            amount_mah=amount,
            location=(float(x), float(y)),
            candidate_slots=cands,
        )

    if cfg.ratio_mode == "count":
        num_services = int(round(cfg.service_to_request_ratio * cfg.num_requests))
        services = [draw_service(i) for i in range(num_services)]
    else:
        target = cfg.service_to_request_ratio * sum(r.amount_mah for r in requests)
        offered = 0
        while offered < target:
            s = draw_service(len(services))
            services.append(s)
            offered += s.amount_mah

    start = datetime.fromisoformat(cfg.interval_start)
    step = timedelta(minutes=cfg.slot_duration_minutes)
    slot_specs = [
        {"index": i, "start": start + i * step, "end": start + (i + 1) * step}
        for i in range(cfg.num_slots)
    ]
    demand = build_demand(slot_specs, requests, services)
    return demand, services


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

TRANSACTION_COLUMNS = ("consumer_id", "date", "time", "x", "y", "shop_id")
ENERGY_COLUMNS = ("provider_id", "consumer_id", "date", "time", "amount_mah", "duration_minutes")


def _read_rows(path, colmap: Mapping[str, str], required: Sequence[str], label: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise IngestError(f"{label} file {path} is empty")
            for logical in required:
                actual = colmap.get(logical, logical)
                if actual not in reader.fieldnames:
                    raise IngestError(f"{label} file missing column {actual!r} (for {logical})")
            rows = [dict(row) for row in reader]
    except OSError as exc:
        raise IngestError(f"cannot read {label} file {path}: {exc}") from exc
    if not rows:
        raise IngestError(f"{label} file {path} has no data rows")
    return rows


def _row_ts(row: Mapping[str, str], colmap: Mapping[str, str], rownum: int, label: str) -> datetime:
    date = row[colmap.get("date", "date")].strip()
    time = row[colmap.get("time", "time")].strip()
    try:
        return datetime.fromisoformat(f"{date}T{time}")
    except ValueError as exc:
        raise IngestError(f"{label} row {rownum}: unparseable timestamp {date!r} {time!r}") from exc


def ingest_transactions(
    transactions_csv,
    energy_csv,
    mapping_config: Mapping,
) -> tuple[MicrocellDemand, list[EnergyService]]:
    """Build an instance from transaction and energy-transfer CSVs.

    ``mapping_config`` names the interval (``interval_start``,
    ``interval_end``, ``num_slots``), the draw ``seed``, and optional
    column-name maps under ``transactions`` and ``energy``. Transaction rows
    inside the interval become requests bucketed into slots; empty buckets
    are dropped and remaining slots reindexed. Each energy row seeds a
    service whose offered window (row timestamp plus a drawn duration)
    selects its candidate slots. Amounts are drawn, seeded, from the energy
    file's empirical amount column.
    """
    tx_map = dict(mapping_config.get("transactions", {}))
    en_map = dict(mapping_config.get("energy", {}))
    try:
        interval_start = datetime.fromisoformat(str(mapping_config["interval_start"]))
        interval_end = datetime.fromisoformat(str(mapping_config["interval_end"]))
        num_slots = int(mapping_config.get("num_slots", 6))
        seed = int(mapping_config.get("seed", 0))
    except (KeyError, ValueError) as exc:
        raise IngestError(f"mapping config incomplete or malformed: {exc}") from exc
    if interval_end <= interval_start or num_slots < 1:
        raise IngestError("mapping config: interval must be nonempty and num_slots >= 1")

    tx_rows = _read_rows(transactions_csv, tx_map, TRANSACTION_COLUMNS, "transactions")
    en_rows = _read_rows(energy_csv, en_map, ENERGY_COLUMNS, "energy")

    shop_filter = mapping_config.get("shop_id")
    if shop_filter is not None:
        col = tx_map.get("shop_id", "shop_id")
        tx_rows = [r for r in tx_rows if r[col] == str(shop_filter)]
        if not tx_rows:
            raise IngestError(f"no transaction rows for shop_id {shop_filter!r}")

    amounts = []
    durations = []
    for i, row in enumerate(en_rows, start=2):
        try:
            amounts.append(int(float(row[en_map.get("amount_mah", "amount_mah")])))
            durations.append(float(row[en_map.get("duration_minutes", "duration_minutes")]))
        except ValueError as exc:
            raise IngestError(f"energy row {i}: bad amount or duration: {exc}") from exc
    if any(a <= 0 for a in amounts):
        raise IngestError("energy file contains non-positive amounts")

    rng = np.random.default_rng(seed)
    slot_len = (interval_end - interval_start) / num_slots

    def bucket(ts: datetime) -> int | None:
        if not interval_start <= ts < interval_end:
            return None
        return min(int((ts - interval_start) / slot_len), num_slots - 1)

    kept: list[tuple[int, dict]] = []
    dropped_tx = 0
    for i, row in enumerate(tx_rows, start=2):
        ts = _row_ts(row, tx_map, i, "transactions")
        b = bucket(ts)
        if b is None:
            dropped_tx += 1
            continue
        kept.append((b, row))
    if not kept:
        raise IngestError("all transaction rows fall outside the configured interval")
    if dropped_tx:
        logger.info("ingest: dropped %d transaction rows outside the interval", dropped_tx)

    surviving = sorted({b for b, _ in kept})
    new_index = {old: new for new, old in enumerate(surviving)}

    requests = []
    xy_pool = []
    for n, (b, row) in enumerate(kept):
        try:
            x = float(row[tx_map.get("x", "x")])
            y = float(row[tx_map.get("y", "y")])
        except ValueError as exc:
            raise IngestError(f"transactions row for request {n}: bad coordinates: {exc}") from exc
        xy_pool.append((x, y))
        requests.append(
            EnergyRequest(
                request_id=f"r{n:05d}",
                consumer_id=str(row[tx_map.get("consumer_id", "consumer_id")]),
                amount_mah=int(rng.choice(amounts)),
                location=(x, y),
                slot_index=new_index[b],
            )
        )

    services = []
    dropped_services = 0
    for n, row in enumerate(en_rows):
        ts = _row_ts(row, en_map, n + 2, "energy")
        duration = timedelta(minutes=float(rng.choice(durations)))
        window_end = ts + duration
        cands = [
            new_index[old]
            for old in surviving
            if ts < interval_start + (old + 1) * slot_len and window_end > interval_start + old * slot_len
        ]
        if not cands:
            dropped_services += 1
            continue
        x, y = xy_pool[int(rng.integers(0, len(xy_pool)))]
        services.append(
            EnergyService(
                service_id=f"s{n:05d}",
                provider_id=str(row[en_map.get("provider_id", "provider_id")]),
                amount_mah=int(rng.choice(amounts)),
                location=(x, y),
                candidate_slots=tuple(sorted(cands)),
            )
        )
    if dropped_services:
        logger.info("ingest: dropped %d provider rows with no overlapping slot", dropped_services)

    slot_specs = [
        {
            "index": new_index[old],
            "start": interval_start + old * slot_len,
            "end": interval_start + (old + 1) * slot_len,
        }
        for old in surviving
    ]
    demand = build_demand(slot_specs, requests, services)
    return demand, services
