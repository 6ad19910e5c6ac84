"""Allocation strategies for composing energy services over time slots.

Four strategies share one ledger format:

* ``pb`` walks slots chronologically, consumes each slot's registered
  services first-come-first-served, and splits an insufficient pool equally
  among the slot's requests, subject to a minimum-chunk threshold.
* ``db`` is ``pb`` with slots processed in descending consumer-count order
  (ties by descending required energy) and services consumed least-flexible
  first.
* ``greedy`` is the FCFS baseline: requests are filled completely in arrival
  order or skipped; no splitting.
* ``maxmin`` first divides every multi-slot service across its candidate
  slots by water-filling against unmet demand, then fills requests
  completely in arrival order from each slot's pool.

A run never mutates its inputs: working balances live in private dicts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .domain import (
    CompositionResult,
    EnergyRequest,
    EnergyService,
    Grant,
    MicrocellDemand,
    TimeSlot,
    validate_instance,
)
from .errors import InstanceValidationError, ParameterError


class Strategy(str, Enum):
    PB = "pb"
    DB = "db"
    GREEDY = "greedy"
    MAXMIN = "maxmin"


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy
    threshold_mah: int = 0

    def __post_init__(self):
        if self.threshold_mah < 0:
            raise ParameterError(f"threshold_mah {self.threshold_mah} must be >= 0")


# Pool entries are mutable [service_id, amount] pairs drawn down in order.
Pool = list[list]


def _equal_split(total: int, caps: Sequence[int]) -> list[int]:
    """Split `total` as evenly as possible over positions, capped per position.

    Water-filling: every position receives min(cap, level) at the highest
    integer level the pool affords, and the leftover mAh go one each to the
    earliest uncapped positions. Delivers exactly min(total, sum(caps));
    uncapped positions never differ by more than one mAh.
    """
    if not caps:
        return []
    deliverable = min(total, sum(caps))
    out = [0] * len(caps)
    if deliverable <= 0:
        return out
    lo, hi = 0, max(caps)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if sum(min(c, mid) for c in caps) <= deliverable:
            lo = mid
        else:
            hi = mid - 1
    out = [min(c, lo) for c in caps]
    left = deliverable - sum(out)
    for i, c in enumerate(caps):
        if left == 0:
            break
        if out[i] < c:
            out[i] += 1
            left -= 1
    return out


def _draw(pool: Pool, start: int, amount: int, request: EnergyRequest) -> tuple[list[Grant], int]:
    """Draw `amount` for one request from the pool in order; returns new cursor."""
    grants = []
    need = amount
    i = start
    while need > 0:
        if i >= len(pool):
            raise RuntimeError("pool shortfall: caller must guarantee coverage")
        sid, avail = pool[i]
        take = min(need, avail)
        if take > 0:
            grants.append(Grant(request.slot_index, sid, request.request_id, take))
            pool[i][1] -= take
            need -= take
        if pool[i][1] == 0:
            i += 1
    return grants, i


def assign_energy(requests: Sequence[EnergyRequest], pool: Pool) -> list[Grant]:
    """Fully serve every request, drawing services in pool order.

    The caller guarantees the pool covers the slot's demand; a request may be
    funded by several services and one service may fund several requests.
    """
    grants: list[Grant] = []
    cursor = 0
    for req in requests:
        part, cursor = _draw(pool, cursor, req.amount_mah, req)
        grants.extend(part)
    return grants


def assign_partial_energy(
    requests: Sequence[EnergyRequest],
    pool: Pool,
    consumer_count: int,
    threshold_mah: int,
) -> list[Grant]:
    """Split an insufficient pool equally among the slot's requests.

    The equal share is capped at each request's need and capped surplus is
    re-split among the still-needy until the pool is drained. While the
    share falls below the threshold, last-arrival requests are removed from
    the split (they receive nothing) -- but never so many that the remaining
    requests could not absorb the whole pool, and never below one request.

    ``consumer_count`` is the slot's consumer tally, carried along from the
    slot record; the split itself operates on the request list.
    """
    total = sum(amount for _, amount in pool)
    if not pool or total <= 0:
        raise RuntimeError("empty pool: caller must guarantee a nonempty selection")
    active = list(requests)
    while len(active) > 1 and total < threshold_mah * len(active):
        if sum(r.amount_mah for r in active[:-1]) < total:
            break  # removing more would strand energy the slot can absorb
        active.pop()
    shares = _equal_split(total, [r.amount_mah for r in active])
    grants: list[Grant] = []
    cursor = 0
    for req, share in zip(active, shares):
        if share <= 0:
            continue
        part, cursor = _draw(pool, cursor, share, req)
        grants.extend(part)
    return grants


def remove_service(
    service_id: str,
    registrations: dict[int, list[str]],
    processed: Iterable[int],
) -> dict[int, list[str]]:
    """Drop a fully consumed service from every slot not yet processed."""
    done = set(processed)
    for idx, sids in registrations.items():
        if idx not in done and service_id in sids:
            registrations[idx] = [s for s in sids if s != service_id]
    return registrations


def _require_valid(demand: MicrocellDemand, services: Sequence[EnergyService]) -> None:
    violations = validate_instance(demand, services)
    if violations:
        raise InstanceValidationError(violations)


def _compose_partial_family(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    threshold_mah: int,
    name: str,
    slot_order: Callable[[Sequence[TimeSlot]], list[TimeSlot]],
    service_key: Callable[[str], tuple] | None,
) -> CompositionResult:
    _require_valid(demand, services)
    if threshold_mah < 0:
        raise ParameterError(f"threshold_mah {threshold_mah} must be >= 0")
    remaining = {s.service_id: s.amount_mah for s in services}
    registrations = {t.index: list(t.registered_services) for t in demand.slots}
    grants: list[Grant] = []
    unserved: dict[int, int] = {}
    processed: set[int] = set()

    for slot in slot_order(demand.slots):
        processed.add(slot.index)
        reg = registrations[slot.index]
        if service_key is not None:
            reg = sorted(reg, key=service_key)
        pool: Pool = []
        demand_left = slot.required_energy_mah
        for sid in reg:
            if demand_left <= 0:
                break
            take = min(demand_left, remaining[sid])
            if take <= 0:
                continue
            pool.append([sid, take])
            remaining[sid] -= take
            demand_left -= take
            if remaining[sid] == 0:
                remove_service(sid, registrations, processed)
        if demand_left == 0:
            slot_grants = assign_energy(slot.requests, pool)
        elif pool:
            slot_grants = assign_partial_energy(
                slot.requests, pool, slot.consumer_count, threshold_mah
            )
        else:
            slot_grants = []
        grants.extend(slot_grants)
        delivered = sum(g.amount_mah for g in slot_grants)
        unserved[slot.index] = slot.required_energy_mah - delivered

    return CompositionResult(
        grants=tuple(grants),
        strategy_name=name,
        threshold_mah=threshold_mah,
        unserved_demand_mah={i: unserved[i] for i in sorted(unserved)},
    )


def compose_pb(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    threshold_mah: int = 0,
) -> CompositionResult:
    """Partial-based composition: FCFS over slots, equal splits under scarcity."""
    return _compose_partial_family(
        demand,
        services,
        threshold_mah,
        Strategy.PB.value,
        slot_order=list,
        service_key=None,
    )


def compose_db(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    threshold_mah: int = 0,
) -> CompositionResult:
    """Demand-based composition: most demanding slots first, least flexible services first."""
    flexibility = {}

    def key(sid: str) -> tuple:
        return (flexibility[sid],)

    for s in services:
        flexibility[s.service_id] = len(s.candidate_slots)

    def order(slots: Sequence[TimeSlot]) -> list[TimeSlot]:
        return sorted(slots, key=lambda t: (-t.consumer_count, -t.required_energy_mah, t.index))

    return _compose_partial_family(
        demand, services, threshold_mah, Strategy.DB.value, slot_order=order, service_key=key
    )


def compose_greedy(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
) -> CompositionResult:
    """FCFS baseline: fill each request completely in arrival order or skip it.

    Slots run chronologically; a slot draws from the services registered to
    it, in registration order. A request larger than the slot's remaining
    pool is skipped so later requests that fit entirely can still be served.
    """
    _require_valid(demand, services)
    remaining = {s.service_id: s.amount_mah for s in services}
    grants: list[Grant] = []
    unserved: dict[int, int] = {}

    for slot in demand.slots:
        sids = list(slot.registered_services)
        avail = sum(remaining[sid] for sid in sids)
        delivered = 0
        cursor = 0
        for req in slot.requests:
            if avail == 0:
                break
            if req.amount_mah > avail:
                continue
            need = req.amount_mah
            while need > 0:
                sid = sids[cursor]
                take = min(need, remaining[sid])
                if take > 0:
                    grants.append(Grant(slot.index, sid, req.request_id, take))
                    remaining[sid] -= take
                    need -= take
                if remaining[sid] == 0:
                    cursor += 1
            avail -= req.amount_mah
            delivered += req.amount_mah
        unserved[slot.index] = slot.required_energy_mah - delivered

    return CompositionResult(
        grants=tuple(grants),
        strategy_name=Strategy.GREEDY.value,
        threshold_mah=0,
        unserved_demand_mah={i: unserved[i] for i in sorted(unserved)},
    )


def maxmin_slot_allocation(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
) -> dict[int, Pool]:
    """Phase 1 of the max-min baseline: divide services across their slots.

    Each multi-slot service is water-filled against its candidate slots'
    unmet demand (equal shares, capped at the slot's residual, surplus
    re-split); single-slot services go wholly to their slot. Services are
    processed in registration order.
    """
    unmet = {t.index: t.required_energy_mah for t in demand.slots}
    slot_pool: dict[int, Pool] = {t.index: [] for t in demand.slots}
    for s in services:
        cands = sorted(s.candidate_slots)
        if len(cands) == 1:
            idx = cands[0]
            slot_pool[idx].append([s.service_id, s.amount_mah])
            unmet[idx] = max(0, unmet[idx] - s.amount_mah)
        else:
            alloc = _equal_split(s.amount_mah, [unmet[i] for i in cands])
            for idx, amount in zip(cands, alloc):
                if amount > 0:
                    slot_pool[idx].append([s.service_id, amount])
                    unmet[idx] -= amount
    return slot_pool


def compose_maxmin(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    threshold_mah: int = 0,
) -> CompositionResult:
    """Max-min fair baseline over slots, then full fulfillment within slots.

    Phase 1 (see maxmin_slot_allocation) divides every service across its
    candidate slots. Phase 2 serves requests in arrival order, each filled
    completely or skipped, from the slot's allocated pool. The threshold is
    recorded but unused: full fulfillment never produces partial chunks.
    """
    _require_valid(demand, services)
    slot_pool = maxmin_slot_allocation(demand, services)

    grants: list[Grant] = []
    unserved: dict[int, int] = {}
    for slot in demand.slots:
        pool = slot_pool[slot.index]
        avail = sum(amount for _, amount in pool)
        delivered = 0
        cursor = 0
        for req in slot.requests:
            if avail == 0:
                break
            if req.amount_mah > avail:
                continue
            part, cursor = _draw(pool, cursor, req.amount_mah, req)
            grants.extend(part)
            avail -= req.amount_mah
            delivered += req.amount_mah
        unserved[slot.index] = slot.required_energy_mah - delivered

    return CompositionResult(
        grants=tuple(grants),
        strategy_name=Strategy.MAXMIN.value,
        threshold_mah=threshold_mah,
        unserved_demand_mah={i: unserved[i] for i in sorted(unserved)},
    )


def compose(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    config: StrategyConfig,
) -> CompositionResult:
    """Run the configured strategy."""
    if config.strategy is Strategy.PB:
        return compose_pb(demand, services, config.threshold_mah)
    if config.strategy is Strategy.DB:
        return compose_db(demand, services, config.threshold_mah)
    if config.strategy is Strategy.GREEDY:
        return compose_greedy(demand, services)
    if config.strategy is Strategy.MAXMIN:
        return compose_maxmin(demand, services, config.threshold_mah)
    raise ParameterError(f"unknown strategy {config.strategy!r}")
