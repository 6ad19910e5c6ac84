"""Core data model for microcell energy sharing.

Energy quantities are nonnegative integers (mAh) throughout, which keeps
conservation checks exact and results reproducible bit-for-bit. A request
lives in exactly one time slot; a service may offer its energy to several
candidate slots. Instances serialize to a single JSON document with
top-level keys ``slots``, ``requests``, and ``services``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Mapping, Sequence


@dataclass
class EnergyService:
    """A provider's offer: a fixed energy amount usable in candidate slots."""

    service_id: str
    provider_id: str
    amount_mah: int
    location: tuple[float, float]
    candidate_slots: tuple[int, ...]
    remaining_mah: int = -1  # working balance; initialized to amount_mah

    def __post_init__(self):
        self.candidate_slots = tuple(self.candidate_slots)
        if self.remaining_mah < 0:
            self.remaining_mah = self.amount_mah


@dataclass
class EnergyRequest:
    """A consumer's need: an amount wanted within a single time slot."""

    request_id: str
    consumer_id: str
    amount_mah: int
    location: tuple[float, float]
    slot_index: int
    received_mah: int = 0  # working accumulator


@dataclass
class TimeSlot:
    """One slot of the microcell interval with its aggregated demand."""

    index: int
    start: datetime
    end: datetime
    reward: float
    required_energy_mah: int
    consumer_count: int
    requests: tuple[EnergyRequest, ...]
    registered_services: tuple[str, ...]


@dataclass
class MicrocellDemand:
    """Chronologically ordered slots covering the microcell interval."""

    slots: tuple[TimeSlot, ...]

    @property
    def interval(self) -> tuple[datetime, datetime]:
        return (self.slots[0].start, self.slots[-1].end)

    @property
    def total_required_mah(self) -> int:
        return sum(t.required_energy_mah for t in self.slots)

    @property
    def total_consumers(self) -> int:
        return sum(t.consumer_count for t in self.slots)

    def slot(self, index: int) -> TimeSlot:
        for t in self.slots:
            if t.index == index:
                return t
        raise KeyError(f"no slot with index {index}")

    def all_requests(self) -> list[EnergyRequest]:
        return [r for t in self.slots for r in t.requests]


@dataclass(frozen=True)
class Grant:
    """One entry of the allocation ledger: service -> request within a slot."""

    slot_index: int
    service_id: str
    request_id: str
    amount_mah: int


@dataclass
class CompositionResult:
    """Full allocation produced by one strategy run."""

    grants: tuple[Grant, ...]
    strategy_name: str
    threshold_mah: int
    unserved_demand_mah: dict[int, int] = field(default_factory=dict)

    def received_per_request(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for g in self.grants:
            totals[g.request_id] = totals.get(g.request_id, 0) + g.amount_mah
        return totals

    def used_per_service(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for g in self.grants:
            totals[g.service_id] = totals.get(g.service_id, 0) + g.amount_mah
        return totals

    def delivered_per_slot(self) -> dict[int, int]:
        totals: dict[int, int] = {}
        for g in self.grants:
            totals[g.slot_index] = totals.get(g.slot_index, 0) + g.amount_mah
        return totals

    def total_granted_mah(self) -> int:
        return sum(g.amount_mah for g in self.grants)

    def to_dict(self) -> dict:
        return {
            "grants": [
                {
                    "slot_index": g.slot_index,
                    "service_id": g.service_id,
                    "request_id": g.request_id,
                    "amount_mah": g.amount_mah,
                }
                for g in self.grants
            ],
            "strategy_name": self.strategy_name,
            "threshold_mah": self.threshold_mah,
            "unserved_demand_mah": {str(k): v for k, v in sorted(self.unserved_demand_mah.items())},
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "CompositionResult":
        grants = tuple(
            Grant(
                slot_index=int(g["slot_index"]),
                service_id=str(g["service_id"]),
                request_id=str(g["request_id"]),
                amount_mah=int(g["amount_mah"]),
            )
            for g in data["grants"]
        )
        return cls(
            grants=grants,
            strategy_name=str(data["strategy_name"]),
            threshold_mah=int(data["threshold_mah"]),
            unserved_demand_mah={int(k): int(v) for k, v in data.get("unserved_demand_mah", {}).items()},
        )


@dataclass(frozen=True)
class Violation:
    """One violated invariant, naming the offending entity."""

    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.message}"


def canonical_json(data) -> str:
    """Deterministic JSON encoding used for golden tests and checksums."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def default_reward(required_energy_mah: int) -> float:
    """Placeholder incentive: reward equals the slot's required energy."""
    return float(required_energy_mah)


def build_demand(
    slot_specs: Sequence[Mapping],
    requests: Sequence[EnergyRequest],
    services: Sequence[EnergyService],
    reward_fn: Callable[[int], float] = default_reward,
) -> MicrocellDemand:
    """Assemble a MicrocellDemand from raw slot specs, deriving aggregates.

    ``slot_specs`` entries carry ``index``, ``start``, ``end`` and optionally
    ``reward``; ``required_energy_mah`` and ``consumer_count`` are always
    recomputed from the request list, and ``registered_services`` from the
    services' candidate slots in registration order.
    """
    by_slot: dict[int, list[EnergyRequest]] = {}
    for r in requests:
        by_slot.setdefault(r.slot_index, []).append(r)

    slots = []
    for spec in sorted(slot_specs, key=lambda s: s["index"]):
        idx = int(spec["index"])
        slot_requests = tuple(by_slot.get(idx, ()))
        required = sum(r.amount_mah for r in slot_requests)
        consumers = len({r.consumer_id for r in slot_requests})
        start = _parse_ts(spec["start"])
        end = _parse_ts(spec["end"])
        reward = spec.get("reward")
        if reward is None:
            reward = reward_fn(required)
        registered = tuple(s.service_id for s in services if idx in s.candidate_slots)
        slots.append(
            TimeSlot(
                index=idx,
                start=start,
                end=end,
                reward=float(reward),
                required_energy_mah=required,
                consumer_count=consumers,
                requests=slot_requests,
                registered_services=registered,
            )
        )
    return MicrocellDemand(slots=tuple(slots))


def _parse_ts(value) -> datetime:
    if isinstance(value, datetime):
        return value
    return datetime.fromisoformat(str(value))


# ---------------------------------------------------------------------------
# Instance JSON interchange
# ---------------------------------------------------------------------------

def instance_to_dict(demand: MicrocellDemand, services: Sequence[EnergyService]) -> dict:
    return {
        "slots": [
            {
                "index": t.index,
                "start": t.start.isoformat(),
                "end": t.end.isoformat(),
                "reward": t.reward,
            }
            for t in demand.slots
        ],
        "requests": [
            {
                "request_id": r.request_id,
                "consumer_id": r.consumer_id,
                "amount_mah": r.amount_mah,
                "slot_index": r.slot_index,
                "x": r.location[0],
                "y": r.location[1],
            }
            for t in demand.slots
            for r in t.requests
        ],
        "services": [
            {
                "service_id": s.service_id,
                "provider_id": s.provider_id,
                "amount_mah": s.amount_mah,
                "candidate_slots": list(s.candidate_slots),
                "x": s.location[0],
                "y": s.location[1],
            }
            for s in services
        ],
    }


def instance_from_dict(data: Mapping) -> tuple[MicrocellDemand, list[EnergyService]]:
    requests = [
        EnergyRequest(
            request_id=str(r["request_id"]),
            consumer_id=str(r["consumer_id"]),
            amount_mah=int(r["amount_mah"]),
            location=(float(r.get("x", 0.0)), float(r.get("y", 0.0))),
            slot_index=int(r["slot_index"]),
        )
        for r in data["requests"]
    ]
    services = [
        EnergyService(
            service_id=str(s["service_id"]),
            provider_id=str(s["provider_id"]),
            amount_mah=int(s["amount_mah"]),
            location=(float(s.get("x", 0.0)), float(s.get("y", 0.0))),
            candidate_slots=tuple(int(i) for i in s["candidate_slots"]),
        )
        for s in data["services"]
    ]
    demand = build_demand(data["slots"], requests, services)
    return demand, services


def save_instance(path, demand: MicrocellDemand, services: Sequence[EnergyService]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(instance_to_dict(demand, services)))


def load_instance(path) -> tuple[MicrocellDemand, list[EnergyService]]:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_instance(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    max_candidate_slots: int | None = None,
) -> list[Violation]:
    """Check every instance invariant; return all violations (empty = valid).

    Violations are data, not failures: callers decide whether to raise.
    """
    out: list[Violation] = []
    slot_indices = [t.index for t in demand.slots]
    known = set(slot_indices)

    dup_slots = [i for i, n in Counter(slot_indices).items() if n > 1]
    for i in dup_slots:
        out.append(Violation(f"slot:{i}", "duplicate slot index"))

    prev: TimeSlot | None = None
    for t in demand.slots:
        if t.end <= t.start:
            out.append(Violation(f"slot:{t.index}", "slot duration is empty or reversed"))
        if prev is not None and t.start < prev.end:
            out.append(Violation(f"slot:{t.index}", f"overlaps or precedes slot {prev.index}"))
        prev = t

        required = sum(r.amount_mah for r in t.requests)
        if t.required_energy_mah != required:
            out.append(
                Violation(
                    f"slot:{t.index}",
                    f"required_energy_mah {t.required_energy_mah} != sum of requests {required}",
                )
            )
        consumers = len({r.consumer_id for r in t.requests})
        if t.consumer_count != consumers:
            out.append(
                Violation(
                    f"slot:{t.index}",
                    f"consumer_count {t.consumer_count} != distinct consumers {consumers}",
                )
            )
        if required <= 0:
            out.append(Violation(f"slot:{t.index}", "slot has no required energy (re must be > 0)"))
        for r in t.requests:
            if r.slot_index != t.index:
                out.append(Violation(f"request:{r.request_id}", f"listed under slot {t.index} but targets {r.slot_index}"))

    request_ids = [r.request_id for t in demand.slots for r in t.requests]
    for rid, n in Counter(request_ids).items():
        if n > 1:
            out.append(Violation(f"request:{rid}", "duplicate request id"))
    for r in demand.all_requests():
        if r.amount_mah <= 0:
            out.append(Violation(f"request:{r.request_id}", f"amount_mah {r.amount_mah} must be positive"))
        if not (0 <= r.received_mah <= max(r.amount_mah, 0)):
            out.append(Violation(f"request:{r.request_id}", f"received_mah {r.received_mah} outside [0, amount]"))
        if r.slot_index not in known:
            out.append(Violation(f"request:{r.request_id}", f"slot_index {r.slot_index} does not exist"))

    service_ids = [s.service_id for s in services]
    for sid, n in Counter(service_ids).items():
        if n > 1:
            out.append(Violation(f"service:{sid}", "duplicate service id"))
    for s in services:
        if s.amount_mah <= 0:
            out.append(Violation(f"service:{s.service_id}", f"amount_mah {s.amount_mah} must be positive"))
        if not (0 <= s.remaining_mah <= s.amount_mah):
            out.append(Violation(f"service:{s.service_id}", f"remaining_mah {s.remaining_mah} outside [0, amount]"))
        if len(s.candidate_slots) == 0:
            out.append(Violation(f"service:{s.service_id}", "candidate_slots is empty"))
        if len(set(s.candidate_slots)) != len(s.candidate_slots):
            out.append(Violation(f"service:{s.service_id}", "candidate_slots contains duplicates"))
        unknown = [i for i in s.candidate_slots if i not in known]
        if unknown:
            out.append(Violation(f"service:{s.service_id}", f"candidate slots {unknown} do not exist"))
        if max_candidate_slots is not None and len(s.candidate_slots) > max_candidate_slots:
            out.append(
                Violation(
                    f"service:{s.service_id}",
                    f"registered to {len(s.candidate_slots)} slots, limit {max_candidate_slots}",
                )
            )

    # cross-check registration lists against candidate sets
    for t in demand.slots:
        expected = [s.service_id for s in services if t.index in s.candidate_slots]
        if list(t.registered_services) != expected:
            out.append(Violation(f"slot:{t.index}", "registered_services inconsistent with candidate_slots"))

    return out


def validate_composition(
    result: CompositionResult,
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
) -> list[Violation]:
    """Check conservation, no-overfill, slot membership and the chunk rule.

    The partial-service threshold applies to the total a request receives in
    its slot (a chunk may be funded by several services). A chunk below
    min(threshold, request amount) is allowed only for the lone-request
    fallback: the slot's first-arrival request absorbing the whole pool
    after all later arrivals were removed.
    """
    out: list[Violation] = []
    svc = {s.service_id: s for s in services}
    req: dict[str, EnergyRequest] = {r.request_id: r for r in demand.all_requests()}
    known_slots = {t.index for t in demand.slots}

    for g in result.grants:
        tag = f"grant:{g.service_id}->{g.request_id}@{g.slot_index}"
        if g.amount_mah <= 0:
            out.append(Violation(tag, f"amount_mah {g.amount_mah} must be positive"))
        if g.slot_index not in known_slots:
            out.append(Violation(tag, f"slot {g.slot_index} does not exist"))
        s = svc.get(g.service_id)
        if s is None:
            out.append(Violation(tag, "unknown service"))
        elif g.slot_index not in s.candidate_slots:
            out.append(Violation(tag, f"slot {g.slot_index} not in service candidate slots"))
        r = req.get(g.request_id)
        if r is None:
            out.append(Violation(tag, "unknown request"))
        elif r.slot_index != g.slot_index:
            out.append(Violation(tag, f"request lives in slot {r.slot_index}, not {g.slot_index}"))

    for sid, used in result.used_per_service().items():
        s = svc.get(sid)
        if s is not None and used > s.amount_mah:
            out.append(Violation(f"service:{sid}", f"granted {used} exceeds offered {s.amount_mah}"))

    received = result.received_per_request()
    for rid, got in received.items():
        r = req.get(rid)
        if r is not None and got > r.amount_mah:
            out.append(Violation(f"request:{rid}", f"received {got} exceeds requested {r.amount_mah}"))

    threshold = result.threshold_mah
    if threshold > 0:
        for t in demand.slots:
            chunks = [(r, received.get(r.request_id, 0)) for r in t.requests]
            for pos, (r, got) in enumerate(chunks):
                if got == 0 or got >= min(threshold, r.amount_mah):
                    continue
                lone_fallback = pos == 0 and all(other == 0 for _, other in chunks[1:])
                if not lone_fallback:
                    out.append(
                        Violation(
                            f"request:{r.request_id}",
                            f"chunk {got} below threshold {threshold} without completing the request",
                        )
                    )

    return out
