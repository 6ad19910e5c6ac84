"""Quality-of-experience scoring of a composition.

Per slot, the satisfaction ratio counts consumers who received any energy,
and the fulfillment ratio is the demand-weighted average fraction of each
request that was met. The microcell QoE blends the two across slots:

    qoe = alpha * sum(sr_i * beta_i) + (1 - alpha) * sum(fr_i * gamma_i)

with beta_i the slot's share of consumers and gamma_i its share of required
energy. All ratios are computed in floating point from exact integer mAh
sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .domain import CompositionResult, EnergyService, MicrocellDemand, TimeSlot, canonical_json
from .errors import ParameterError, UndefinedRatioError

DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class SlotScore:
    slot_index: int
    sr: float
    fr: float
    beta: float
    gamma: float


@dataclass
class QoEReport:
    """Per-slot ratios, slot weights, and the blended aggregate."""

    per_slot: list[SlotScore]
    alpha: float
    qoe: float
    energy_utilization: float

    @property
    def weighted_sr(self) -> float:
        """Consumer-weighted satisfaction across slots (first half of the blend)."""
        return sum(s.sr * s.beta for s in self.per_slot)

    @property
    def weighted_fr(self) -> float:
        """Demand-weighted fulfillment across slots (second half of the blend)."""
        return sum(s.fr * s.gamma for s in self.per_slot)

    def to_dict(self) -> dict:
        return {
            "per_slot": [
                {
                    "slot_index": s.slot_index,
                    "sr": s.sr,
                    "fr": s.fr,
                    "beta": s.beta,
                    "gamma": s.gamma,
                }
                for s in self.per_slot
            ],
            "alpha": self.alpha,
            "qoe": self.qoe,
            "energy_utilization": self.energy_utilization,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def satisfaction_ratio(slot: TimeSlot, result: CompositionResult) -> float:
    """Fraction of the slot's requests that received any energy at all.

    A consumer counts as satisfied on receiving the requested energy or any
    part of it.
    """
    if not slot.requests:
        raise UndefinedRatioError(f"slot {slot.index} has no requests")
    received = result.received_per_request()
    served = sum(1 for r in slot.requests if received.get(r.request_id, 0) > 0)
    return served / len(slot.requests)


def fulfillment_ratio(slot: TimeSlot, result: CompositionResult) -> float:
    """Demand-weighted average fraction of each request that was fulfilled.

    Computed as sum(w_i * received_i / requested_i) with w_i the request's
    share of the slot's total requested energy; algebraically this equals
    total received / total requested for the slot.
    """
    total = sum(r.amount_mah for r in slot.requests)
    if total <= 0:
        raise UndefinedRatioError(f"slot {slot.index} has no requested energy")
    received = result.received_per_request()
    return sum(
        (r.amount_mah / total) * (received.get(r.request_id, 0) / r.amount_mah)
        for r in slot.requests
    )


def energy_utilization(services: Sequence[EnergyService], result: CompositionResult) -> float:
    """Delivered energy as a fraction of the total energy on offer."""
    offered = sum(s.amount_mah for s in services)
    if offered <= 0:
        raise UndefinedRatioError("no offered energy")
    return result.total_granted_mah() / offered


def qoe(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    result: CompositionResult,
    alpha: float = DEFAULT_ALPHA,
) -> QoEReport:
    """Score a composition over the whole microcell interval."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha {alpha} outside [0, 1]")
    total_consumers = demand.total_consumers
    total_required = demand.total_required_mah
    if total_consumers <= 0 or total_required <= 0:
        raise UndefinedRatioError("microcell has no consumers or no required energy")

    per_slot = []
    for t in demand.slots:
        per_slot.append(
            SlotScore(
                slot_index=t.index,
                sr=satisfaction_ratio(t, result),
                fr=fulfillment_ratio(t, result),
                beta=t.consumer_count / total_consumers,
                gamma=t.required_energy_mah / total_required,
            )
        )
    blended = alpha * sum(s.sr * s.beta for s in per_slot) + (1.0 - alpha) * sum(
        s.fr * s.gamma for s in per_slot
    )
    return QoEReport(
        per_slot=per_slot,
        alpha=alpha,
        qoe=blended,
        energy_utilization=energy_utilization(services, result),
    )


def aggregate_satisfaction_ratio(demand: MicrocellDemand, result: CompositionResult) -> float:
    """Unweighted microcell aggregate: served requests / all requests."""
    requests = demand.all_requests()
    if not requests:
        raise UndefinedRatioError("microcell has no requests")
    received = result.received_per_request()
    return sum(1 for r in requests if received.get(r.request_id, 0) > 0) / len(requests)


def aggregate_fulfillment_ratio(demand: MicrocellDemand, result: CompositionResult) -> float:
    """Unweighted microcell aggregate: delivered energy / required energy."""
    total = demand.total_required_mah
    if total <= 0:
        raise UndefinedRatioError("microcell has no required energy")
    return result.total_granted_mah() / total


def aggregate_blend(
    demand: MicrocellDemand,
    result: CompositionResult,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Blend of the unweighted aggregates, used for whole-scenario summaries."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha {alpha} outside [0, 1]")
    sr = aggregate_satisfaction_ratio(demand, result)
    fr = aggregate_fulfillment_ratio(demand, result)
    return alpha * sr + (1.0 - alpha) * fr


def flatten_report_rows(report: QoEReport) -> list[dict]:
    """Per-slot rows for the CSV emitter."""
    return [
        {
            "slot_index": s.slot_index,
            "sr": s.sr,
            "fr": s.fr,
            "beta": s.beta,
            "gamma": s.gamma,
            "alpha": report.alpha,
            "qoe": report.qoe,
            "energy_utilization": report.energy_utilization,
        }
        for s in report.per_slot
    ]
