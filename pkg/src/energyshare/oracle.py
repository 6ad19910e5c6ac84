"""Exhaustive reference allocator for tiny instances.

Enumerates every assignment of quantum-sized energy units from services to
requests (respecting candidate slots, conservation, and no-overfill) and
returns one attaining the maximum blended QoE. The blend is piecewise
linear in the granted amounts with breakpoints only where a request
completes, so a quantum dividing every amount loses no optima.

Scoring here is done in exact rational arithmetic so dominance comparisons
against heuristics carry no floating-point slack. Exists purely for
testing; it does not scale past the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .domain import (
    CompositionResult,
    EnergyService,
    Grant,
    MicrocellDemand,
    validate_instance,
)
from .errors import BudgetError, InstanceValidationError, ParameterError

_HARD_CAPS = (3, 4, 6)  # slots, services, requests


@dataclass(frozen=True)
class OracleBudget:
    max_slots: int = 3
    max_services: int = 4
    max_requests: int = 6
    amount_quantum_mah: int = 1

    def __post_init__(self):
        caps = (self.max_slots, self.max_services, self.max_requests)
        if any(c <= 0 for c in caps) or self.amount_quantum_mah <= 0:
            raise ParameterError("budget bounds must be positive")
        if any(c > hard for c, hard in zip(caps, _HARD_CAPS)):
            raise ParameterError(f"budget bounds exceed hard caps {_HARD_CAPS}")


def exact_qoe(
    demand: MicrocellDemand,
    received_mah: Mapping[str, int],
    alpha: Fraction,
) -> Fraction:
    """Blended QoE of a received-energy map, as an exact fraction."""
    total_consumers = demand.total_consumers
    total_required = demand.total_required_mah
    sr_part = Fraction(0)
    fr_part = Fraction(0)
    for t in demand.slots:
        served = sum(1 for r in t.requests if received_mah.get(r.request_id, 0) > 0)
        got = sum(received_mah.get(r.request_id, 0) for r in t.requests)
        sr = Fraction(served, len(t.requests))
        fr = Fraction(got, t.required_energy_mah)
        sr_part += sr * Fraction(t.consumer_count, total_consumers)
        fr_part += fr * Fraction(t.required_energy_mah, total_required)
    return alpha * sr_part + (1 - alpha) * fr_part


def exact_qoe_of_result(
    demand: MicrocellDemand,
    result: CompositionResult,
    alpha: float | Fraction,
) -> Fraction:
    return exact_qoe(demand, result.received_per_request(), Fraction(alpha))


def _allocations(units: int, caps: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """All vectors 0 <= a_i <= caps[i] with sum(a) <= units, lexicographic."""
    if not caps:
        yield ()
        return
    head_max = min(units, caps[0])
    for a in range(head_max + 1):
        for rest in _allocations(units - a, caps[1:]):
            yield (a,) + rest


def optimal_qoe(
    demand: MicrocellDemand,
    services: Sequence[EnergyService],
    alpha: float | Fraction,
    quantum_mah: int,
    budget: OracleBudget | None = None,
) -> tuple[CompositionResult, float]:
    """Best attainable blended QoE on a tiny instance, by exhaustive search.

    Returns an optimal allocation and its QoE value. Among the
    Pareto-maximal optima, the allocation realizing the lexicographically
    smallest received-energy vector (requests in slot order) is returned,
    funded by services in registration order.
    """
    budget = budget or OracleBudget(amount_quantum_mah=quantum_mah)
    violations = validate_instance(demand, services)
    if violations:
        raise InstanceValidationError(violations)
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ParameterError(f"alpha {alpha} outside [0, 1]")
    if quantum_mah <= 0:
        raise ParameterError("quantum must be positive")

    requests = demand.all_requests()
    if len(demand.slots) > budget.max_slots:
        raise BudgetError(f"{len(demand.slots)} slots exceed budget {budget.max_slots}")
    if len(services) > budget.max_services:
        raise BudgetError(f"{len(services)} services exceed budget {budget.max_services}")
    if len(requests) > budget.max_requests:
        raise BudgetError(f"{len(requests)} requests exceed budget {budget.max_requests}")
    for r in requests:
        if r.amount_mah % quantum_mah:
            raise ParameterError(f"request {r.request_id} amount not a multiple of {quantum_mah}")
    for s in services:
        if s.amount_mah % quantum_mah:
            raise ParameterError(f"service {s.service_id} amount not a multiple of {quantum_mah}")

    need_units = tuple(r.amount_mah // quantum_mah for r in requests)
    compat = [
        tuple(i for i, r in enumerate(requests) if r.slot_index in s.candidate_slots)
        for s in services
    ]
    supply_units = [s.amount_mah // quantum_mah for s in services]

    # Forward sweep over services: the set of reachable received-unit vectors.
    states: set[tuple[int, ...]] = {(0,) * len(requests)}
    for s_idx, idxs in enumerate(compat):
        if not idxs:
            continue
        new_states: set[tuple[int, ...]] = set()
        units = supply_units[s_idx]
        for state in states:
            caps = tuple(need_units[i] - state[i] for i in idxs)
            for alloc in _allocations(units, caps):
                vec = list(state)
                for i, a in zip(idxs, alloc):
                    vec[i] += a
                new_states.add(tuple(vec))
        states = new_states

    # The blend decomposes per request: serving request r at all earns a
    # fixed prize alpha * nc_t / (N * |ER_t|), and every delivered mAh earns
    # (1 - alpha) / R, because the demand weights gamma cancel the per-slot
    # denominators. Tabulating both keeps the state scan exact and cheap.
    prizes = _request_prizes(demand, requests, alpha)
    per_mah = (1 - alpha) * Fraction(1, demand.total_required_mah)
    delivered_values = [per_mah * (u * quantum_mah) for u in range(sum(need_units) + 1)]

    best_vec: tuple[int, ...] | None = None
    best_value: Fraction | None = None
    for state in states:
        value = delivered_values[sum(state)]
        for units, prize in zip(state, prizes):
            if units > 0:
                value += prize
        if (
            best_value is None
            or value > best_value
            or (value == best_value and state < best_vec)
        ):
            best_value = value
            best_vec = state
    assert best_vec is not None and best_value is not None

    grants = _realize(requests, services, compat, supply_units, best_vec, quantum_mah)
    delivered: dict[int, int] = {t.index: 0 for t in demand.slots}
    for g in grants:
        delivered[g.slot_index] += g.amount_mah
    result = CompositionResult(
        grants=tuple(grants),
        strategy_name="oracle",
        threshold_mah=0,
        unserved_demand_mah={
            t.index: t.required_energy_mah - delivered[t.index] for t in demand.slots
        },
    )
    return result, float(best_value)


def _request_prizes(
    demand: MicrocellDemand,
    requests: Sequence,
    alpha: Fraction,
) -> list[Fraction]:
    """Satisfaction value of serving each request at all, in request order."""
    total_consumers = demand.total_consumers
    slot_term = {
        t.index: alpha * Fraction(t.consumer_count, total_consumers * len(t.requests))
        for t in demand.slots
    }
    return [slot_term[r.slot_index] for r in requests]


def _realize(
    requests: Sequence,
    services: Sequence[EnergyService],
    compat: list[tuple[int, ...]],
    supply_units: list[int],
    target: tuple[int, ...],
    quantum_mah: int,
) -> list[Grant]:
    """Find one per-service allocation realizing the target received vector."""
    residual = list(target)

    def search(s_idx: int) -> list[tuple[int, tuple[int, ...]]] | None:
        if s_idx == len(compat):
            return [] if all(v == 0 for v in residual) else None
        idxs = compat[s_idx]
        caps = tuple(residual[i] for i in idxs)
        for alloc in _allocations(supply_units[s_idx], caps):
            for i, a in zip(idxs, alloc):
                residual[i] -= a
            tail = search(s_idx + 1)
            if tail is not None:
                return [(s_idx, alloc)] + tail
            for i, a in zip(idxs, alloc):
                residual[i] += a
        return None

    plan = search(0)
    if plan is None:  # target came from the reachable set, so this cannot happen
        raise RuntimeError("failed to realize an enumerated received vector")

    grants: list[Grant] = []
    for s_idx, alloc in plan:
        for i, a in zip(compat[s_idx], alloc):
            if a > 0:
                r = requests[i]
                grants.append(
                    Grant(r.slot_index, services[s_idx].service_id, r.request_id, a * quantum_mah)
                )
    return grants
