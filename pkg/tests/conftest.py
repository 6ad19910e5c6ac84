"""Shared helpers for building small instances by hand."""

from __future__ import annotations

import pytest

from energyshare.domain import EnergyRequest, EnergyService, MicrocellDemand, build_demand


def make_instance(
    slot_amounts: dict[int, list[int]],
    services_spec: list[tuple[int, list[int]]],
    consumers: dict[int, str] | None = None,
) -> tuple[MicrocellDemand, list[EnergyService]]:
    """Build an instance from per-slot request amounts and (amount, slots) services.

    Requests are numbered in listing order (which fixes arrival order), one
    consumer per request unless ``consumers`` overrides a request index.
    """
    requests = []
    i = 0
    for slot in sorted(slot_amounts):
        for amount in slot_amounts[slot]:
            consumer = consumers.get(i, f"c{i:03d}") if consumers else f"c{i:03d}"
            requests.append(
                EnergyRequest(f"r{i:03d}", consumer, amount, (float(i), 0.0), slot)
            )
            i += 1
    services = [
        EnergyService(f"s{j:02d}", f"p{j:02d}", amount, (0.0, float(j)), tuple(slots))
        for j, (amount, slots) in enumerate(services_spec)
    ]
    n_slots = max(slot_amounts) + 1
    slot_specs = [
        {
            "index": k,
            "start": f"2022-04-01T{9 + k:02d}:00:00",
            "end": f"2022-04-01T{10 + k:02d}:00:00",
        }
        for k in range(n_slots)
    ]
    return build_demand(slot_specs, requests, services), services


@pytest.fixture
def single_slot_exact():
    """One slot, one request of 100, one service of 100."""
    return make_instance({0: [100]}, [(100, [0])])
