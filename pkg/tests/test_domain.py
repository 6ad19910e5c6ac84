"""Domain model: invariants, validation reports, JSON interchange."""

from __future__ import annotations

import json

import pytest

from energyshare.composition import compose_pb
from energyshare.domain import (
    CompositionResult,
    EnergyRequest,
    EnergyService,
    Grant,
    build_demand,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
    validate_composition,
    validate_instance,
)
from energyshare.workload import GeneratorConfig, generate

from conftest import make_instance


def test_service_defaults_remaining_to_amount():
    s = EnergyService("s0", "p0", 700, (0.0, 0.0), (1, 2))
    assert s.remaining_mah == 700


def test_empty_candidate_slots_flagged():
    demand, services = make_instance({0: [100]}, [(100, [0])])
    services.append(EnergyService("s99", "p99", 50, (0.0, 0.0), ()))
    report = validate_instance(demand, services)
    assert any(v.entity == "service:s99" and "empty" in v.message for v in report)


def test_zero_required_energy_slot_flagged():
    # a slot with no requests has re = 0, which the formulation forbids
    requests = [EnergyRequest("r0", "c0", 100, (0.0, 0.0), 0)]
    services = [EnergyService("s0", "p0", 100, (0.0, 0.0), (0, 1))]
    slot_specs = [
        {"index": 0, "start": "2022-04-01T09:00:00", "end": "2022-04-01T10:00:00"},
        {"index": 1, "start": "2022-04-01T10:00:00", "end": "2022-04-01T11:00:00"},
    ]
    demand = build_demand(slot_specs, requests, services)
    report = validate_instance(demand, services)
    assert any(v.entity == "slot:1" and "re must be > 0" in v.message for v in report)


def test_generator_output_validates_and_rederives():
    demand, services = generate(
        GeneratorConfig(seed=11, num_requests=60, service_to_request_ratio=0.5)
    )
    assert validate_instance(demand, services) == []
    # re-derive the aggregates independently from the request lists
    for slot in demand.slots:
        assert slot.required_energy_mah == sum(r.amount_mah for r in slot.requests)
        assert slot.consumer_count == len({r.consumer_id for r in slot.requests})


def test_unknown_slot_and_duplicate_ids_flagged():
    demand, services = make_instance({0: [100, 50]}, [(100, [0])])
    services.append(EnergyService("s00", "p9", 50, (0.0, 0.0), (0, 7)))
    report = validate_instance(demand, services)
    messages = [str(v) for v in report]
    assert any("duplicate service id" in m for m in messages)
    assert any("[7]" in m and "do not exist" in m for m in messages)


def test_nonpositive_amounts_flagged():
    demand, services = make_instance({0: [100]}, [(100, [0])])
    services[0].amount_mah = 0
    services[0].remaining_mah = 0
    report = validate_instance(demand, services)
    assert any("must be positive" in v.message for v in report)


def test_max_candidate_slots_opt_in():
    demand, services = make_instance({0: [10], 1: [10], 2: [10], 3: [10]}, [(50, [0, 1, 2, 3])])
    assert validate_instance(demand, services) == []
    report = validate_instance(demand, services, max_candidate_slots=3)
    assert any("limit 3" in v.message for v in report)


def test_validate_composition_empty_grants_vacuous():
    demand, services = make_instance({0: [100]}, [(100, [0])])
    result = CompositionResult(grants=(), strategy_name="greedy", threshold_mah=0)
    assert validate_composition(result, demand, services) == []


def test_validate_composition_foreign_slot_grant():
    demand, services = make_instance({0: [100], 1: [100]}, [(100, [0]), (100, [1])])
    bad = CompositionResult(
        grants=(Grant(1, "s00", "r001", 50),),  # s00 is only registered for slot 0
        strategy_name="pb",
        threshold_mah=0,
    )
    report = validate_composition(bad, demand, services)
    assert any("not in service candidate slots" in v.message for v in report)


def test_validate_composition_conservation_and_overfill():
    demand, services = make_instance({0: [100]}, [(100, [0])])
    overdraw = CompositionResult(
        grants=(Grant(0, "s00", "r000", 80), Grant(0, "s00", "r000", 80)),
        strategy_name="pb",
        threshold_mah=0,
    )
    report = validate_composition(overdraw, demand, services)
    assert any("exceeds offered" in v.message for v in report)
    assert any("exceeds requested" in v.message for v in report)


def test_pb_output_validates_on_random_instances():
    for seed in range(100):
        demand, services = generate(
            GeneratorConfig(seed=seed, num_requests=40, service_to_request_ratio=0.4)
        )
        result = compose_pb(demand, services, threshold_mah=10)
        assert validate_composition(result, demand, services) == []


def test_instance_json_roundtrip(tmp_path):
    demand, services = generate(
        GeneratorConfig(seed=3, num_requests=30, service_to_request_ratio=0.6)
    )
    path = tmp_path / "instance.json"
    save_instance(path, demand, services)
    demand2, services2 = load_instance(path)
    assert instance_to_dict(demand2, services2) == instance_to_dict(demand, services)
    # the document is a single JSON object with the three top-level keys
    doc = json.loads(path.read_text())
    assert set(doc) == {"slots", "requests", "services"}
    assert {"request_id", "consumer_id", "amount_mah", "slot_index", "x", "y"} == set(
        doc["requests"][0]
    )


def test_composition_result_roundtrip():
    demand, services = make_instance({0: [60, 40]}, [(100, [0])])
    result = compose_pb(demand, services, threshold_mah=5)
    back = CompositionResult.from_dict(json.loads(result.to_json()))
    assert back == result


def test_instance_from_dict_preserves_arrival_order():
    demand, services = generate(
        GeneratorConfig(seed=5, num_requests=25, service_to_request_ratio=0.5)
    )
    again, _ = instance_from_dict(instance_to_dict(demand, services))
    for a, b in zip(demand.slots, again.slots):
        assert [r.request_id for r in a.requests] == [r.request_id for r in b.requests]
        assert a.registered_services == b.registered_services
