"""Allocation strategies: hand-traced examples, helper contracts, properties."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from energyshare.composition import (
    Strategy,
    StrategyConfig,
    _equal_split,
    assign_energy,
    assign_partial_energy,
    compose,
    compose_db,
    compose_greedy,
    compose_maxmin,
    compose_pb,
    maxmin_slot_allocation,
    remove_service,
)
from energyshare.domain import EnergyRequest, EnergyService, validate_composition
from energyshare.errors import InstanceValidationError, ParameterError
from energyshare.metrics import fulfillment_ratio, qoe, satisfaction_ratio
from energyshare.workload import GeneratorConfig, generate

from conftest import make_instance


def received(result):
    return result.received_per_request()


def req(i, amount, slot=0):
    return EnergyRequest(f"r{i:03d}", f"c{i:03d}", amount, (0.0, 0.0), slot)


# ---------------------------------------------------------------------------
# partial-based composition
# ---------------------------------------------------------------------------

def test_pb_exact_match_single_slot(single_slot_exact):
    demand, services = single_slot_exact
    result = compose_pb(demand, services, threshold_mah=10)
    assert [(g.service_id, g.request_id, g.amount_mah) for g in result.grants] == [
        ("s00", "r000", 100)
    ]
    report = qoe(demand, services, result)
    assert report.qoe == 1.0
    assert result.unserved_demand_mah == {0: 0}


def test_pb_splits_scarce_pool_equally():
    demand, services = make_instance({0: [100, 100]}, [(100, [0])])
    result = compose_pb(demand, services, threshold_mah=10)
    assert received(result) == {"r000": 50, "r001": 50}
    assert satisfaction_ratio(demand.slot(0), result) == 1.0
    assert fulfillment_ratio(demand.slot(0), result) == pytest.approx(0.5)


def test_pb_first_slot_wins_shared_service():
    demand, services = make_instance({0: [100], 1: [100]}, [(100, [0, 1])])
    result = compose_pb(demand, services, threshold_mah=10)
    assert result.delivered_per_slot() == {0: 100}
    assert result.unserved_demand_mah == {0: 0, 1: 100}


def test_pb_partial_service_residual_flows_to_next_slot():
    # slot 0 needs 60 of the 100; the 40 left serves slot 1
    demand, services = make_instance({0: [60], 1: [40]}, [(100, [0, 1])])
    result = compose_pb(demand, services, threshold_mah=10)
    assert received(result) == {"r000": 60, "r001": 40}


def test_pb_fully_used_service_removed_from_later_slots():
    demand, services = make_instance(
        {0: [100], 1: [50], 2: [50]},
        [(100, [0, 1, 2]), (60, [1, 2])],
    )
    result = compose_pb(demand, services, threshold_mah=10)
    # s00 is consumed in slot 0 entirely; slots 1-2 only see s01
    assert result.delivered_per_slot() == {0: 100, 1: 50, 2: 10}
    by_slot_service = {(g.slot_index, g.service_id) for g in result.grants}
    assert ("s00", 1) not in {(s, i) for i, s in by_slot_service}
    assert by_slot_service == {(0, "s00"), (1, "s01"), (2, "s01")}


def test_pb_invalid_instance_raises_with_violations():
    demand, services = make_instance({0: [100]}, [(100, [0])])
    services.append(EnergyService("s99", "p99", 50, (0.0, 0.0), ()))
    with pytest.raises(InstanceValidationError) as exc_info:
        compose_pb(demand, services, threshold_mah=0)
    assert any(v.entity == "service:s99" for v in exc_info.value.violations)


def test_pb_threshold_removes_late_arrivals():
    # twelve identical requests, pool 100: a 12-way share of ~8.3 falls below
    # the threshold, so the last two arrivals are dropped and ten get 10 each
    demand, services = make_instance({0: [100] * 12}, [(100, [0])])
    result = compose_pb(demand, services, threshold_mah=10)
    got = received(result)
    assert [got.get(f"r{i:03d}", 0) for i in range(12)] == [10] * 10 + [0, 0]


# ---------------------------------------------------------------------------
# demand-based composition
# ---------------------------------------------------------------------------

def test_db_prioritizes_consumer_count_over_energy():
    # slot 0: 2 consumers, 800 mAh; slot 1: 5 consumers, 500 mAh
    demand, services = make_instance(
        {0: [500, 300], 1: [100, 100, 100, 100, 100]},
        [(500, [0, 1])],
    )
    result = compose_db(demand, services, threshold_mah=10)
    assert result.delivered_per_slot() == {1: 500}


def test_db_energy_breaks_consumer_ties():
    # equal consumer counts; the 800 mAh slot must be served first
    demand, services = make_instance(
        {0: [300, 200], 1: [500, 300]},
        [(500, [0, 1])],
    )
    result = compose_db(demand, services, threshold_mah=10)
    assert result.delivered_per_slot() == {1: 500}


def test_db_consumes_least_flexible_service_first():
    demand, services = make_instance(
        {0: [100], 1: [50], 2: [50]},
        [(100, [0, 1, 2]), (100, [0])],
    )
    result = compose_db(demand, services, threshold_mah=10)
    slot0 = [(g.service_id, g.amount_mah) for g in result.grants if g.slot_index == 0]
    assert slot0 == [("s01", 100)]  # the single-slot service is drawn first


def test_db_equals_pb_when_services_inflexible():
    for seed in range(20):
        demand, services = generate(
            GeneratorConfig(
                seed=seed,
                num_requests=30,
                service_to_request_ratio=0.5,
                slots_per_service_range=(1, 1),
            )
        )
        pb = compose_pb(demand, services, threshold_mah=10)
        db = compose_db(demand, services, threshold_mah=10)
        assert set(pb.grants) == set(db.grants)


# ---------------------------------------------------------------------------
# greedy baseline
# ---------------------------------------------------------------------------

def test_greedy_skips_requests_that_cannot_complete():
    demand, services = make_instance({0: [70, 20, 20, 10]}, [(50, [0])])
    result = compose_greedy(demand, services)
    assert received(result) == {"r001": 20, "r002": 20, "r003": 10}


def test_greedy_remainder_completes_request_exactly():
    demand, services = make_instance({0: [30, 20]}, [(50, [0])])
    result = compose_greedy(demand, services)
    assert received(result) == {"r000": 30, "r001": 20}


def test_abundance_equivalence_all_strategies():
    # ample compatible energy: every strategy fully serves every request
    for seed in (1, 2, 3):
        cfg = GeneratorConfig(
            seed=seed,
            num_requests=24,
            service_to_request_ratio=1.0,
            amount_range_pct=(0.05, 0.2),
            slots_per_service_range=(6, 6),
        )
        demand, services = generate(cfg)
        full = {r.request_id: r.amount_mah for r in demand.all_requests()}
        for strategy in Strategy:
            result = compose(demand, services, StrategyConfig(strategy, 10))
            assert received(result) == full, strategy


# ---------------------------------------------------------------------------
# max-min baseline
# ---------------------------------------------------------------------------

def test_maxmin_symmetric_split():
    demand, services = make_instance({0: [100], 1: [100], 2: [100]}, [(90, [0, 1, 2])])
    pools = maxmin_slot_allocation(demand, services)
    assert pools == {0: [["s00", 30]], 1: [["s00", 30]], 2: [["s00", 30]]}


def test_maxmin_waterfills_against_unmet_demand():
    demand, services = make_instance({0: [10], 1: [100], 2: [100]}, [(90, [0, 1, 2])])
    pools = maxmin_slot_allocation(demand, services)
    assert pools == {0: [["s00", 10]], 1: [["s00", 40]], 2: [["s00", 40]]}


def test_maxmin_single_slot_services_match_greedy():
    for seed in range(15):
        demand, services = generate(
            GeneratorConfig(
                seed=seed,
                num_requests=30,
                service_to_request_ratio=0.5,
                slots_per_service_range=(1, 1),
            )
        )
        mm = compose_maxmin(demand, services)
        greedy = compose_greedy(demand, services)
        assert set(mm.grants) == set(greedy.grants)


def test_maxmin_phase2_full_fulfillment():
    # slot 1 pool is 40; its 100 mAh request cannot be completed so it
    # receives nothing under max-min, unlike the partial strategies
    demand, services = make_instance({0: [10], 1: [100]}, [(50, [0, 1])])
    result = compose_maxmin(demand, services)
    assert received(result) == {"r000": 10}


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def test_assign_energy_single_service_two_requests():
    grants = assign_energy([req(0, 10), req(1, 20)], [["s0", 30]])
    assert [(g.service_id, g.request_id, g.amount_mah) for g in grants] == [
        ("s0", "r000", 10),
        ("s0", "r001", 20),
    ]


def test_assign_energy_request_spans_services():
    pool = [["s0", 10], ["s1", 20]]
    grants = assign_energy([req(0, 25)], pool)
    assert [(g.service_id, g.amount_mah) for g in grants] == [("s0", 10), ("s1", 15)]
    assert pool[1][1] == 5  # s1 retains the rest


def test_assign_energy_empty_requests():
    assert assign_energy([], [["s0", 10]]) == []


def test_assign_energy_shortfall_is_contract_violation():
    with pytest.raises(RuntimeError):
        assign_energy([req(0, 10), req(1, 20)], [["s0", 25]])


def test_assign_partial_equal_split():
    grants = assign_partial_energy([req(0, 100), req(1, 100)], [["s0", 100]], 2, 10)
    totals = {}
    for g in grants:
        totals[g.request_id] = totals.get(g.request_id, 0) + g.amount_mah
    assert totals == {"r000": 50, "r001": 50}


def test_assign_partial_threshold_removal_last_arrival_first():
    requests = [req(i, 100) for i in range(12)]
    grants = assign_partial_energy(requests, [["s0", 100]], 12, 10)
    totals = {g.request_id: g.amount_mah for g in grants}
    assert totals == {f"r{i:03d}": 10 for i in range(10)}


def test_assign_partial_cap_and_redistribute():
    grants = assign_partial_energy([req(0, 5), req(1, 200)], [["s0", 100]], 2, 10)
    totals = {g.request_id: g.amount_mah for g in grants}
    assert totals == {"r000": 5, "r001": 95}


def test_assign_partial_lone_request_takes_pool_below_threshold():
    # removal stops at one request, which absorbs the whole pool even when
    # the chunk is below the threshold
    grants = assign_partial_energy([req(0, 150), req(1, 150)], [["s0", 7]], 2, 10)
    totals = {g.request_id: g.amount_mah for g in grants}
    assert totals == {"r000": 7}


def test_assign_partial_never_strands_absorbable_energy():
    # the literal removal rule would drop r1 (share 6 < 10) and strand
    # 12 - 5 = 7 mAh; the split must keep delivering the whole pool
    grants = assign_partial_energy([req(0, 5), req(1, 8)], [["s0", 12]], 2, 10)
    assert sum(g.amount_mah for g in grants) == 12


def test_assign_partial_empty_pool_is_contract_violation():
    with pytest.raises(RuntimeError):
        assign_partial_energy([req(0, 10)], [], 1, 10)


def test_remove_service_spares_processed_slots():
    registrations = {1: ["a", "b"], 2: ["a"], 3: ["a", "c"]}
    remove_service("a", registrations, processed=[1])
    assert registrations == {1: ["a", "b"], 2: [], 3: ["c"]}


def test_remove_service_single_slot_noop():
    registrations = {1: ["a"], 2: ["b"]}
    remove_service("a", registrations, processed=[1])
    assert registrations == {1: ["a"], 2: ["b"]}


@given(
    total=st.integers(0, 2000),
    caps=st.lists(st.integers(0, 400), min_size=0, max_size=12),
)
def test_equal_split_properties(total, caps):
    out = _equal_split(total, caps)
    assert len(out) == len(caps)
    assert all(0 <= o <= c for o, c in zip(out, caps))
    assert sum(out) == min(total, sum(caps))
    uncapped = [o for o, c in zip(out, caps) if o < c]
    if uncapped:
        assert max(uncapped) - min(uncapped) <= 1


# ---------------------------------------------------------------------------
# cross-strategy properties
# ---------------------------------------------------------------------------

def test_determinism_byte_for_byte():
    cfg = GeneratorConfig(seed=77, num_requests=60, service_to_request_ratio=0.5)
    blobs = set()
    for _ in range(3):
        demand, services = generate(cfg)
        for strategy in Strategy:
            result = compose(demand, services, StrategyConfig(strategy, 10))
            blobs.add((strategy.value, result.to_json()))
    assert len(blobs) == len(Strategy)


def test_pb_db_never_leave_demand_with_usable_registered_energy():
    # after a run, a slot with unmet demand has no remaining registered,
    # unremoved service energy it was allowed to draw
    for seed in range(25):
        demand, services = generate(
            GeneratorConfig(seed=seed, num_requests=30, service_to_request_ratio=0.4)
        )
        for strategy, runner in ((Strategy.PB, compose_pb), (Strategy.DB, compose_db)):
            result = runner(demand, services, 10)
            used = result.used_per_service()
            fully_used = {s.service_id for s in services if used.get(s.service_id, 0) == s.amount_mah}
            for slot in demand.slots:
                if result.unserved_demand_mah[slot.index] > 0:
                    # every registered service is exhausted or was consumed
                    # (and therefore removed) by another slot
                    for sid in slot.registered_services:
                        assert sid in fully_used or used.get(sid, 0) == next(
                            s.amount_mah for s in services if s.service_id == sid
                        ) or sid in fully_used, (strategy, slot.index, sid)


def test_db_slot_processing_order_key():
    demand, services = generate(
        GeneratorConfig(seed=5, num_requests=40, service_to_request_ratio=0.2)
    )
    expected = sorted(
        demand.slots, key=lambda t: (-t.consumer_count, -t.required_energy_mah, t.index)
    )
    # the most demanding slot is served before less demanding ones whenever
    # a shared service exists; spot-check via delivery ordering on a
    # constructed pair instead of internals
    demand2, services2 = make_instance(
        {0: [100, 100], 1: [100, 100, 100]},
        [(300, [0, 1])],
    )
    result = compose_db(demand2, services2, 10)
    assert result.delivered_per_slot() == {1: 300}
    assert [t.index for t in expected] == sorted(
        range(len(demand.slots)),
        key=lambda i: (
            -demand.slots[i].consumer_count,
            -demand.slots[i].required_energy_mah,
            i,
        ),
    )


def test_strategy_config_rejects_negative_threshold():
    with pytest.raises(ParameterError):
        StrategyConfig(Strategy.PB, threshold_mah=-1)


def test_validate_composition_passes_for_all_strategies():
    for seed in range(25):
        demand, services = generate(
            GeneratorConfig(seed=seed, num_requests=40, service_to_request_ratio=0.5)
        )
        for strategy in Strategy:
            result = compose(demand, services, StrategyConfig(strategy, 10))
            assert validate_composition(result, demand, services) == []
