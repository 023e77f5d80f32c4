from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctipon.ran import (MacScheduler, SlotConfig, UeDemand, UlGrant, arrival_time,
                        fronthaul_bytes, mac_schedule, split_into_packets, ue_transmit)


def config(**overrides):
    fields = dict(slot_duration_ns=500_000, k2_slots=2, ue_processing_ns=0,
                  ru_processing_ns=0, fronthaul_overhead_factor=Fraction("1.1"),
                  mtu_bytes=1500, max_tbs_bytes=12_000, max_grants_per_slot=8)
    fields.update(overrides)
    return SlotConfig(**fields)


def test_no_demand_no_grants():
    mac = MacScheduler(config())
    assert mac.schedule(0, [UeDemand(0, 0)], 0) == []


def test_grant_is_min_of_buffer_and_max_tbs():
    mac = MacScheduler(config())
    grants = mac.schedule(0, [UeDemand(0, 8_000)], 0)
    assert len(grants) == 1 and grants[0].tbs_bytes == 8_000
    grants = mac.schedule(1, [UeDemand(0, 20_000)], 0)
    assert grants[0].tbs_bytes == 12_000


def test_one_grant_per_slot_alternates_between_two_ues():
    mac = MacScheduler(config(max_grants_per_slot=1))
    demands = [UeDemand(0, 9_000), UeDemand(1, 9_000)]
    picked = [mac.schedule(slot, demands, 0)[0].ue_id for slot in range(4)]
    assert picked == [0, 1, 0, 1]


def test_grant_records_issue_slot_and_k2():
    mac = MacScheduler(config())
    grant = mac.schedule(7, [UeDemand(3, 500)], 3_500_000)[0]
    assert grant.issue_slot == 7
    assert grant.k2_slots == 2
    assert grant.tx_slot == 9
    assert grant.issued_at == 3_500_000


def test_transport_block_split_at_mtu():
    at, sizes = ue_transmit(UlGrant(0, 0, 2, 8_000, 0),
                            config(fronthaul_overhead_factor=Fraction(1)))
    assert sizes == [1500] * 5 + [500]


def test_arrival_is_issue_plus_k2_slots():
    grant = UlGrant(0, 0, 2, 8_000, issued_at=1_000_000)
    assert arrival_time(grant, config()) == 1_000_000 + 1_000_000


def test_processing_delays_shift_arrival():
    grant = UlGrant(0, 0, 2, 8_000, issued_at=0)
    cfg = config(ue_processing_ns=7_000, ru_processing_ns=3_000)
    assert arrival_time(grant, cfg) == 1_010_000


def test_overhead_factor_inflates_bytes():
    assert fronthaul_bytes(8_000, Fraction("1.25")) == 10_000
    assert fronthaul_bytes(8_000, Fraction("1.1")) == 8_800
    assert fronthaul_bytes(8_000, Fraction(1)) == 8_000


def test_split_preserves_total():
    assert sum(split_into_packets(10_001, 1500)) == 10_001
    assert split_into_packets(1500, 1500) == [1500]


@settings(max_examples=50, deadline=None)
@given(n_ues=st.integers(2, 6), slots=st.integers(4, 40), per_slot=st.integers(1, 6))
def test_round_robin_fairness_within_one_grant(n_ues, slots, per_slot):
    mac = MacScheduler(config(max_grants_per_slot=per_slot))
    demands = [UeDemand(u, 10_000) for u in range(n_ues)]
    counts = {u: 0 for u in range(n_ues)}
    for slot in range(slots):
        for grant in mac.schedule(slot, demands, slot * 500_000):
            counts[grant.ue_id] += 1
    assert max(counts.values()) - min(counts.values()) <= 1


@settings(max_examples=100, deadline=None)
@given(tbs=st.integers(1, 200_000), k2=st.integers(1, 8),
       slot_us=st.sampled_from([125, 250, 500, 1000]),
       ue_us=st.integers(0, 200), ru_us=st.integers(0, 200),
       issued_ms=st.integers(0, 100))
def test_arrival_formula_matches_independent_recomputation(tbs, k2, slot_us, ue_us,
                                                           ru_us, issued_ms):
    cfg = config(slot_duration_ns=slot_us * 1000, k2_slots=k2,
                 ue_processing_ns=ue_us * 1000, ru_processing_ns=ru_us * 1000)
    grant = UlGrant(0, 0, k2, tbs, issued_ms * 1_000_000)
    # independent closed form, written out long-hand
    expected = issued_ms * 1_000_000
    for _ in range(k2):
        expected += slot_us * 1000
    expected += ue_us * 1000
    expected += ru_us * 1000
    at, sizes = ue_transmit(grant, cfg)
    assert at == expected
    assert sum(sizes) == -(-tbs * 11 // 10)  # ceil(tbs * 1.1)
