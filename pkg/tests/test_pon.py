from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctipon.metrics import MetricsLedger
from ctipon.pon import (BwMap, DbruReport, GrantEntry, GrantPurpose, InvariantViolation,
                        OltRole, OltScheduler, Packet, PendingForecast, PriorityClass,
                        ScalarTcont, cascade_allocate, derive_capacity, execute_entry,
                        generate_dbru, validate_bwmap)

from conftest import CAPACITY, FRAME_NS, LINE_RATE


def make_queue(ledger, limit=1 << 20, alloc=1, cls=PriorityClass.FRONTHAUL_USER):
    return ScalarTcont(alloc, 1, cls, limit, ledger, flow_id="flow")


def pkt(size, at=0, flow="flow"):
    return Packet(size, at, at, flow)


# -- capacity derivation ------------------------------------------------------

def test_default_capacity_is_line_rate_times_frame():
    assert derive_capacity(LINE_RATE, FRAME_NS, Fraction(0)) == 155_520


def test_capacity_overhead_fraction_scales_down():
    assert derive_capacity(LINE_RATE, FRAME_NS, Fraction(1, 10)) == 139_968


# -- queue behaviour ----------------------------------------------------------

def test_enqueue_increases_occupancy(ledger):
    q = make_queue(ledger)
    assert q.push(pkt(1500))
    assert q.occupancy_bytes == 1500


def test_enqueue_over_limit_drops_and_keeps_occupancy(ledger):
    q = make_queue(ledger, limit=2000)
    assert q.push(pkt(1500))
    assert not q.push(pkt(1500))
    assert q.occupancy_bytes == 1500
    assert ledger.flows["flow"].dropped_bytes == 1500
    assert ledger.flows["flow"].offered_bytes == 3000


def test_fifo_order_preserved(ledger, params):
    q = make_queue(ledger)
    q.push(Packet(1000, 0, 0, "a"))
    q.push(Packet(1000, 1, 1, "b"))
    entry = GrantEntry(1, 64, 2000, True)
    _, sent, burst = execute_entry(entry, q, 0, params.timing(), 0)
    assert sent == 2000
    assert burst.flows == ["a", "b"]


# -- DBRu ---------------------------------------------------------------------

def test_dbru_empty_queue_reports_zero(ledger):
    q = make_queue(ledger)
    assert generate_dbru(q, 10, 1).occupancy_bytes == 0


def test_dbru_reports_occupancy_identity(ledger):
    q = make_queue(ledger)
    for _ in range(8):
        q.push(pkt(1500))
    assert generate_dbru(q, 10, 1).occupancy_bytes == 12000


def test_dbru_sampled_after_burst_drain(ledger, params):
    # 12000 queued, grant drains 4000 -> the report riding that burst says 8000
    q = make_queue(ledger)
    for _ in range(3):
        q.push(pkt(4000))
    entry = GrantEntry(1, 64, 4000, True)
    execute_entry(entry, q, 0, params.timing(), 0)
    assert generate_dbru(q, 99, 1).occupancy_bytes == 8000


# -- baseline map construction -----------------------------------------------

def make_scheduler(params, classes=None):
    if classes is None:
        classes = {1: PriorityClass.FRONTHAUL_USER, 2: PriorityClass.BACKGROUND}
    return OltScheduler(params, classes)


def test_idle_pon_gets_polling_grants_only(params):
    sched = make_scheduler(params)
    bwmap = sched.build_baseline(1, CAPACITY, 0)
    assert len(bwmap.entries) == 2
    assert all(e.purpose is GrantPurpose.POLL for e in bwmap.entries)
    assert all(e.request_dbru for e in bwmap.entries)
    assert all(e.grant_bytes == params.poll_grant_bytes for e in bwmap.entries)
    # sequential placement: overhead, poll, guard, overhead, poll
    assert [e.start_offset_bytes for e in bwmap.entries] == [64, 164]


def test_single_report_granted_in_full(params):
    sched = OltScheduler(params, {1: PriorityClass.FRONTHAUL_USER})
    sched.accept_report(DbruReport(1, 10_000, 50, sampled_frame=1))
    bwmap = sched.build_baseline(2, CAPACITY, 0)
    assert len(bwmap.entries) == 1
    entry = bwmap.entries[0]
    assert entry.grant_bytes == 10_000
    assert entry.start_offset_bytes == 64
    assert entry.purpose is GrantPurpose.DATA


def test_saturated_demand_split_proportionally(params):
    sched = make_scheduler(params)
    sched.accept_report(DbruReport(1, 100_000, 50, 1))
    sched.accept_report(DbruReport(2, 100_000, 50, 1))
    bwmap = sched.build_baseline(2, CAPACITY, 0)
    grants = sorted(e.grant_bytes for e in bwmap.entries)
    # avail = 155520 - 2*(64+32) = 155328; equal split word-floored
    assert grants == [77_664, 77_664]


def test_remainder_goes_to_lowest_alloc_id(params):
    sched = make_scheduler(params)
    sched.accept_report(DbruReport(1, 100_000, 50, 1))
    sched.accept_report(DbruReport(2, 200_000, 50, 1))
    bwmap = sched.build_baseline(2, CAPACITY, 0)
    by_alloc = {e.alloc_id: e.grant_bytes for e in bwmap.entries}
    avail = CAPACITY - 2 * 96
    share1 = (100_000 * avail // 300_000) // 4 * 4
    share2 = (200_000 * avail // 300_000) // 4 * 4
    leftover = (avail - share1 - share2) // 4 * 4
    assert by_alloc[1] == share1 + leftover
    assert by_alloc[2] == share2
    assert share1 + leftover + share2 <= avail


def test_outstanding_grants_are_not_regranted(params):
    sched = OltScheduler(params, {1: PriorityClass.FRONTHAUL_USER})
    sched.accept_report(DbruReport(1, 10_000, 50, 1))
    first = sched.build_baseline(2, CAPACITY, 0)
    assert first.entries[0].grant_bytes == 10_000
    # same report again (no newer sample): nothing new to grant, poll only
    second = sched.build_baseline(3, CAPACITY, 0)
    assert all(e.purpose is GrantPurpose.POLL for e in second.entries)
    # a fresh report sampled after the drain clears the slate
    sched.accept_report(DbruReport(1, 4_000, 300, sampled_frame=2))
    third = sched.build_baseline(4, CAPACITY, 0)
    assert third.entries[0].grant_bytes == 4_000


def test_polling_period_spaces_idle_polls(params):
    from dataclasses import replace
    sched = OltScheduler(replace(params, polling_period_frames=3),
                         {1: PriorityClass.BACKGROUND})
    polled = [bool(sched.build_baseline(k, CAPACITY, 0).entries) for k in range(1, 8)]
    assert polled == [True, False, False, True, False, False, True]


# -- cooperative map construction ---------------------------------------------

def fc(alloc, arrival, nbytes, published=0, frame=FRAME_NS):
    return PendingForecast(alloc, arrival, nbytes, published, arrival // frame)


def test_forecast_placed_at_word_boundary_at_or_after_arrival(params):
    sched = OltScheduler(params, {1: PriorityClass.FRONTHAUL_USER})
    sched.accept_forecast(fc(1, FRAME_NS + 62_500, 12_000))  # mid-frame of frame 1
    bwmap = sched.build_cooperative(1, CAPACITY, 0)
    entry = [e for e in bwmap.entries if e.purpose is GrantPurpose.FORECAST][0]
    assert entry.grant_bytes == 12_000
    # 62.5 us at 9.95328 Gb/s is exactly 77760 bytes, already word aligned
    assert entry.start_offset_bytes == 77_760
    assert params.timing().time_of_bytes(entry.start_offset_bytes) >= 62_500


def test_forecast_never_displaced_by_background_demand(params):
    sched = make_scheduler(params)
    sched.accept_report(DbruReport(2, 150_000, 50, 1))
    sched.accept_forecast(fc(1, FRAME_NS, 12_000))
    bwmap = sched.build_cooperative(1, CAPACITY, 0)
    fh = [e for e in bwmap.entries if e.alloc_id == 1][0]
    bg = [e for e in bwmap.entries if e.alloc_id == 2][0]
    assert fh.grant_bytes == 12_000
    assert fh.start_offset_bytes == 64
    # background gets everything that is left: 155520 - 12096 - 96
    assert bg.grant_bytes == 143_328


def test_cooperative_without_forecasts_equals_baseline(params):
    a = make_scheduler(params)
    b = make_scheduler(params)
    for frame in range(1, 8):
        occ = (frame * 37) % 5 * 30_000
        a.accept_report(DbruReport(1, occ, frame * FRAME_NS, frame))
        b.accept_report(DbruReport(1, occ, frame * FRAME_NS, frame))
        a.accept_report(DbruReport(2, 120_000, frame * FRAME_NS, frame))
        b.accept_report(DbruReport(2, 120_000, frame * FRAME_NS, frame))
        coop = a.build_cooperative(frame, CAPACITY, 0)
        base = b.build_baseline(frame, CAPACITY, 0)
        assert coop.signature() == base.signature()


def test_forecast_overflow_defers_oldest_first(params):
    sched = OltScheduler(params, {1: PriorityClass.FRONTHAUL_USER})
    sched.accept_forecast(fc(1, FRAME_NS, 100_000, published=0))
    sched.accept_forecast(fc(1, FRAME_NS + 10, 100_000, published=5))
    bwmap = sched.build_cooperative(1, CAPACITY, 0)
    assert len([e for e in bwmap.entries if e.purpose is GrantPurpose.FORECAST]) == 1
    assert sched.forecast_deferrals == 1
    rolled = sched.build_cooperative(2, CAPACITY, 0)
    assert [e.grant_bytes for e in rolled.entries if e.purpose is GrantPurpose.FORECAST] \
        == [100_000]


def test_stale_forecast_discarded_with_counter(params):
    sched = OltScheduler(params, {1: PriorityClass.FRONTHAUL_USER})
    sched.build_baseline(5, CAPACITY, 0)
    accepted = sched.accept_forecast(fc(1, 3 * FRAME_NS, 5_000))
    assert not accepted
    assert sched.stale_forecasts == 1
    assert not sched.pending_forecasts


# -- burst execution ----------------------------------------------------------

def test_packets_never_fragment_across_grants(ledger, params):
    q = make_queue(ledger)
    for _ in range(3):
        q.push(pkt(1500))
    entry = GrantEntry(1, 64, 3000, True)
    _, sent, burst = execute_entry(entry, q, 0, params.timing(), 0)
    assert sent == 3000
    assert len(burst.sizes) == 2
    assert q.occupancy_bytes == 1500


def test_empty_queue_grant_is_fully_wasted(ledger, params):
    q = make_queue(ledger)
    entry = GrantEntry(1, 64, 3000, True)
    _, sent, burst = execute_entry(entry, q, 0, params.timing(), 0)
    assert sent == 0 and burst is None


def test_grant_equal_to_occupancy_empties_queue(ledger, params):
    q = make_queue(ledger)
    for _ in range(4):
        q.push(pkt(1500))
    entry = GrantEntry(1, 64, 6000, True)
    _, sent, _ = execute_entry(entry, q, 0, params.timing(), 0)
    assert sent == 6000
    assert q.occupancy_bytes == 0


def test_burst_timing_matches_offset_serialization(ledger, params):
    q = make_queue(ledger)
    q.push(pkt(1500, at=0))
    entry = GrantEntry(1, 1000, 1500, True)
    frame_start = 10 * FRAME_NS
    timing = params.timing()
    _, _, burst = execute_entry(entry, q, frame_start, timing, params.upstream_prop_ns)
    assert burst.first_grant[0] == frame_start + timing.time_of_bytes(1000)
    assert burst.delivered[0] == frame_start + timing.time_of_bytes(2500) + 10_000


# -- validation & precedence ----------------------------------------------------

def test_overlapping_entries_rejected(params):
    bwmap = BwMap(1, (GrantEntry(1, 64, 1000, True), GrantEntry(2, 900, 1000, True)), 0)
    with pytest.raises(InvariantViolation):
        validate_bwmap(bwmap, params, CAPACITY, {1: PriorityClass.BACKGROUND,
                                                 2: PriorityClass.BACKGROUND})


def test_capacity_overrun_rejected(params):
    bwmap = BwMap(1, (GrantEntry(1, 64, CAPACITY, True),), 0)
    with pytest.raises(InvariantViolation):
        validate_bwmap(bwmap, params, CAPACITY, {1: PriorityClass.BACKGROUND})


def test_control_class_never_scheduled_after_background(params):
    classes = {5: PriorityClass.CONTROL, 2: PriorityClass.BACKGROUND,
               3: PriorityClass.BACKGROUND}
    sched = OltScheduler(params, classes)
    for frame in range(1, 20):
        sched.accept_report(DbruReport(5, 2_000, frame * FRAME_NS, frame))
        sched.accept_report(DbruReport(2, 90_000, frame * FRAME_NS, frame))
        sched.accept_report(DbruReport(3, 90_000, frame * FRAME_NS, frame))
        bwmap = sched.build_baseline(frame, CAPACITY, 0)  # validates internally
        offsets = {e.alloc_id: e.start_offset_bytes for e in bwmap.entries}
        if 5 in offsets and 2 in offsets:
            assert offsets[5] < min(offsets[2], offsets[3])


@settings(max_examples=60, deadline=None)
@given(
    occ=st.lists(st.integers(min_value=0, max_value=400_000), min_size=1, max_size=5),
    capacity=st.integers(min_value=2_000, max_value=CAPACITY),
)
def test_random_demand_respects_capacity_and_alignment(occ, capacity):
    from conftest import PARAMS
    classes = {i + 1: PriorityClass.BACKGROUND for i in range(len(occ))}
    sched = OltScheduler(PARAMS, classes)
    for alloc, value in enumerate(occ, start=1):
        sched.accept_report(DbruReport(alloc, value, 10, 1))
    bwmap = sched.build_baseline(2, capacity, 0)  # raises on violation
    total = sum(e.grant_bytes + 96 for e in bwmap.entries)
    assert total <= capacity
    for e in bwmap.entries:
        if e.purpose is GrantPurpose.DATA:
            assert e.grant_bytes % PARAMS.word_bytes == 0


# -- cascade -------------------------------------------------------------------

def master():
    return OltRole(0, "master", cascade_peers=[1, 2])


def test_cascade_zero_demand_gets_floor_share():
    shares = cascade_allocate(master(), {1: 0, 2: 50_000}, CAPACITY, 1_024)
    assert shares == {1: 1_024, 2: 50_000}


def test_cascade_equal_demands_get_equal_shares():
    shares = cascade_allocate(master(), {1: 400_000, 2: 400_000}, CAPACITY, 1_024)
    assert shares[1] == shares[2]
    assert shares[1] + shares[2] <= CAPACITY


def test_cascade_single_olt_keeps_everything():
    assert cascade_allocate(OltRole(0, "master"), {0: 123}, CAPACITY, 1_024) \
        == {0: CAPACITY}


def test_cascade_rejects_non_master():
    with pytest.raises(InvariantViolation):
        cascade_allocate(OltRole(1, "slave"), {1: 0}, CAPACITY, 1_024)


@settings(max_examples=60, deadline=None)
@given(demands=st.lists(st.integers(min_value=0, max_value=300_000), min_size=2, max_size=5))
def test_cascade_shares_capped_and_floored(demands):
    table = {i: d for i, d in enumerate(demands)}
    shares = cascade_allocate(OltRole(0, "master"), table, CAPACITY, 512)
    assert sum(shares.values()) <= max(CAPACITY, 512 * len(table))
    assert all(s >= 512 for s in shares.values())
