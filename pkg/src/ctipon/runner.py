"""Run orchestration: builds a simulation out of a scenario, drives the event
loop, and reduces the results of single runs and load sweeps."""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

_MAP_SIG = struct.Struct("<qHIIBB")

from . import pon, ran, traffic
from .cti import BusConfig, CtiBus, translate_ul_grant
from .engine import Engine, EventKind, SimTime
from .metrics import FlowStats, MetricsLedger
from .scenario import Scenario

FH_ONU_ID = 1
FH_ALLOC_ID = 1
BG_FIRST_ONU_ID = 2

# Random substream ids; fixed so adding sources never reshuffles draws.
CTI_LOSS_STREAM = 1
BG_STREAM_BASE = 10

MODES = ("baseline", "cti")


def fronthaul_flow_id(ue_id: int) -> str:
    return f"fh-ue{ue_id}"


def background_flow_id(onu_id: int) -> str:
    return f"bg-onu{onu_id}"


def fronthaul_offered_bps(scenario: Scenario) -> Fraction:
    """PON-side bit rate the fronthaul stream offers (all UEs)."""
    per_slot = scenario.fronthaul_offered_bytes_per_slot()
    return Fraction(per_slot * 8 * 1_000_000_000, scenario.slot_ns)


@dataclass
class RunResult:
    run_id: str
    mode: str
    fraction: Fraction
    seed: int
    scenario: Scenario
    clock: SimTime
    events_processed: int
    event_digest: str
    bwmap_digest: str
    flows: list[FlowStats]
    summary_row: tuple
    cti_trace: list[tuple]
    offered_bytes: dict[str, int] = None
    packet_rows: Optional[list[tuple]] = None

    def flow(self, flow_id: str) -> FlowStats:
        for stats in self.flows:
            if stats.flow_id == flow_id:
                return stats
        raise KeyError(flow_id)

    def fronthaul_delivered_bytes(self) -> int:
        return sum(f.delivered_bytes for f in self.flows if f.flow_id.startswith("fh-"))


class _Simulation:
    def __init__(self, scenario: Scenario, mode: str, keep_packets: bool):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        sc = scenario
        self.sc = sc
        self.mode = mode
        self.params = pon.PonParams(
            line_rate_bps=sc.line_rate_bps,
            frame_ns=sc.frame_ns,
            capacity_bytes=sc.capacity_bytes,
            burst_overhead_bytes=sc.burst_overhead_bytes,
            guard_bytes=sc.guard_bytes,
            word_bytes=sc.word_bytes,
            poll_grant_bytes=sc.word_bytes,
            polling_period_frames=sc.polling_period_frames,
            downstream_prop_ns=sc.downstream_prop_ns,
            upstream_prop_ns=sc.upstream_prop_ns,
        )
        self.timing = self.params.timing()
        self.engine = Engine(seed=sc.seed, continuous_sources=True)
        self.ledger = MetricsLedger(sc.warmup_ns, sc.duration_ns, keep_packets)

        classes: dict[int, pon.PriorityClass] = {FH_ALLOC_ID: pon.PriorityClass.FRONTHAUL_USER}
        self.queues: dict[int, object] = {}
        self.fh_queue = pon.ScalarTcont(FH_ALLOC_ID, FH_ONU_ID, pon.PriorityClass.FRONTHAUL_USER,
                                        sc.fronthaul_buffer_bytes, self.ledger)
        self.queues[FH_ALLOC_ID] = self.fh_queue
        for ue in range(sc.ue_count):
            self.ledger.register_flow(fronthaul_flow_id(ue))

        per_source = (Fraction(sc.background_fraction) / sc.background_onus
                      if sc.background_onus else Fraction(0))
        for i in range(sc.background_onus):
            onu = BG_FIRST_ONU_ID + i
            alloc = BG_FIRST_ONU_ID + i
            classes[alloc] = pon.PriorityClass.BACKGROUND
            spec = traffic.SourceSpec(sc.background_kind, per_source, sc.packet_bytes,
                                      alloc, 0, None, stream_id=BG_STREAM_BASE + i)
            source = traffic.make_source(spec, sc.capacity_rate_bps, self.engine.rng)
            flow = background_flow_id(onu)
            self.ledger.register_flow(flow)
            self.queues[alloc] = pon.VectorTcont(alloc, onu, pon.PriorityClass.BACKGROUND,
                                                 sc.background_buffer_bytes, self.ledger,
                                                 flow, source, sc.packet_bytes)

        self.scheduler = pon.OltScheduler(self.params, classes)
        self.master = pon.OltRole(0, "master")
        self.slot_config = ran.SlotConfig(
            slot_duration_ns=sc.slot_ns,
            k2_slots=sc.k2_slots,
            ue_processing_ns=sc.ue_processing_ns,
            ru_processing_ns=sc.ru_processing_ns,
            fronthaul_overhead_factor=sc.fronthaul_overhead_factor,
            mtu_bytes=sc.mtu_bytes,
            max_tbs_bytes=sc.max_tbs_bytes,
            max_grants_per_slot=sc.max_grants_per_slot,
        )
        self.mac = ran.MacScheduler(self.slot_config)
        self.ru_map = {ue: FH_ALLOC_ID for ue in range(sc.ue_count)}
        self.bus: Optional[CtiBus] = None
        if mode == "cti":
            self.bus = CtiBus(BusConfig(sc.bus_latency_ns, sc.loss_probability),
                              self.engine.rng.stream(CTI_LOSS_STREAM))
        self._forecast_leads = (sc.bus_latency_ns
                                < sc.k2_slots * sc.slot_ns + sc.ue_processing_ns + sc.ru_processing_ns)
        self._grant_delay_ns = (sc.k2_slots * sc.slot_ns
                                + sc.ue_processing_ns + sc.ru_processing_ns)
        self.bwmap_hash = hashlib.blake2b(digest_size=16)

        eng = self.engine
        eng.on(EventKind.BWMAP_BROADCAST, self._on_bwmap)
        eng.on(EventKind.BURST_START, self._on_burst_start)
        eng.on(EventKind.BURST_END, self._on_burst_end)
        eng.on(EventKind.DBRU_REPORT, self._on_dbru)
        eng.on(EventKind.SLOT_TICK, self._on_slot)
        eng.on(EventKind.UE_TX_READY, self._on_ue_tx)
        eng.on(EventKind.CTI_DELIVERY, self._on_cti_delivery)
        # Frame k's map is committed one frame ahead, at (k-1)*F.
        eng.schedule_at(0, EventKind.BWMAP_BROADCAST, 1)
        eng.schedule_at(0, EventKind.SLOT_TICK, 0)

    # -- handlers ---------------------------------------------------------

    def _on_bwmap(self, now: SimTime, frame_index: int) -> None:
        sc = self.sc
        scheduler = self.scheduler
        demand = sum(scheduler.net_demand(a) for a in scheduler.registered)
        shares = pon.cascade_allocate(self.master, {self.master.olt_id: demand},
                                      sc.capacity_bytes, sc.cascade_min_share_bytes,
                                      sc.word_bytes)
        budget = shares[self.master.olt_id]
        if self.mode == "cti":
            bwmap = scheduler.build_cooperative(frame_index, budget, now)
        else:
            bwmap = scheduler.build_baseline(frame_index, budget, now)
        update = self.bwmap_hash.update
        pack = _MAP_SIG.pack
        for e in bwmap.entries:
            update(pack(frame_index, e.alloc_id, e.start_offset_bytes, e.grant_bytes,
                        e.request_dbru, e.purpose))
        frame_start = frame_index * sc.frame_ns
        schedule = self.engine.schedule_at
        time_of = self.timing.time_of_bytes
        for entry in bwmap.entries:
            schedule(frame_start + time_of(entry.start_offset_bytes),
                     EventKind.BURST_START, (entry, frame_start, frame_index))
        schedule(now + sc.frame_ns, EventKind.BWMAP_BROADCAST, frame_index + 1)

    def _on_burst_start(self, now: SimTime, payload) -> None:
        entry, frame_start, frame_index = payload
        queue = self.queues.get(entry.alloc_id)
        if queue is None:
            self.ledger.wasted_grant_bytes += entry.grant_bytes
            return
        _, sent, burst = pon.execute_entry(entry, queue, frame_start, self.timing,
                                           self.sc.upstream_prop_ns)
        if entry.purpose is not pon.GrantPurpose.POLL:
            self.ledger.wasted_grant_bytes += entry.grant_bytes - sent
        if burst is not None:
            for flow, nbytes in burst.flow_bytes().items():
                self.ledger.note_inflight(flow, nbytes)
            self.engine.schedule_at(burst.last_delivery(), EventKind.BURST_END, burst)
        if entry.request_dbru:
            deliver_at = (frame_start
                          + self.timing.time_of_bytes(entry.start_offset_bytes + entry.grant_bytes)
                          + self.sc.upstream_prop_ns)
            report = pon.generate_dbru(queue, deliver_at, frame_index)
            self.engine.schedule_at(deliver_at, EventKind.DBRU_REPORT, report)

    def _on_burst_end(self, now: SimTime, burst) -> None:
        self.ledger.commit_burst(burst)

    def _on_dbru(self, now: SimTime, report) -> None:
        self.scheduler.accept_report(report)

    def _on_slot(self, now: SimTime, slot: int) -> None:
        sc = self.sc
        demands = [ran.UeDemand(ue, sc.max_tbs_bytes) for ue in range(sc.ue_count)]
        for grant in self.mac.schedule(slot, demands, now):
            arrival, sizes = ran.ue_transmit(grant, self.slot_config)
            self.engine.schedule_at(arrival, EventKind.UE_TX_READY, (grant, sizes, arrival))
            if self.bus is not None:
                msg = translate_ul_grant(grant, self.ru_map, self.slot_config, now)
                if msg is None:
                    self.ledger.mapping_misses += 1
                else:
                    deliver_at = self.bus.publish(msg)
                    if deliver_at is not None:
                        self.engine.schedule_at(deliver_at, EventKind.CTI_DELIVERY, msg)
        self.engine.schedule_at(now + sc.slot_ns, EventKind.SLOT_TICK, slot + 1)

    def _on_ue_tx(self, now: SimTime, payload) -> None:
        grant, sizes, arrival = payload
        expected = grant.issued_at + self._grant_delay_ns
        if now != expected or arrival != expected:
            raise pon.InvariantViolation("fronthaul arrival deviates from the closed form")
        flow = fronthaul_flow_id(grant.ue_id)
        push = self.fh_queue.push
        issued = grant.issued_at
        for size in sizes:
            push(pon.Packet(size, issued, now, flow))

    def _on_cti_delivery(self, now: SimTime, msg) -> None:
        if self._forecast_leads and now >= msg.expected_arrival:
            raise pon.InvariantViolation("forecast delivered after its announced arrival")
        fc = pon.PendingForecast(msg.alloc_id, msg.expected_arrival, msg.expected_bytes,
                                 msg.published_at, msg.expected_arrival // self.sc.frame_ns)
        self.scheduler.accept_forecast(fc)

    # -- reduction ----------------------------------------------------------

    def finish(self, run_id: str, fraction: Fraction, report) -> RunResult:
        sc = self.sc
        resident: dict[str, int] = {}
        for queue in self.queues.values():
            queue.advance(sc.duration_ns)
        for pkt in self.fh_queue.fifo[self.fh_queue._head:]:
            resident[pkt.flow_id] = resident.get(pkt.flow_id, 0) + pkt.size_bytes
        for queue in self.queues.values():
            if isinstance(queue, pon.VectorTcont):
                resident[queue.flow_id] = resident.get(queue.flow_id, 0) + queue.occupancy_bytes
        ledger = self.ledger
        ledger.forecast_deferrals = self.scheduler.forecast_deferrals
        ledger.stale_forecasts = self.scheduler.stale_forecasts
        ledger.check_conservation(resident)
        flows = ledger.finalize()
        frac_str = traffic.format_fraction(fraction)
        summary = (run_id, self.mode, frac_str, sc.seed, sc.capacity_bytes,
                   ledger.wasted_grant_bytes, ledger.forecast_deferrals,
                   ledger.stale_forecasts, ledger.mapping_misses)
        return RunResult(
            run_id=run_id,
            mode=self.mode,
            fraction=fraction,
            seed=sc.seed,
            scenario=sc,
            clock=report.clock,
            events_processed=report.events_processed,
            event_digest=report.event_digest,
            bwmap_digest=self.bwmap_hash.hexdigest(),
            flows=flows,
            summary_row=summary,
            cti_trace=list(self.bus.trace) if self.bus is not None else [],
            offered_bytes={flow: acc.offered_bytes for flow, acc in ledger.flows.items()},
            packet_rows=list(ledger.packet_rows(run_id)) if ledger.keep_packets else None,
        )


def run_single(scenario: Scenario, mode: str, run_id: Optional[str] = None,
               keep_packets: bool = False) -> RunResult:
    fraction = scenario.background_fraction
    if run_id is None:
        run_id = f"{mode}-bg{traffic.format_fraction(fraction)}"
    sim = _Simulation(scenario, mode, keep_packets)
    report = sim.engine.run_until(scenario.duration_ns)
    report.metrics = sim.ledger
    return sim.finish(run_id, fraction, report)


def _run_spec(args) -> RunResult:
    spec, keep_packets = args
    return run_single(spec.scenario, spec.mode, spec.run_id, keep_packets)


def run_sweep(base_scenario: Scenario, fractions=None, modes=MODES, jobs: int = 1,
              keep_packets: bool = False) -> list[RunResult]:
    """Execute the load sweep; runs are independent, so jobs > 1 fans them out
    over worker processes. Result order is (fraction, mode), deterministic."""
    sweep = traffic.SweepSpec(tuple(fractions) if fractions is not None
                              else base_scenario.sweep_fractions)
    specs = traffic.build_sweep(base_scenario, sweep, modes)
    work = [(spec, keep_packets) for spec in specs]
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(specs))) as pool:
            return list(pool.map(_run_spec, work))
    return [_run_spec(item) for item in work]
