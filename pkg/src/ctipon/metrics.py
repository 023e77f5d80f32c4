"""Per-packet and per-flow outcome accounting.

The ledger ingests delivery bursts (scalar lists or numpy arrays), keeps
byte-conservation counters per flow, and reduces to deterministic FlowStats
at the end of a run. Percentiles are nearest-rank; statistics exclude the
configured warm-up window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .engine import SimTime
from .pon import InvariantViolation, PendingBurst

PACKETS_HEADER = ("run_id", "flow_id", "size_bytes", "created_ns", "enqueued_ns",
                  "first_grant_ns", "delivered_ns", "dropped")
FLOWS_HEADER = ("run_id", "mode", "sweep_fraction", "flow_id", "delivered_bytes",
                "dropped_bytes", "throughput_bps", "lat_mean_ns", "lat_p50_ns",
                "lat_p95_ns", "lat_p99_ns", "dbru_opp_mean_ns", "dbru_opp_p50_ns")
SUMMARY_HEADER = ("run_id", "mode", "sweep_fraction", "seed", "capacity_bytes_per_frame",
                  "wasted_grant_bytes", "forecast_deferrals", "stale_forecasts",
                  "mapping_misses")


@dataclass(slots=True)
class PacketRecord:
    flow_id: str
    size_bytes: int
    created_at: SimTime
    enqueued_at_onu: SimTime
    first_grant_at: Optional[SimTime]
    delivered_at_olt: Optional[SimTime]
    dropped: bool = False


def dbru_opportunity_time(rec: PacketRecord) -> SimTime:
    """Interval a delivered packet waited in its TCONT before its serving
    grant began; undefined for dropped packets."""
    if rec.dropped:
        raise ValueError("opportunity time is undefined for dropped packets")
    return rec.first_grant_at - rec.enqueued_at_onu


def nearest_rank(sorted_values: np.ndarray, percentile: int) -> int:
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    rank = -(-percentile * n // 100)  # ceil(p*n/100)
    if rank < 1:
        rank = 1
    return int(sorted_values[rank - 1])


@dataclass
class FlowStats:
    flow_id: str
    delivered_bytes: int
    dropped_bytes: int
    throughput_bps: int
    lat_mean_ns: Optional[int]
    lat_p50_ns: Optional[int]
    lat_p95_ns: Optional[int]
    lat_p99_ns: Optional[int]
    dbru_opp_mean_ns: Optional[int]
    dbru_opp_p50_ns: Optional[int]

    def row(self, run_id: str, mode: str, sweep_fraction: str) -> tuple:
        blank = lambda v: "" if v is None else v
        return (run_id, mode, sweep_fraction, self.flow_id, self.delivered_bytes,
                self.dropped_bytes, self.throughput_bps, blank(self.lat_mean_ns),
                blank(self.lat_p50_ns), blank(self.lat_p95_ns), blank(self.lat_p99_ns),
                blank(self.dbru_opp_mean_ns), blank(self.dbru_opp_p50_ns))


class _FlowAcc:
    __slots__ = ("offered_bytes", "delivered_bytes_total", "delivered_bytes_window",
                 "dropped_bytes", "inflight_bytes", "lat_chunks", "dbru_chunks",
                 "packet_chunks")

    def __init__(self):
        self.offered_bytes = 0
        self.delivered_bytes_total = 0
        self.delivered_bytes_window = 0
        self.dropped_bytes = 0
        self.inflight_bytes = 0
        self.lat_chunks: list[np.ndarray] = []
        self.dbru_chunks: list[np.ndarray] = []
        self.packet_chunks: list[tuple] = []


class MetricsLedger:
    """Owned by a single run; all reductions are pure functions of its
    contents, so identical runs produce identical statistics bytes."""

    def __init__(self, warmup_ns: SimTime, horizon_ns: SimTime, keep_packets: bool = False):
        self.warmup_ns = warmup_ns
        self.horizon_ns = horizon_ns
        self.keep_packets = keep_packets
        self.flows: dict[str, _FlowAcc] = {}
        self.wasted_grant_bytes = 0
        self.forecast_deferrals = 0
        self.stale_forecasts = 0
        self.mapping_misses = 0

    def register_flow(self, flow_id: str) -> None:
        if flow_id not in self.flows:
            self.flows[flow_id] = _FlowAcc()

    def _acc(self, flow_id: str) -> _FlowAcc:
        acc = self.flows.get(flow_id)
        if acc is None:
            acc = self.flows[flow_id] = _FlowAcc()
        return acc

    # -- ingest ----------------------------------------------------------

    def record_offered(self, flow_id: str, nbytes: int) -> None:
        self._acc(flow_id).offered_bytes += nbytes

    def record_drop(self, flow_id: str, nbytes: int, npackets: int,
                    created: SimTime, enqueued: SimTime) -> None:
        acc = self._acc(flow_id)
        acc.dropped_bytes += nbytes
        if self.keep_packets:
            acc.packet_chunks.append(([nbytes // max(npackets, 1)] * npackets,
                                      [created] * npackets, [enqueued] * npackets,
                                      None, None, True))

    def record_drop_bulk(self, flow_id: str, packet_size: int, times: np.ndarray) -> None:
        acc = self._acc(flow_id)
        acc.dropped_bytes += packet_size * len(times)
        if self.keep_packets:
            acc.packet_chunks.append(([packet_size] * len(times), times, times,
                                      None, None, True))

    def note_inflight(self, flow_id: str, nbytes: int) -> None:
        self._acc(flow_id).inflight_bytes += nbytes

    def commit_burst(self, burst: PendingBurst) -> None:
        if burst.flow_id is not None:
            self._ingest(burst.flow_id, burst.size_const, burst.sizes, burst.created,
                         burst.enqueued, burst.first_grant, burst.delivered)
            return
        flows = burst.flows
        if len(set(flows)) == 1:
            self._ingest(flows[0], burst.size_const, burst.sizes, burst.created,
                         burst.enqueued, burst.first_grant, burst.delivered)
            return
        groups: dict[str, list[int]] = {}
        for i, flow in enumerate(flows):
            groups.setdefault(flow, []).append(i)
        for flow, idx in groups.items():
            pick = lambda seq: [seq[i] for i in idx]
            self._ingest(flow, burst.size_const,
                         None if burst.sizes is None else pick(burst.sizes),
                         pick(burst.created), pick(burst.enqueued),
                         pick(burst.first_grant), pick(burst.delivered))

    def _ingest(self, flow_id, size_const, raw_sizes, raw_created, raw_enqueued,
                raw_first_grant, raw_delivered) -> None:
        acc = self._acc(flow_id)
        if size_const is not None:
            sizes = None
            n = len(raw_enqueued)
            total = size_const * n
        else:
            sizes = np.asarray(raw_sizes, dtype=np.int64)
            total = int(sizes.sum())
            n = len(sizes)
        created = np.asarray(raw_created, dtype=np.int64)
        enqueued = np.asarray(raw_enqueued, dtype=np.int64)
        first_grant = np.asarray(raw_first_grant, dtype=np.int64)
        delivered = np.asarray(raw_delivered, dtype=np.int64)
        # Timestamp monotonicity per packet. Within one burst enqueue and
        # grant times are each nondecreasing and every enqueue precedes the
        # burst start, so the endpoint test covers the elementwise one; the
        # full scan runs only to pinpoint a failure.
        suspicious = (int(enqueued[-1]) > int(first_grant[0])
                      or int(first_grant[-1]) > int(delivered[-1]))
        if not suspicious and raw_created is not raw_enqueued:
            suspicious = bool(np.any(created > enqueued))
        if suspicious and (np.any(created > enqueued) or np.any(enqueued > first_grant)
                           or np.any(first_grant > delivered)):
            raise InvariantViolation(f"non-monotonic packet timestamps in flow {flow_id}")
        acc.inflight_bytes -= total
        acc.delivered_bytes_total += total
        warm = self.warmup_ns
        if enqueued[0] >= warm:  # bursts are FIFO: all packets past warm-up
            acc.lat_chunks.append(delivered - enqueued)
            acc.dbru_chunks.append(first_grant - enqueued)
            if int(delivered[0]) > warm:  # deliveries are ordered too
                acc.delivered_bytes_window += total
            elif size_const is not None:
                acc.delivered_bytes_window += int(np.count_nonzero(delivered > warm)) * size_const
            else:
                acc.delivered_bytes_window += int(sizes[delivered > warm].sum())
        else:
            mask = enqueued >= warm
            acc.lat_chunks.append((delivered - enqueued)[mask])
            acc.dbru_chunks.append((first_grant - enqueued)[mask])
            dmask = delivered > warm
            if size_const is not None:
                acc.delivered_bytes_window += int(np.count_nonzero(dmask)) * size_const
            else:
                acc.delivered_bytes_window += int(sizes[dmask].sum())
        if self.keep_packets:
            size_col = [size_const] * n if sizes is None else raw_sizes
            acc.packet_chunks.append((size_col, created, enqueued, first_grant,
                                      delivered, False))

    # -- reduce ------------------------------------------------------------

    def check_conservation(self, resident_bytes: dict[str, int]) -> None:
        """Offered bytes must equal delivered + dropped + resident-at-horizon
        (queued plus in flight) for every flow."""
        for flow_id, acc in self.flows.items():
            resident = resident_bytes.get(flow_id, 0) + acc.inflight_bytes
            balance = acc.delivered_bytes_total + acc.dropped_bytes + resident
            if balance != acc.offered_bytes:
                raise InvariantViolation(
                    f"flow {flow_id}: offered {acc.offered_bytes} != delivered "
                    f"{acc.delivered_bytes_total} + dropped {acc.dropped_bytes} "
                    f"+ resident {resident}")

    def finalize(self) -> list[FlowStats]:
        window_ns = self.horizon_ns - self.warmup_ns
        out = []
        for flow_id in sorted(self.flows):
            acc = self.flows[flow_id]
            lat = np.sort(np.concatenate(acc.lat_chunks)) if acc.lat_chunks else np.empty(0, np.int64)
            dbru = np.sort(np.concatenate(acc.dbru_chunks)) if acc.dbru_chunks else np.empty(0, np.int64)
            if len(lat):
                stats = dict(
                    lat_mean_ns=int(lat.sum()) // len(lat),
                    lat_p50_ns=nearest_rank(lat, 50),
                    lat_p95_ns=nearest_rank(lat, 95),
                    lat_p99_ns=nearest_rank(lat, 99),
                    dbru_opp_mean_ns=int(dbru.sum()) // len(dbru),
                    dbru_opp_p50_ns=nearest_rank(dbru, 50),
                )
            else:
                stats = dict(lat_mean_ns=None, lat_p50_ns=None, lat_p95_ns=None,
                             lat_p99_ns=None, dbru_opp_mean_ns=None, dbru_opp_p50_ns=None)
            out.append(FlowStats(
                flow_id=flow_id,
                delivered_bytes=acc.delivered_bytes_window,
                dropped_bytes=acc.dropped_bytes,
                throughput_bps=acc.delivered_bytes_window * 8 * 1_000_000_000 // window_ns,
                **stats,
            ))
        return out

    def packet_rows(self, run_id: str) -> Iterable[tuple]:
        for flow_id in sorted(self.flows):
            for sizes, created, enqueued, first_grant, delivered, dropped in \
                    self.flows[flow_id].packet_chunks:
                n = len(sizes)
                for i in range(n):
                    if dropped:
                        yield (run_id, flow_id, sizes[i], int(created[i]),
                               int(enqueued[i]), "", "", 1)
                    else:
                        yield (run_id, flow_id, sizes[i], int(created[i]),
                               int(enqueued[i]), int(first_grant[i]),
                               int(delivered[i]), 0)


def write_csv(path, header: tuple, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
