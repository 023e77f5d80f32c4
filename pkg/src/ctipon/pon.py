"""PON upstream model: ONU transmission-container (TCONT) queues, DBRu status
reports, OLT bandwidth-map construction under the status-reporting and the
grant-forecast (cooperative) policies, and the master/slave capacity cascade.

Frame pipeline
--------------
The map for upstream frame k is built and broadcast one frame ahead, at
(k-1)*F.  Frame k's bursts transmit in [k*F, (k+1)*F); a DBRu report rides at
the end of its burst and reaches the OLT one upstream propagation delay after
the burst payload ends.  A report is usable by any map built after it arrives,
so the shortest status-report service loop is: enqueue -> report in the
current frame's burst -> granted by the map built at the next frame boundary
-> transmitted one frame later (about two frame durations end to end).

Grant accounting: reports carry the queue occupancy sampled after the
reporting burst's own drain, and the OLT nets out bytes it has already granted
in later maps, so in-flight grants are never issued twice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np

from .engine import SimTime


class InvariantViolation(Exception):
    """A structural model invariant failed; indicates a simulator bug."""


class PriorityClass(IntEnum):
    CONTROL = 0
    FRONTHAUL_USER = 1
    BACKGROUND = 2


class GrantPurpose(IntEnum):
    DATA = 0
    POLL = 1
    FORECAST = 2


class GrantEntry(NamedTuple):
    alloc_id: int
    start_offset_bytes: int
    grant_bytes: int
    request_dbru: bool
    purpose: GrantPurpose = GrantPurpose.DATA


@dataclass(slots=True)
class BwMap:
    frame_index: int
    entries: tuple[GrantEntry, ...]
    broadcast_at: SimTime

    def signature(self) -> tuple:
        """Canonical value for byte-identity comparisons across runs."""
        return (
            self.frame_index,
            tuple(
                (e.alloc_id, e.start_offset_bytes, e.grant_bytes, e.request_dbru, int(e.purpose))
                for e in self.entries
            ),
        )


@dataclass(frozen=True, slots=True)
class DbruReport:
    alloc_id: int
    occupancy_bytes: int
    reported_at: SimTime
    sampled_frame: int


@dataclass(slots=True)
class OltRole:
    olt_id: int
    role: str  # "master" | "slave"
    cascade_peers: list[int] = field(default_factory=list)
    capacity_share_bytes: int = 0


class LineTiming:
    """Integer byte<->time conversions at the upstream line rate."""

    __slots__ = ("rate_bps",)

    def __init__(self, rate_bps: int):
        self.rate_bps = rate_bps

    def time_of_bytes(self, nbytes: int) -> SimTime:
        return (nbytes * 8_000_000_000) // self.rate_bps

    def vec_time_of_bytes(self, nbytes: np.ndarray) -> np.ndarray:
        return (nbytes * 8_000_000_000) // self.rate_bps

    def bytes_at_or_after(self, dt_ns: SimTime) -> int:
        """Smallest byte offset whose transmit time is >= dt_ns."""
        if dt_ns <= 0:
            return 0
        b = (dt_ns * self.rate_bps + 7_999_999_999) // 8_000_000_000
        while self.time_of_bytes(b) < dt_ns:
            b += 1
        return b


@dataclass(frozen=True)
class PonParams:
    line_rate_bps: int
    frame_ns: int
    capacity_bytes: int
    burst_overhead_bytes: int
    guard_bytes: int
    word_bytes: int
    poll_grant_bytes: int
    polling_period_frames: int
    downstream_prop_ns: int
    upstream_prop_ns: int

    def timing(self) -> LineTiming:
        return LineTiming(self.line_rate_bps)

    def ceil_word(self, n: int) -> int:
        w = self.word_bytes
        return ((n + w - 1) // w) * w

    def floor_word(self, n: int) -> int:
        return (n // self.word_bytes) * self.word_bytes


def derive_capacity(line_rate_bps: int, frame_ns: int, overhead_fraction) -> int:
    """Usable upstream payload bytes per frame after the fixed overhead cut."""
    raw_bits = line_rate_bps * frame_ns  # bit-nanoseconds
    usable = int(raw_bits * (1 - overhead_fraction)) // 8_000_000_000
    return usable


# ---------------------------------------------------------------------------
# TCONT queues


@dataclass(slots=True)
class Packet:
    size_bytes: int
    created_at: SimTime
    enqueued_at: SimTime
    flow_id: str


class PendingBurst:
    """Drained packets awaiting OLT-side arrival; committed at burst end so a
    run cut at the horizon leaves them accounted as in flight."""

    __slots__ = ("flow_id", "flows", "size_const", "sizes", "created", "enqueued",
                 "first_grant", "delivered")

    def __init__(self, flow_id, size_const, sizes, created, enqueued, first_grant,
                 delivered, flows=None):
        self.flow_id = flow_id          # uniform flow, or None with per-packet flows
        self.flows = flows
        self.size_const = size_const    # uniform packet size, or None with sizes list
        self.sizes = sizes
        self.created = created
        self.enqueued = enqueued
        self.first_grant = first_grant
        self.delivered = delivered

    def total_bytes(self) -> int:
        if self.size_const is not None:
            return self.size_const * len(self.enqueued)
        return int(sum(self.sizes))

    def flow_bytes(self) -> dict[str, int]:
        if self.flow_id is not None:
            return {self.flow_id: self.total_bytes()}
        out: dict[str, int] = {}
        for flow, size in zip(self.flows, self.sizes):
            out[flow] = out.get(flow, 0) + size
        return out

    def last_delivery(self) -> SimTime:
        return int(self.delivered[-1])


class ScalarTcont:
    """FIFO upstream buffer with exact per-packet bookkeeping.

    Packets are appended eagerly (fronthaul batches) or materialized from an
    attached arrival source on demand; occupancy only grows between grants, so
    lazy materialization is byte-exact with per-packet event semantics.
    """

    def __init__(self, alloc_id: int, onu_id: int, priority_class: PriorityClass,
                 limit_bytes: int, ledger, flow_id: Optional[str] = None,
                 source=None, packet_bytes: int = 0):
        self.alloc_id = alloc_id
        self.onu_id = onu_id
        self.priority_class = priority_class
        self.limit_bytes = limit_bytes
        self.ledger = ledger
        self.flow_id = flow_id
        self.source = source
        self.packet_bytes = packet_bytes
        self.fifo: list[Packet] = []
        self._head = 0
        self.occupancy_bytes = 0

    def __len__(self):
        return len(self.fifo) - self._head

    def push(self, packet: Packet) -> bool:
        self.ledger.record_offered(packet.flow_id, packet.size_bytes)
        if self.occupancy_bytes + packet.size_bytes > self.limit_bytes:
            self.ledger.record_drop(packet.flow_id, packet.size_bytes, 1,
                                    packet.created_at, packet.enqueued_at)
            return False
        self.fifo.append(packet)
        self.occupancy_bytes += packet.size_bytes
        return True

    def advance(self, now: SimTime) -> None:
        if self.source is None:
            return
        for t in self.source.take_until(now):
            self.push(Packet(self.packet_bytes, t, t, self.flow_id))

    def drain(self, grant_bytes: int, payload_start: SimTime, start_offset_bytes: int,
              timing: LineTiming, upstream_prop_ns: int) -> tuple[int, Optional[PendingBurst]]:
        fifo = self.fifo
        head = self._head
        remaining = grant_bytes
        sizes: list[int] = []
        flows: list[str] = []
        created: list[int] = []
        enqueued: list[int] = []
        first_grant: list[int] = []
        delivered: list[int] = []
        sent = 0
        offset = start_offset_bytes
        frame_base = payload_start - timing.time_of_bytes(start_offset_bytes)
        while head < len(fifo):
            pkt = fifo[head]
            if pkt.size_bytes > remaining:
                break  # packets are never fragmented across grants
            head += 1
            remaining -= pkt.size_bytes
            sent += pkt.size_bytes
            tx_at = frame_base + timing.time_of_bytes(offset)
            offset += pkt.size_bytes
            done_at = frame_base + timing.time_of_bytes(offset) + upstream_prop_ns
            sizes.append(pkt.size_bytes)
            flows.append(pkt.flow_id)
            created.append(pkt.created_at)
            enqueued.append(pkt.enqueued_at)
            first_grant.append(tx_at)
            delivered.append(done_at)
        self._head = head
        if head > 4096 and head * 2 > len(fifo):
            del fifo[:head]
            self._head = 0
        self.occupancy_bytes -= sent
        if not sizes:
            return 0, None
        return sent, PendingBurst(None, None, sizes, created, enqueued, first_grant,
                                  delivered, flows=flows)


class VectorTcont:
    """Constant-packet-size queue backed by an arrival source, drained with
    bulk integer math. Behaviour is identical to ScalarTcont for the same
    arrival stream; it exists so multi-gigabit background flows stay cheap."""

    def __init__(self, alloc_id: int, onu_id: int, priority_class: PriorityClass,
                 limit_bytes: int, ledger, flow_id: str, source, packet_bytes: int):
        self.alloc_id = alloc_id
        self.onu_id = onu_id
        self.priority_class = priority_class
        self.limit_bytes = limit_bytes
        self.ledger = ledger
        self.flow_id = flow_id
        self.source = source
        self.packet_bytes = packet_bytes
        self.chunks: list[np.ndarray] = []  # accepted arrival timestamps, FIFO order
        self._head = 0  # consumed prefix of chunks[0]
        self.count = 0

    @property
    def occupancy_bytes(self) -> int:
        return self.count * self.packet_bytes

    def __len__(self):
        return self.count

    def advance(self, now: SimTime) -> None:
        times = self.source.take_until(now)
        n = len(times)
        if n == 0:
            return
        size = self.packet_bytes
        self.ledger.record_offered(self.flow_id, n * size)
        free = (self.limit_bytes - self.occupancy_bytes) // size
        keep = n if n <= free else free
        if keep > 0:
            self.chunks.append(times[:keep])
            self.count += keep
        if keep < n:
            dropped = times[keep:]
            self.ledger.record_drop_bulk(self.flow_id, size, dropped)

    def drain(self, grant_bytes: int, payload_start: SimTime, start_offset_bytes: int,
              timing: LineTiming, upstream_prop_ns: int) -> tuple[int, Optional[PendingBurst]]:
        size = self.packet_bytes
        n = grant_bytes // size
        if n > self.count:
            n = self.count
        if n == 0:
            return 0, None
        taken: list[np.ndarray] = []
        need = n
        while need:
            chunk = self.chunks[0]
            avail = len(chunk) - self._head
            if avail <= need:
                taken.append(chunk[self._head:])
                self.chunks.pop(0)
                self._head = 0
                need -= avail
            else:
                taken.append(chunk[self._head:self._head + need])
                self._head += need
                need = 0
        self.count -= n
        enqueued = taken[0] if len(taken) == 1 else np.concatenate(taken)
        frame_base = payload_start - timing.time_of_bytes(start_offset_bytes)
        edges = start_offset_bytes + size * np.arange(n + 1, dtype=np.int64)
        times = frame_base + timing.vec_time_of_bytes(edges)
        first_grant = times[:-1]
        delivered = times[1:] + upstream_prop_ns
        burst = PendingBurst(self.flow_id, size, None, enqueued, enqueued, first_grant, delivered)
        return n * size, burst


# ---------------------------------------------------------------------------
# Operations on queues (module-level verbs mirroring the model surface)


def enqueue_upstream(tcont, packet: Packet, now: SimTime) -> bool:
    """Append a packet to a TCONT buffer, stamping its enqueue time (the start
    of its grant-wait clock). Returns False when the buffer limit drops it."""
    if packet.size_bytes <= 0:
        raise InvariantViolation("packet size must be positive")
    packet.enqueued_at = now
    return tcont.push(packet)


def generate_dbru(tcont, now: SimTime, sampled_frame: int) -> DbruReport:
    """Status report carrying the queue occupancy as seen at burst time."""
    return DbruReport(tcont.alloc_id, tcont.occupancy_bytes, now, sampled_frame)


# ---------------------------------------------------------------------------
# OLT DBA scheduler


@dataclass(slots=True)
class PendingForecast:
    alloc_id: int
    expected_arrival: SimTime
    expected_bytes: int
    published_at: SimTime
    arrival_frame: int


class FreeSpace:
    """Sorted free physical intervals of one upstream frame. A placed entry
    consumes overhead + payload + guard."""

    def __init__(self, capacity: int, overhead: int, guard: int):
        self.intervals: list[list[int]] = [[0, capacity]]
        self.oh = overhead
        self.guard = guard

    def place_at_or_after(self, req_payload_start: int, payload_len: int) -> Optional[int]:
        cost_tail = payload_len + self.guard
        for i, (lo, hi) in enumerate(self.intervals):
            p = lo + self.oh
            if p < req_payload_start:
                p = req_payload_start
            if p + cost_tail <= hi:
                self._carve(i, p - self.oh, p + cost_tail)
                return p
        return None

    def fill(self, budget: int, word: int, min_start: int = 0) -> tuple[list[tuple[int, int]], int]:
        """First-fit chunks of up to `budget` payload bytes; each chunk pays
        its own overhead+guard. Returns (chunks, unplaced_budget)."""
        chunks: list[tuple[int, int]] = []
        i = 0
        while budget >= word and i < len(self.intervals):
            lo, hi = self.intervals[i]
            p = max(lo + self.oh, min_start)
            usable = hi - p - self.guard
            if usable < word:
                i += 1
                continue
            take = min(budget, (usable // word) * word)
            self._carve(i, p - self.oh, p + take + self.guard)
            chunks.append((p, take))
            budget -= take
            # _carve may split the interval; the scan resumes at this index
        return chunks, budget

    def free_bytes(self) -> int:
        return sum(hi - lo for lo, hi in self.intervals)

    def _carve(self, index: int, lo: int, hi: int) -> None:
        ilo, ihi = self.intervals[index]
        frags = []
        if lo > ilo:
            frags.append([ilo, lo])
        if hi < ihi:
            frags.append([hi, ihi])
        self.intervals[index:index + 1] = frags


def _rotate(items: list[int], k: int) -> list[int]:
    if not items:
        return items
    k %= len(items)
    return items[k:] + items[:k]


class OltScheduler:
    """Per-OLT DBA state: latest reports, outstanding grants, forecast queue,
    and the two map builders."""

    def __init__(self, params: PonParams, priority_classes: dict[int, PriorityClass]):
        self.params = params
        self.classes = dict(priority_classes)
        self.registered = list(priority_classes.keys())
        self.reports: dict[int, DbruReport] = {}
        self.outstanding: dict[int, list[tuple[int, int]]] = {a: [] for a in self.registered}
        self.last_entry_frame: dict[int, int] = {}
        self.pending_forecasts: list[PendingForecast] = []
        self.last_built_frame = 0
        self.forecast_deferrals = 0
        self.stale_forecasts = 0

    # -- state updates --------------------------------------------------

    def accept_report(self, report: DbruReport) -> None:
        if report.alloc_id not in self.classes:
            return
        prev = self.reports.get(report.alloc_id)
        if prev is None or report.sampled_frame >= prev.sampled_frame:
            self.reports[report.alloc_id] = report
        granted = self.outstanding[report.alloc_id]
        if granted:
            self.outstanding[report.alloc_id] = [g for g in granted if g[0] > report.sampled_frame]

    def accept_forecast(self, fc: PendingForecast) -> bool:
        """Queue a grant forecast; returns False (stale) when the map covering
        its expected arrival has already been committed."""
        if fc.arrival_frame <= self.last_built_frame:
            self.stale_forecasts += 1
            return False
        self.pending_forecasts.append(fc)
        return True

    def net_demand(self, alloc_id: int) -> int:
        rep = self.reports.get(alloc_id)
        if rep is None:
            return 0
        out = sum(g[1] for g in self.outstanding[alloc_id])
        net = rep.occupancy_bytes - out
        return net if net > 0 else 0

    # -- map builders ----------------------------------------------------

    def build_baseline(self, frame_index: int, capacity_bytes: int, broadcast_at: SimTime) -> BwMap:
        return self._build(frame_index, capacity_bytes, broadcast_at, forecasts=())

    def build_cooperative(self, frame_index: int, capacity_bytes: int, broadcast_at: SimTime) -> BwMap:
        due = [fc for fc in self.pending_forecasts if fc.arrival_frame <= frame_index]
        if due:
            self.pending_forecasts = [fc for fc in self.pending_forecasts
                                      if fc.arrival_frame > frame_index]
            due.sort(key=lambda fc: fc.published_at)  # oldest first under pressure
        return self._build(frame_index, capacity_bytes, broadcast_at, forecasts=due)

    def _build(self, frame_index: int, capacity_bytes: int, broadcast_at: SimTime,
               forecasts) -> BwMap:
        p = self.params
        timing = p.timing()
        free = FreeSpace(capacity_bytes, p.burst_overhead_bytes, p.guard_bytes)
        placed: list[tuple[int, int, int, GrantPurpose]] = []  # (alloc, start, size, purpose)
        forecast_bytes: dict[int, int] = {}

        frame_start = frame_index * p.frame_ns
        for fc in forecasts:
            size = p.ceil_word(fc.expected_bytes)
            if fc.arrival_frame == frame_index:
                req = timing.bytes_at_or_after(fc.expected_arrival - frame_start)
            else:
                req = 0  # rolled over from an earlier, full frame
            pos = free.place_at_or_after(req, size)
            if pos is None:
                self.forecast_deferrals += 1
                fc.arrival_frame = frame_index + 1
                self.pending_forecasts.append(fc)
                continue
            placed.append((fc.alloc_id, pos, size, GrantPurpose.FORECAST))
            forecast_bytes[fc.alloc_id] = forecast_bytes.get(fc.alloc_id, 0) + size

        # Demand accounting net of in-flight grants and of forecasts placed above.
        nets: dict[int, int] = {}
        for alloc in self.registered:
            net = self.net_demand(alloc) - forecast_bytes.get(alloc, 0)
            nets[alloc] = net if net > 0 else 0

        controls = [a for a in self.registered if self.classes[a] is PriorityClass.CONTROL]
        others = [a for a in self.registered if self.classes[a] is not PriorityClass.CONTROL]
        order = _rotate(controls, frame_index) + _rotate(others, frame_index)

        period = p.polling_period_frames
        data_allocs = [a for a in order if nets[a] > 0]
        poll_allocs = [
            a for a in order
            if nets[a] == 0 and a not in forecast_bytes
            and frame_index - self.last_entry_frame.get(a, -period) >= period
        ]

        n_entries = len(data_allocs) + len(poll_allocs)
        avail = (free.free_bytes()
                 - n_entries * (p.burst_overhead_bytes + p.guard_bytes)
                 - len(poll_allocs) * p.poll_grant_bytes)
        if avail < 0:
            avail = 0
        shares = self._proportional_shares(data_allocs, nets, avail)

        # Control entries settle the precedence floor for background entries.
        control_floor = 0
        for alloc in order:
            cls = self.classes[alloc]
            min_start = control_floor if cls is PriorityClass.BACKGROUND else 0
            got_entry = False
            share = shares.get(alloc, 0)
            if share > 0:
                chunks, _unplaced = free.fill(share, p.word_bytes, min_start)
                for pos, size in chunks:
                    placed.append((alloc, pos, size, GrantPurpose.DATA))
                    got_entry = True
                    if cls is PriorityClass.CONTROL and pos + size > control_floor:
                        control_floor = pos + size
            # Any alloc left without an entry is still owed its periodic poll.
            if (not got_entry and alloc not in forecast_bytes
                    and frame_index - self.last_entry_frame.get(alloc, -period) >= period):
                pos = free.place_at_or_after(min_start, p.poll_grant_bytes)
                if pos is not None:
                    placed.append((alloc, pos, p.poll_grant_bytes, GrantPurpose.POLL))
                    if cls is PriorityClass.CONTROL and pos + p.poll_grant_bytes > control_floor:
                        control_floor = pos + p.poll_grant_bytes

        # The latest entry per alloc carries the DBRu request so the sampled
        # occupancy reflects every drain of this frame.
        last_per_alloc: dict[int, int] = {}
        for i, (alloc, pos, size, purpose) in enumerate(placed):
            cur = last_per_alloc.get(alloc)
            if cur is None or pos > placed[cur][1]:
                last_per_alloc[alloc] = i
        entries = []
        for i, (alloc, pos, size, purpose) in enumerate(placed):
            entries.append(GrantEntry(alloc, pos, size, last_per_alloc[alloc] == i, purpose))
        entries.sort(key=lambda e: e.start_offset_bytes)
        bwmap = BwMap(frame_index, tuple(entries), broadcast_at)
        validate_bwmap(bwmap, p, capacity_bytes, self.classes)

        for e in entries:
            self.last_entry_frame[e.alloc_id] = frame_index
            if e.purpose is not GrantPurpose.POLL:
                self.outstanding[e.alloc_id].append((frame_index, e.grant_bytes))
        self.last_built_frame = frame_index
        return bwmap

    def _proportional_shares(self, allocs: list[int], nets: dict[int, int],
                             avail: int) -> dict[int, int]:
        p = self.params
        demand = sum(nets[a] for a in allocs)
        shares: dict[int, int] = {}
        if not allocs or avail <= 0:
            return {a: 0 for a in allocs}
        if demand <= avail:
            left = avail
            for a in allocs:
                want = p.ceil_word(nets[a])
                give = want if want <= left else p.floor_word(left)
                shares[a] = give
                left -= give
            return shares
        for a in allocs:
            shares[a] = p.floor_word(nets[a] * avail // demand)
        leftover = p.floor_word(avail - sum(shares.values()))
        for a in sorted(allocs):
            if leftover < p.word_bytes:
                break
            gap = p.ceil_word(nets[a]) - shares[a]
            if gap <= 0:
                continue
            add = min(gap, leftover)
            shares[a] += add
            leftover -= add
        return shares


def build_bwmap_baseline(scheduler: OltScheduler, frame_index: int, capacity_bytes: int,
                         broadcast_at: SimTime = 0) -> BwMap:
    return scheduler.build_baseline(frame_index, capacity_bytes, broadcast_at)


def build_bwmap_cooperative(scheduler: OltScheduler, frame_index: int, capacity_bytes: int,
                            broadcast_at: SimTime = 0) -> BwMap:
    return scheduler.build_cooperative(frame_index, capacity_bytes, broadcast_at)


def validate_bwmap(bwmap: BwMap, params: PonParams, capacity_bytes: int,
                   classes: dict[int, PriorityClass]) -> None:
    oh, guard = params.burst_overhead_bytes, params.guard_bytes
    prev_end = 0
    total = 0
    first_background = None
    last_control = None
    for e in bwmap.entries:
        if e.grant_bytes <= 0:
            raise InvariantViolation(
                f"frame {bwmap.frame_index}: non-positive grant for alloc {e.alloc_id}")
        if e.start_offset_bytes < prev_end + oh:
            raise InvariantViolation(
                f"frame {bwmap.frame_index}: entry at {e.start_offset_bytes} overlaps previous")
        if e.start_offset_bytes + e.grant_bytes + guard > capacity_bytes:
            raise InvariantViolation(
                f"frame {bwmap.frame_index}: entry for alloc {e.alloc_id} exceeds capacity")
        prev_end = e.start_offset_bytes + e.grant_bytes + guard
        total += e.grant_bytes + oh + guard
        cls = classes.get(e.alloc_id)
        if cls is PriorityClass.BACKGROUND and first_background is None:
            first_background = e.start_offset_bytes
        if cls is PriorityClass.CONTROL:
            last_control = e.start_offset_bytes
    if total > capacity_bytes:
        raise InvariantViolation(
            f"frame {bwmap.frame_index}: grants+overheads {total} exceed capacity {capacity_bytes}")
    if first_background is not None and last_control is not None and last_control > first_background:
        raise InvariantViolation(
            f"frame {bwmap.frame_index}: control entry scheduled after background entry")


# ---------------------------------------------------------------------------
# Master/slave cascade


def cascade_allocate(master: OltRole, demands: dict[int, int], capacity_bytes: int,
                     min_share_bytes: int, word_bytes: int = 4) -> dict[int, int]:
    """Split the upstream frame budget across a cascade group.

    Demand summaries include each OLT's own burst overheads. Shares are
    demand-proportional with a per-OLT floor; a lone OLT keeps the whole frame.
    """
    if master.role != "master":
        raise InvariantViolation("cascade allocation must be driven by the master OLT")
    olts = sorted(demands)
    if len(olts) == 1:
        return {olts[0]: capacity_bytes}

    def floor_word(n: int) -> int:
        return (n // word_bytes) * word_bytes

    wanted = {i: max(min_share_bytes, demands[i]) for i in olts}
    if sum(wanted.values()) <= capacity_bytes:
        return wanted
    pool = capacity_bytes - min_share_bytes * len(olts)
    extras = {i: max(0, demands[i] - min_share_bytes) for i in olts}
    total_extra = sum(extras.values())
    shares = {}
    for i in olts:
        bonus = floor_word(extras[i] * pool // total_extra) if total_extra else 0
        shares[i] = min_share_bytes + bonus
    leftover = floor_word(capacity_bytes - sum(shares.values()))
    for i in olts:
        if leftover < word_bytes:
            break
        gap = wanted[i] - shares[i]
        if gap <= 0:
            continue
        add = min(gap, leftover)
        shares[i] += add
        leftover -= add
    return shares


# ---------------------------------------------------------------------------
# Burst execution


def execute_entry(entry: GrantEntry, queue, frame_start: SimTime, timing: LineTiming,
                  upstream_prop_ns: int):
    """Drain one grant against its queue at burst time.

    Returns (payload_start_time, drained_bytes, PendingBurst | None).
    Packets transmit only if they fit in the remaining grant.
    """
    payload_start = frame_start + timing.time_of_bytes(entry.start_offset_bytes)
    if queue is None:
        return payload_start, 0, None
    queue.advance(payload_start)
    sent, burst = queue.drain(entry.grant_bytes, payload_start, entry.start_offset_bytes,
                              timing, upstream_prop_ns)
    return payload_start, sent, burst
