"""DU MAC uplink scheduling and the UE grant-to-transmission timeline.

The MAC issues uplink grants round-robin once per slot; a granted UE transmits
k2 slots later, and the radio unit forwards the transport block onto its ONU
as MTU-sized fronthaul packets inflated by the fronthaul framing factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil

from .engine import SimTime


@dataclass(frozen=True, slots=True)
class SlotConfig:
    slot_duration_ns: int
    k2_slots: int
    ue_processing_ns: int
    ru_processing_ns: int
    fronthaul_overhead_factor: Fraction
    mtu_bytes: int
    max_tbs_bytes: int
    max_grants_per_slot: int

    def __post_init__(self):
        if self.slot_duration_ns <= 0:
            raise ValueError("slot duration must be positive")
        if self.fronthaul_overhead_factor < 1:
            raise ValueError("fronthaul overhead factor must be >= 1")


@dataclass(frozen=True, slots=True)
class UlGrant:
    ue_id: int
    issue_slot: int
    k2_slots: int
    tbs_bytes: int
    issued_at: SimTime

    def __post_init__(self):
        if self.tbs_bytes <= 0:
            raise ValueError("tbs_bytes must be positive")

    @property
    def tx_slot(self) -> int:
        return self.issue_slot + self.k2_slots


@dataclass(slots=True)
class UeDemand:
    ue_id: int
    buffer_bytes: int


class MacScheduler:
    """Round-robin uplink grant issuer; the pointer survives across slots so
    backlogged UEs never diverge by more than one grant."""

    def __init__(self, config: SlotConfig):
        self.config = config
        self._next = 0

    def schedule(self, slot: int, demands: list[UeDemand], now: SimTime) -> list[UlGrant]:
        return mac_schedule(slot, demands, self.config, self, now)


def mac_schedule(slot: int, demands: list[UeDemand], config: SlotConfig,
                 state: MacScheduler, now: SimTime) -> list[UlGrant]:
    """Issue up to max_grants_per_slot grants round-robin over UEs with
    pending demand; each grant carries min(buffer, max_tbs) bytes."""
    eligible = [d for d in demands if d.buffer_bytes > 0]
    if not eligible:
        return []
    grants: list[UlGrant] = []
    n = len(eligible)
    start = state._next % n
    for i in range(n):
        if len(grants) >= config.max_grants_per_slot:
            break
        d = eligible[(start + i) % n]
        tbs = min(d.buffer_bytes, config.max_tbs_bytes)
        grants.append(UlGrant(d.ue_id, slot, config.k2_slots, tbs, now))
    state._next = (start + len(grants)) % n
    return grants


def fronthaul_bytes(tbs_bytes: int, factor: Fraction) -> int:
    return ceil(tbs_bytes * factor)


def arrival_time(grant: UlGrant, config: SlotConfig) -> SimTime:
    """When the grant's transport block lands in the RU's ONU queue."""
    return (grant.issued_at
            + grant.k2_slots * config.slot_duration_ns
            + config.ue_processing_ns
            + config.ru_processing_ns)


def split_into_packets(total_bytes: int, mtu_bytes: int) -> list[int]:
    full, rem = divmod(total_bytes, mtu_bytes)
    sizes = [mtu_bytes] * full
    if rem:
        sizes.append(rem)
    return sizes


def ue_transmit(grant: UlGrant, config: SlotConfig) -> tuple[SimTime, list[int]]:
    """Fronthaul batch produced by one grant: (onu arrival time, packet sizes).

    Total size is the transport block inflated by the fronthaul framing
    factor, split at the MTU.
    """
    total = fronthaul_bytes(grant.tbs_bytes, config.fronthaul_overhead_factor)
    return arrival_time(grant, config), split_into_packets(total, config.mtu_bytes)
