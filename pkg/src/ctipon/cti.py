"""Grant-forecast signalling between the DU MAC and the OLT scheduler.

Each uplink grant is translated into one forecast message (alloc-id, expected
arrival instant, expected PON-side bytes) and published over a bus modeled as
a fixed delivery latency plus an optional Bernoulli loss draw from a dedicated
random stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import SimTime
from .ran import SlotConfig, UlGrant, arrival_time, fronthaul_bytes


@dataclass(frozen=True, slots=True)
class CtiMessage:
    alloc_id: int
    expected_arrival: SimTime
    expected_bytes: int
    origin_grant: UlGrant
    published_at: SimTime

    def __post_init__(self):
        if self.expected_arrival <= self.published_at:
            raise ValueError("forecast must precede the bytes it announces")


@dataclass(frozen=True, slots=True)
class BusConfig:
    delivery_latency_ns: int
    loss_probability: Fraction

    def __post_init__(self):
        if self.delivery_latency_ns < 0:
            raise ValueError("bus latency must be >= 0")
        if not 0 <= self.loss_probability <= 1:
            raise ValueError("loss probability must be within [0, 1]")


def translate_ul_grant(grant: UlGrant, ru_map: dict[int, int],
                       config: SlotConfig, now: SimTime) -> Optional[CtiMessage]:
    """Turn an uplink grant into a PON grant forecast.

    Returns None when the grant's UE has no alloc-id mapping; the caller
    counts the miss and the flow falls back to status-report service.
    """
    alloc = ru_map.get(grant.ue_id)
    if alloc is None:
        return None
    return CtiMessage(
        alloc_id=alloc,
        expected_arrival=arrival_time(grant, config),
        expected_bytes=fronthaul_bytes(grant.tbs_bytes, config.fronthaul_overhead_factor),
        origin_grant=grant,
        published_at=now,
    )


class CtiBus:
    """Publish side of the forecast bus. publish() returns the delivery time,
    or None when the loss draw eats the message."""

    TRACE_HEADER = ("published_at_ns", "alloc_id", "expected_arrival_ns",
                    "expected_bytes", "delivered")

    def __init__(self, config: BusConfig, rng):
        self.config = config
        self.rng = rng
        self.published = 0
        self.lost = 0
        self.trace: list[tuple[int, int, int, int, int]] = []

    def publish(self, msg: CtiMessage) -> Optional[SimTime]:
        self.published += 1
        lost = False
        p = self.config.loss_probability
        if p > 0:
            lost = self.rng.random() < p
        if lost:
            self.lost += 1
        self.trace.append((msg.published_at, msg.alloc_id, msg.expected_arrival,
                           msg.expected_bytes, 0 if lost else 1))
        if lost:
            return None
        return msg.published_at + self.config.delivery_latency_ns
