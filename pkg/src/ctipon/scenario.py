"""Scenario configuration: a flat key=value text format with dotted keys.

Every key has a default, so an empty file (or no file) is a valid scenario.
Unknown keys are rejected, values are parsed exactly (rates and fractions as
rationals, durations to integer nanoseconds), and the fully resolved
configuration can be dumped back out for the run record.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from .engine import NS_PER_MS, NS_PER_US
from .pon import derive_capacity


class ConfigError(Exception):
    """Scenario file or flag rejected; the message names the offending key."""


def _parse_int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError as exc:
        raise ValueError(f"not an integer: {text!r}") from exc


def _parse_fraction(text: str) -> Fraction:
    try:
        if "/" in text:
            return Fraction(text)
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _parse_fraction_list(text: str) -> tuple[Fraction, ...]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    return tuple(_parse_fraction(item) for item in items)


def _parse_choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in choices:
            raise ValueError(f"must be one of {choices}, got {text!r}")
        return text
    return parse


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], object]
    default: str
    check: Optional[Callable[[object], Optional[str]]] = None


def _positive(v) -> Optional[str]:
    return None if v > 0 else "must be positive"


def _non_negative(v) -> Optional[str]:
    return None if v >= 0 else "must be >= 0"


def _unit_interval(v) -> Optional[str]:
    return None if 0 <= v <= 1 else "must be within [0, 1]"


SCHEMA: dict[str, _Key] = {
    "seed": _Key(_parse_int, "1", _non_negative),
    "duration_ms": _Key(_parse_fraction, "2000", _positive),
    "warmup_ms": _Key(_parse_fraction, "10", _non_negative),
    "pon.line_rate_gbps": _Key(_parse_fraction, "9.95328", _positive),
    "pon.frame_us": _Key(_parse_fraction, "125", _positive),
    "pon.overhead_fraction": _Key(_parse_fraction, "0",
                                  lambda v: None if 0 <= v < 1 else "must be within [0, 1)"),
    "pon.burst_overhead_bytes": _Key(_parse_int, "64", _non_negative),
    "pon.guard_bytes": _Key(_parse_int, "32", _non_negative),
    "pon.word_bytes": _Key(_parse_int, "4", _positive),
    "pon.polling_period_frames": _Key(_parse_int, "1", _positive),
    "pon.fronthaul_buffer_bytes": _Key(_parse_int, "131072", _positive),
    "pon.background_buffer_bytes": _Key(_parse_int, "524288", _positive),
    "pon.downstream_prop_us": _Key(_parse_fraction, "10", _non_negative),
    "pon.upstream_prop_us": _Key(_parse_fraction, "10", _non_negative),
    "pon.cascade_min_share_bytes": _Key(_parse_int, "512", _non_negative),
    "ran.slot_us": _Key(_parse_fraction, "500", _positive),
    "ran.k2_slots": _Key(_parse_int, "2", _positive),
    "ran.ue_count": _Key(_parse_int, "1", _positive),
    "ran.ue_fraction": _Key(_parse_fraction, "0.15", _positive),
    "ran.max_grants_per_slot": _Key(_parse_int, "8", _positive),
    "ran.ue_processing_us": _Key(_parse_fraction, "0", _non_negative),
    "ran.ru_processing_us": _Key(_parse_fraction, "0", _non_negative),
    "ran.fronthaul_overhead_factor": _Key(_parse_fraction, "1.1",
                                          lambda v: None if v >= 1 else "must be >= 1"),
    "ran.mtu_bytes": _Key(_parse_int, "1500", _positive),
    "cti.bus_latency_us": _Key(_parse_fraction, "50", _non_negative),
    "cti.loss_probability": _Key(_parse_fraction, "0", _unit_interval),
    "traffic.background_onus": _Key(_parse_int, "3", _non_negative),
    "traffic.background_kind": _Key(_parse_choice("cbr", "poisson"), "cbr"),
    "traffic.background_fraction": _Key(_parse_fraction, "0.8", _non_negative),
    "traffic.packet_bytes": _Key(_parse_int, "1500", _positive),
    "sweep.fractions": _Key(_parse_fraction_list, "0.5,0.6,0.7,0.8,0.9,1.0,1.1"),
}


def _to_ns(value: Fraction, scale: int, key: str) -> int:
    ns = value * scale
    if ns.denominator != 1:
        raise ConfigError(f"{key}: {value} does not resolve to whole nanoseconds")
    return int(ns)


@dataclass(frozen=True)
class Scenario:
    """Fully resolved run configuration (times in ns, rates exact)."""

    seed: int
    duration_ns: int
    warmup_ns: int
    # pon
    line_rate_bps: int
    frame_ns: int
    overhead_fraction: Fraction
    capacity_bytes: int
    burst_overhead_bytes: int
    guard_bytes: int
    word_bytes: int
    polling_period_frames: int
    fronthaul_buffer_bytes: int
    background_buffer_bytes: int
    downstream_prop_ns: int
    upstream_prop_ns: int
    cascade_min_share_bytes: int
    # ran
    slot_ns: int
    k2_slots: int
    ue_count: int
    ue_fraction: Fraction
    max_tbs_bytes: int
    max_grants_per_slot: int
    ue_processing_ns: int
    ru_processing_ns: int
    fronthaul_overhead_factor: Fraction
    mtu_bytes: int
    # cti
    bus_latency_ns: int
    loss_probability: Fraction
    # traffic
    background_onus: int
    background_kind: str
    background_fraction: Fraction
    packet_bytes: int
    sweep_fractions: tuple[Fraction, ...]
    raw: dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def capacity_rate_bps(self) -> Fraction:
        """Usable upstream rate implied by the per-frame payload capacity."""
        return Fraction(self.capacity_bytes * 8 * 1_000_000_000, self.frame_ns)

    def fronthaul_offered_bytes_per_slot(self) -> int:
        from .ran import fronthaul_bytes
        return fronthaul_bytes(self.max_tbs_bytes, self.fronthaul_overhead_factor) \
            * min(self.ue_count, self.max_grants_per_slot)


def parse_scenario_text(text: str, origin: str = "<scenario>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{origin}:{lineno}: empty value for {key!r}")
        values[key] = value
    return values


def resolve(values: dict[str, str]) -> Scenario:
    parsed: dict[str, object] = {}
    raw: dict[str, str] = {}
    for key, spec in SCHEMA.items():
        text = values.get(key, spec.default)
        raw[key] = text
        try:
            value = spec.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        if spec.check is not None:
            problem = spec.check(value)
            if problem:
                raise ConfigError(f"{key}: {problem} (got {text})")
        parsed[key] = value

    line_rate = parsed["pon.line_rate_gbps"] * 1_000_000_000
    if line_rate.denominator != 1:
        raise ConfigError("pon.line_rate_gbps: must resolve to an integer bit rate")
    line_rate_bps = int(line_rate)
    frame_ns = _to_ns(parsed["pon.frame_us"], NS_PER_US, "pon.frame_us")
    capacity = derive_capacity(line_rate_bps, frame_ns, parsed["pon.overhead_fraction"])
    slot_ns = _to_ns(parsed["ran.slot_us"], NS_PER_US, "ran.slot_us")
    duration_ns = _to_ns(parsed["duration_ms"], NS_PER_MS, "duration_ms")
    warmup_ns = _to_ns(parsed["warmup_ms"], NS_PER_MS, "warmup_ms")
    if warmup_ns >= duration_ns:
        raise ConfigError("warmup_ms: warm-up must be shorter than duration_ms")

    min_entry = parsed["pon.burst_overhead_bytes"] + parsed["pon.guard_bytes"] + parsed["pon.word_bytes"]
    if capacity <= min_entry:
        raise ConfigError("pon.overhead_fraction: no usable frame capacity left")
    if parsed["traffic.packet_bytes"] > parsed["ran.mtu_bytes"]:
        raise ConfigError("traffic.packet_bytes: must not exceed ran.mtu_bytes")
    if parsed["traffic.packet_bytes"] <= parsed["pon.word_bytes"]:
        raise ConfigError("traffic.packet_bytes: must exceed pon.word_bytes")

    # Backlogged UE model: per-slot transport block sized so the PON-side
    # fronthaul stream offers ue_fraction of the usable capacity.
    slot_capacity_bytes = Fraction(capacity * slot_ns, frame_ns)
    per_ue = parsed["ran.ue_fraction"] / parsed["ran.ue_count"]
    max_tbs = int(per_ue * slot_capacity_bytes / parsed["ran.fronthaul_overhead_factor"])
    if max_tbs <= 0:
        raise ConfigError("ran.ue_fraction: too small for one transport block per slot")

    return Scenario(
        seed=parsed["seed"],
        duration_ns=duration_ns,
        warmup_ns=warmup_ns,
        line_rate_bps=line_rate_bps,
        frame_ns=frame_ns,
        overhead_fraction=parsed["pon.overhead_fraction"],
        capacity_bytes=capacity,
        burst_overhead_bytes=parsed["pon.burst_overhead_bytes"],
        guard_bytes=parsed["pon.guard_bytes"],
        word_bytes=parsed["pon.word_bytes"],
        polling_period_frames=parsed["pon.polling_period_frames"],
        fronthaul_buffer_bytes=parsed["pon.fronthaul_buffer_bytes"],
        background_buffer_bytes=parsed["pon.background_buffer_bytes"],
        downstream_prop_ns=_to_ns(parsed["pon.downstream_prop_us"], NS_PER_US, "pon.downstream_prop_us"),
        upstream_prop_ns=_to_ns(parsed["pon.upstream_prop_us"], NS_PER_US, "pon.upstream_prop_us"),
        cascade_min_share_bytes=parsed["pon.cascade_min_share_bytes"],
        slot_ns=slot_ns,
        k2_slots=parsed["ran.k2_slots"],
        ue_count=parsed["ran.ue_count"],
        ue_fraction=parsed["ran.ue_fraction"],
        max_tbs_bytes=max_tbs,
        max_grants_per_slot=parsed["ran.max_grants_per_slot"],
        ue_processing_ns=_to_ns(parsed["ran.ue_processing_us"], NS_PER_US, "ran.ue_processing_us"),
        ru_processing_ns=_to_ns(parsed["ran.ru_processing_us"], NS_PER_US, "ran.ru_processing_us"),
        fronthaul_overhead_factor=parsed["ran.fronthaul_overhead_factor"],
        mtu_bytes=parsed["ran.mtu_bytes"],
        bus_latency_ns=_to_ns(parsed["cti.bus_latency_us"], NS_PER_US, "cti.bus_latency_us"),
        loss_probability=parsed["cti.loss_probability"],
        background_onus=parsed["traffic.background_onus"],
        background_kind=parsed["traffic.background_kind"],
        background_fraction=parsed["traffic.background_fraction"],
        packet_bytes=parsed["traffic.packet_bytes"],
        sweep_fractions=parsed["sweep.fractions"],
        raw=raw,
    )


def load_scenario(path: Optional[str | Path] = None,
                  overrides: Optional[dict[str, str]] = None) -> Scenario:
    """Load and validate a scenario file; CLI overrides are applied on top of
    the file before defaults fill the gaps."""
    values: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"scenario file not found: {p}")
        values = parse_scenario_text(p.read_text(), origin=str(p))
    if overrides:
        for key, text in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            values[key] = text
    return resolve(values)


def default_scenario(**override_fields) -> Scenario:
    scenario = resolve({})
    return replace(scenario, **override_fields) if override_fields else scenario


def dump_effective(scenario: Scenario) -> str:
    """Canonical post-defaults key=value dump, suitable for reloading."""
    lines = [f"{key} = {scenario.raw[key]}" for key in sorted(SCHEMA)]
    return "\n".join(lines) + "\n"
