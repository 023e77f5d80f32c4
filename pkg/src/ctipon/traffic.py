"""Traffic generation: constant-bit-rate and Poisson packet sources feeding
ONU queues, plus the load-sweep expansion used by the comparison experiment.

Sources hand out arrival timestamps in bulk (`take_until`) so queues can
materialize packets lazily; a source's stream depends only on (seed,
stream_id), never on other sources.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from math import gcd
from typing import Optional

import numpy as np

from .engine import SimTime

_CHUNK = 8192


@dataclass(frozen=True, slots=True)
class SourceSpec:
    kind: str  # "cbr" | "poisson"
    rate_fraction: Fraction
    packet_size_bytes: int
    target_alloc_id: int
    start_ns: SimTime = 0
    stop_ns: Optional[SimTime] = None
    stream_id: int = 0

    def __post_init__(self):
        if self.kind not in ("cbr", "poisson"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.rate_fraction < 0:
            raise ValueError("rate_fraction must be >= 0")
        if self.packet_size_bytes <= 0:
            raise ValueError("packet size must be positive")


class CbrArrivals:
    """Arrivals at exact spacing packet_bits / (rate_fraction * line_rate),
    kept in integer arithmetic so long runs carry no drift."""

    def __init__(self, spec: SourceSpec, rate_basis_bps):
        self.spec = spec
        rate = Fraction(spec.rate_fraction) * Fraction(rate_basis_bps)  # bits per second
        if rate <= 0:
            self.num = self.den = 0
        else:
            num = spec.packet_size_bytes * 8 * 1_000_000_000 * rate.denominator
            den = rate.numerator
            g = gcd(num, den)
            self.num, self.den = num // g, den // g
        self.index = 0

    def arrival_at(self, i: int) -> SimTime:
        return self.spec.start_ns + (i * self.num) // self.den

    def next_arrival(self) -> Optional[tuple[SimTime, int]]:
        if self.den == 0:
            return None
        t = self.arrival_at(self.index)
        if self.spec.stop_ns is not None and t >= self.spec.stop_ns:
            return None
        self.index += 1
        return t, self.spec.packet_size_bytes

    def take_until(self, now: SimTime) -> np.ndarray:
        if self.den == 0:
            return _EMPTY
        limit = now
        if self.spec.stop_ns is not None and self.spec.stop_ns - 1 < limit:
            limit = self.spec.stop_ns - 1
        dt = limit - self.spec.start_ns
        if dt < 0:
            return _EMPTY
        # largest i with (i*num)//den <= dt
        i_hi = ((dt + 1) * self.den - 1) // self.num
        count = i_hi + 1 - self.index
        if count <= 0:
            return _EMPTY
        out = np.empty(count, dtype=np.int64)
        filled = 0
        i = self.index
        while filled < count:
            n = min(_CHUNK, count - filled)
            q0, r0 = divmod(i * self.num, self.den)
            rel = (r0 + np.arange(n, dtype=np.int64) * self.num) // self.den
            out[filled:filled + n] = self.spec.start_ns + q0 + rel
            filled += n
            i += n
        self.index = i
        return out


class PoissonArrivals:
    """Exponential inter-arrival times with the CBR-equivalent mean, drawn
    from the source's own seeded stream."""

    def __init__(self, spec: SourceSpec, rate_basis_bps, rng: np.random.Generator):
        self.spec = spec
        rate = Fraction(spec.rate_fraction) * Fraction(rate_basis_bps)
        self.mean_ns = float(spec.packet_size_bytes * 8 * 1_000_000_000 / rate) if rate > 0 else 0.0
        self.rng = rng
        self._buffer = _EMPTY
        self._clock = float(spec.start_ns)
        self._exhausted = rate <= 0

    def _draw(self) -> None:
        gaps = self.rng.exponential(self.mean_ns, _CHUNK)
        times = self._clock + np.cumsum(gaps)
        self._clock = float(times[-1])
        arr = times.astype(np.int64)
        if self.spec.stop_ns is not None:
            arr = arr[arr < self.spec.stop_ns]
            if len(arr) < _CHUNK:
                self._exhausted = True
        self._buffer = np.concatenate((self._buffer, arr)) if len(self._buffer) else arr

    def next_arrival(self) -> Optional[tuple[SimTime, int]]:
        while not len(self._buffer):
            if self._exhausted:
                return None
            self._draw()
        t = int(self._buffer[0])
        self._buffer = self._buffer[1:]
        return t, self.spec.packet_size_bytes

    def take_until(self, now: SimTime) -> np.ndarray:
        while not self._exhausted and (not len(self._buffer) or self._buffer[-1] <= now):
            self._draw()
        cut = int(np.searchsorted(self._buffer, now, side="right"))
        taken, self._buffer = self._buffer[:cut], self._buffer[cut:]
        return taken


_EMPTY = np.empty(0, dtype=np.int64)


def make_source(spec: SourceSpec, rate_basis_bps, rng_streams):
    """rate_basis_bps: the rate that rate_fraction scales (usable PON capacity)."""
    if spec.kind == "cbr":
        return CbrArrivals(spec, rate_basis_bps)
    return PoissonArrivals(spec, rate_basis_bps, rng_streams.stream(spec.stream_id))


def next_arrival(source) -> Optional[tuple[SimTime, int]]:
    """Pull one (arrival time, size) pair from a generator state."""
    return source.next_arrival()


# ---------------------------------------------------------------------------
# Load sweep


DEFAULT_SWEEP_FRACTIONS = tuple(Fraction(n, 10) for n in range(5, 12))
MODES = ("baseline", "cti")


@dataclass(frozen=True)
class SweepSpec:
    fractions: tuple[Fraction, ...] = DEFAULT_SWEEP_FRACTIONS

    def __post_init__(self):
        if not self.fractions:
            raise ValueError("sweep.fractions must not be empty")
        if any(f <= 0 for f in self.fractions):
            raise ValueError("sweep fractions must be positive")


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    mode: str
    fraction: Fraction
    scenario: object


def format_fraction(fraction: Fraction) -> str:
    return f"{float(fraction):g}"


def build_sweep(base_scenario, sweep: SweepSpec, modes=MODES) -> list[RunSpec]:
    """One run per (fraction, mode); both modes at a fraction share the base
    seed so their arrival sequences are identical."""
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    runs = []
    for fraction in sweep.fractions:
        raw = dict(base_scenario.raw)
        raw["traffic.background_fraction"] = format_fraction(fraction)
        scenario = replace(base_scenario, background_fraction=fraction, raw=raw)
        for mode in modes:
            run_id = f"{mode}-bg{format_fraction(fraction)}"
            runs.append(RunSpec(run_id, mode, fraction, scenario))
    return runs
