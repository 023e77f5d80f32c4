from fractions import Fraction

import pytest

from ctipon.metrics import MetricsLedger
from ctipon.pon import PonParams, PriorityClass
from ctipon.scenario import default_scenario

LINE_RATE = 9_953_280_000
FRAME_NS = 125_000
CAPACITY = 155_520

PARAMS = PonParams(
    line_rate_bps=LINE_RATE,
    frame_ns=FRAME_NS,
    capacity_bytes=CAPACITY,
    burst_overhead_bytes=64,
    guard_bytes=32,
    word_bytes=4,
    poll_grant_bytes=4,
    polling_period_frames=1,
    downstream_prop_ns=10_000,
    upstream_prop_ns=10_000,
)


@pytest.fixture
def params():
    return PARAMS


@pytest.fixture
def ledger():
    return MetricsLedger(warmup_ns=0, horizon_ns=1_000_000_000)


def short_scenario(**overrides):
    """Resolved default scenario shrunk to 60 ms; overrides are resolved
    Scenario fields (never ones that feed derived values)."""
    fields = dict(duration_ns=60_000_000, warmup_ns=5_000_000,
                  background_fraction=Fraction(8, 10))
    fields.update(overrides)
    return default_scenario(**fields)


def raw_scenario(**raw):
    """Scenario resolved from raw config keys (derived values recomputed)."""
    from ctipon.scenario import resolve
    text = {key.replace("__", "."): str(value) for key, value in raw.items()}
    return resolve(text)
