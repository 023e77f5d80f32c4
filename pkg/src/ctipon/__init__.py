"""ctipon: discrete-event simulation of 5G fronthaul carried over a shared
XGS-PON upstream, comparing status-report DBA with grant-forecast (CTI) DBA."""

from .engine import Engine, Event, EventKind, RunReport, SchedulingError, SimTime
from .metrics import FlowStats, MetricsLedger, PacketRecord, dbru_opportunity_time
from .pon import (BwMap, DbruReport, GrantEntry, InvariantViolation, OltRole,
                  OltScheduler, PriorityClass, cascade_allocate)
from .runner import RunResult, run_single, run_sweep
from .scenario import ConfigError, Scenario, default_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Engine", "Event", "EventKind", "RunReport", "SchedulingError", "SimTime",
    "FlowStats", "MetricsLedger", "PacketRecord", "dbru_opportunity_time",
    "BwMap", "DbruReport", "GrantEntry", "InvariantViolation", "OltRole",
    "OltScheduler", "PriorityClass", "cascade_allocate",
    "RunResult", "run_single", "run_sweep",
    "ConfigError", "Scenario", "default_scenario", "load_scenario",
    "__version__",
]
