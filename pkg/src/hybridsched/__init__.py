"""Trace-driven simulator for co-scheduling rigid, on-demand, and malleable
jobs on a single cluster, with six preparation/arrival scheduling mechanisms
on top of an FCFS + EASY-backfilling baseline."""

from .config import (
    BASELINE,
    MECHANISM_NAMES,
    ArrivalStrategy,
    MechanismConfig,
    NoticeStrategy,
    SystemConfig,
)
from .engine import SimulationError, Simulator
from .jobs import JobKind, JobSpec, NoticeCategory, NoticeProfile, RawTraceJob, WorkloadError
from .metrics import MetricsReport, report_from_engine, report_from_oracle
from .oracle import OracleError, PerSecondOracle
from .workload import (
    NOTICE_MIXES,
    SyntheticTraceConfig,
    WorkloadConfig,
    generate_workload,
    parse_native,
    parse_swf,
    synthesize_trace,
    write_native,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalStrategy",
    "BASELINE",
    "JobKind",
    "JobSpec",
    "MECHANISM_NAMES",
    "MechanismConfig",
    "MetricsReport",
    "NOTICE_MIXES",
    "NoticeCategory",
    "NoticeProfile",
    "NoticeStrategy",
    "OracleError",
    "PerSecondOracle",
    "RawTraceJob",
    "SimulationError",
    "Simulator",
    "SyntheticTraceConfig",
    "SystemConfig",
    "WorkloadConfig",
    "WorkloadError",
    "generate_workload",
    "parse_native",
    "parse_swf",
    "report_from_engine",
    "report_from_oracle",
    "synthesize_trace",
    "write_native",
]
