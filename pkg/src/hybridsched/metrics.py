"""Run metrics: turnaround, instant starts, preemption ratios, utilization.

Reports are plain dataclasses, serializable to JSON-friendly dicts.  The same
report can be built from the event engine or from the per-second reference
run; wall-clock latency fields exist only for the engine and are excluded
when two runs are compared for equality.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from .jobs import JobKind

LATENCY_FIELDS = ("arrival_latency_ms", "pass_latency_ms")


def percentile(values: List[float], q: float) -> float:
    """Nearest-rank percentile; q in (0, 100]."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return ordered[rank - 1]


def latency_summary(values: List[float]) -> Dict[str, float]:
    return {
        "p50": percentile(values, 50),
        "p99": percentile(values, 99),
        "max": max(values) if values else 0.0,
        "count": len(values),
    }


@dataclass
class JobRecord:
    job_id: int
    kind: str
    first_submit: int
    finish: int
    n_starts: int
    preempt_count: int
    instant: Optional[bool]  # on-demand only

    @property
    def turnaround(self) -> int:
        return self.finish - self.first_submit


@dataclass
class MetricsReport:
    mechanism: str
    n_jobs: int
    capacity: int
    horizon: int
    useful: int
    waste: Dict[str, int]
    alloc_integral: int
    avg_turnaround: float
    avg_turnaround_by_kind: Dict[str, float]
    instant_start_rate: Optional[float]
    preempted_fraction_rigid: Optional[float]
    preempted_fraction_malleable: Optional[float]
    utilization: float
    jobs: List[JobRecord] = field(default_factory=list)
    arrival_latency_ms: Optional[Dict[str, float]] = None
    pass_latency_ms: Optional[Dict[str, float]] = None

    def to_dict(self, include_jobs: bool = False) -> dict:
        d = asdict(self)
        if not include_jobs:
            d.pop("jobs")
        return d

    def to_json(self, include_jobs: bool = False, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(include_jobs), indent=indent, sort_keys=True)

    def comparable(self) -> dict:
        """Deterministic view: drops wall-clock latency measurements."""
        d = self.to_dict(include_jobs=True)
        for key in LATENCY_FIELDS:
            d.pop(key, None)
        return d


def _aggregate(
    mechanism: str,
    capacity: int,
    horizon: int,
    useful: int,
    waste: Dict[str, int],
    alloc_integral: int,
    records: List[JobRecord],
    arrival_lat: Optional[List[float]] = None,
    pass_lat: Optional[List[float]] = None,
) -> MetricsReport:
    by_kind: Dict[str, List[JobRecord]] = {}
    for r in records:
        by_kind.setdefault(r.kind, []).append(r)

    def avg_t(rs: List[JobRecord]) -> float:
        return sum(r.turnaround for r in rs) / len(rs) if rs else 0.0

    ods = by_kind.get(JobKind.ON_DEMAND.value, [])
    rigids = by_kind.get(JobKind.RIGID.value, [])
    malls = by_kind.get(JobKind.MALLEABLE.value, [])
    return MetricsReport(
        mechanism=mechanism,
        n_jobs=len(records),
        capacity=capacity,
        horizon=horizon,
        useful=useful,
        waste=dict(waste),
        alloc_integral=alloc_integral,
        avg_turnaround=avg_t(records),
        avg_turnaround_by_kind={k: avg_t(v) for k, v in sorted(by_kind.items())},
        instant_start_rate=(sum(1 for r in ods if r.instant) / len(ods)) if ods else None,
        preempted_fraction_rigid=(
            sum(1 for r in rigids if r.preempt_count > 0) / len(rigids) if rigids else None
        ),
        preempted_fraction_malleable=(
            sum(1 for r in malls if r.preempt_count > 0) / len(malls) if malls else None
        ),
        utilization=useful / (capacity * horizon) if horizon > 0 else 0.0,
        jobs=sorted(records, key=lambda r: r.job_id),
        arrival_latency_ms=latency_summary(arrival_lat) if arrival_lat is not None else None,
        pass_latency_ms=latency_summary(pass_lat) if pass_lat is not None else None,
    )


def report_from_engine(sim) -> MetricsReport:
    records = []
    for jid, st in sorted(sim.states.items()):
        records.append(
            JobRecord(
                job_id=jid,
                kind=st.kind.value,
                first_submit=st.first_submit,
                finish=st.finish_time,
                n_starts=len(st.start_times),
                preempt_count=st.preempt_count,
                instant=st.instant if st.kind == JobKind.ON_DEMAND else None,
            )
        )
    horizon = (sim.t_last - sim.t_first) if sim.t_last is not None else 0
    return _aggregate(
        sim.mech.name,
        sim.system.capacity,
        horizon,
        sim.useful,
        sim.waste,
        sim.alloc_integral,
        records,
        arrival_lat=sim.arrival_latencies_ms,
        pass_lat=sim.pass_latencies_ms,
    )


def report_from_oracle(orc) -> MetricsReport:
    records = []
    for jid in sorted(orc.j):
        st = orc.j[jid]
        kind = orc.specs[jid].kind
        records.append(
            JobRecord(
                job_id=jid,
                kind=kind.value,
                first_submit=st["first_submit"],
                finish=st["finish"],
                n_starts=len(st["starts"]),
                preempt_count=st["preempts"],
                instant=st["instant"] if kind == JobKind.ON_DEMAND else None,
            )
        )
    horizon = (orc.t_last - orc.t_first) if orc.t_last is not None else 0
    return _aggregate(
        orc.mech.name,
        orc.system.capacity,
        horizon,
        orc.useful,
        orc.waste,
        orc.alloc_integral,
        records,
    )
