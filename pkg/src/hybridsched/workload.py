"""Trace ingestion and hybrid workload synthesis.

Reads SWF-style traces, groups jobs by project, assigns job types per
project, and annotates on-demand jobs with advance-notice profiles.  Also
provides a synthetic raw-trace generator for experiments without a real
trace, and a line-delimited native format for generated workloads.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .jobs import (
    JobKind,
    JobSpec,
    NoticeCategory,
    NoticeProfile,
    RawTraceJob,
    WorkloadError,
    derive_t_single,
)

NATIVE_FORMAT = "hybridsched-workload"
NATIVE_VERSION = 1

# Advance-notice category mixes (fractions of on-demand jobs):
# (no_notice, accurate, early, late)
NOTICE_MIXES: Dict[str, Tuple[float, float, float, float]] = {
    "W1": (0.70, 0.10, 0.10, 0.10),
    "W2": (0.10, 0.70, 0.10, 0.10),
    "W3": (0.10, 0.10, 0.70, 0.10),
    "W4": (0.10, 0.10, 0.10, 0.70),
    "W5": (0.25, 0.25, 0.25, 0.25),
}


@dataclass
class WorkloadConfig:
    """Knobs for workload synthesis; defaults match the standard setup."""

    capacity: int = 4392
    on_demand_fraction: float = 0.10  # of projects
    rigid_fraction: float = 0.60
    malleable_fraction: float = 0.30
    notice_mix: Tuple[float, float, float, float] = NOTICE_MIXES["W5"]
    notice_lead: Tuple[int, int] = (900, 1800)  # seconds before arrival
    late_window: int = 1800
    shrink_fraction: float = 0.20  # n_min = ceil(fraction * n_max)
    rigid_setup_fraction: Tuple[float, float] = (0.05, 0.10)
    malleable_setup_fraction: Tuple[float, float] = (0.00, 0.05)
    large_od_threshold: float = 0.5  # of capacity
    rng_seed: int = 0

    def validate(self) -> None:
        fracs = (self.on_demand_fraction, self.rigid_fraction, self.malleable_fraction)
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise WorkloadError("type fractions must lie in [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise WorkloadError("type fractions must sum to 1")
        if any(not 0.0 <= f <= 1.0 for f in self.notice_mix):
            raise WorkloadError("notice mix fractions must lie in [0, 1]")
        if abs(sum(self.notice_mix) - 1.0) > 1e-9:
            raise WorkloadError("notice mix must sum to 1")
        if self.capacity < 1:
            raise WorkloadError("capacity must be positive")


@dataclass
class ParseStats:
    parsed: int = 0
    skipped_malformed: int = 0
    dropped_invalid: int = 0
    clamped_runtime: int = 0
    warnings: List[str] = field(default_factory=list)


def parse_swf(path: str) -> Tuple[List[RawTraceJob], ParseStats]:
    """Parse an SWF trace: whitespace-separated 18-field records, ';' comments.

    Field mapping (1-based SWF columns): 1 job id, 2 submit, 4 run time,
    5 allocated processors (falling back to 8 requested), 9 requested time,
    12 group id (used as the project label).
    """
    stats = ParseStats()
    jobs: List[RawTraceJob] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith(";"):
                continue
            fields = line.split()
            if len(fields) < 12:
                stats.skipped_malformed += 1
                continue
            try:
                job_id = int(fields[0])
                submit = int(float(fields[1]))
                runtime = int(float(fields[3]))
                size = int(float(fields[4]))
                if size < 1:
                    size = int(float(fields[7]))
                estimate = int(float(fields[8]))
                group = fields[11]
            except (ValueError, IndexError):
                stats.skipped_malformed += 1
                continue
            if size < 1 or runtime < 0:
                stats.dropped_invalid += 1
                continue
            if estimate < 1:
                estimate = max(runtime, 1)
            if runtime > estimate:
                runtime = estimate
                stats.clamped_runtime += 1
                stats.warnings.append(f"line {lineno}: runtime clamped to estimate")
            jobs.append(
                RawTraceJob(
                    job_id=job_id,
                    submit_time=submit,
                    runtime_estimate=estimate,
                    actual_runtime=runtime,
                    size=size,
                    project=f"g{group}",
                )
            )
            stats.parsed += 1
    jobs.sort(key=lambda j: (j.submit_time, j.job_id))
    return jobs, stats


def _largest_remainder(total: int, fractions: Sequence[float]) -> List[int]:
    """Integer apportionment of ``total`` by ``fractions`` (largest remainder)."""
    quotas = [total * f for f in fractions]
    counts = [int(math.floor(q)) for q in quotas]
    short = total - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _setup_seconds(rng: random.Random, runtime: int, frac_range: Tuple[float, float]) -> int:
    lo, hi = frac_range
    setup = int(round(rng.uniform(lo, hi) * runtime))
    return max(0, min(setup, max(runtime - 1, 0)))


def _make_notice(
    rng: random.Random, arrival: int, size: int, estimate: int, category: NoticeCategory, cfg: WorkloadConfig
) -> NoticeProfile:
    if category == NoticeCategory.NO_NOTICE:
        return NoticeProfile(
            category=category,
            estimated_arrival=arrival,
            actual_arrival=arrival,
            estimated_size=size,
            estimated_runtime=estimate,
        )
    lead = rng.randint(*cfg.notice_lead)
    notice_time = max(arrival - lead, 0)
    lead = arrival - notice_time
    if lead < 61:
        # the job arrives too early in the trace for a meaningful notice
        return NoticeProfile(
            category=NoticeCategory.NO_NOTICE,
            estimated_arrival=arrival,
            actual_arrival=arrival,
            estimated_size=size,
            estimated_runtime=estimate,
        )
    if category == NoticeCategory.ACCURATE:
        est_arrival = arrival
    elif category == NoticeCategory.EARLY:
        est_arrival = arrival + rng.randint(1, cfg.late_window)
    else:  # LATE: estimate lies before the arrival, still after the notice
        est_arrival = arrival - rng.randint(1, min(cfg.late_window, max(lead - 60, 1)))
    return NoticeProfile(
        category=category,
        estimated_arrival=est_arrival,
        actual_arrival=arrival,
        estimated_size=size,
        estimated_runtime=estimate,
        notice_time=notice_time,
    )


def generate_workload(raw: Sequence[RawTraceJob], cfg: WorkloadConfig) -> List[JobSpec]:
    """Annotate a raw trace with job types and notice profiles.

    Projects are shuffled by the seeded RNG and assigned types so that
    project counts match the configured fractions.  Every job inherits its
    project's type, except on-demand jobs larger than the threshold, which
    are reassigned rigid or malleable with equal probability.
    """
    if not raw:
        raise WorkloadError("raw trace is empty")
    cfg.validate()
    rng = random.Random(cfg.rng_seed)

    projects: List[str] = []
    seen = set()
    for job in raw:
        if job.project not in seen:
            seen.add(job.project)
            projects.append(job.project)
    rng.shuffle(projects)
    n_od, n_rigid, _ = _largest_remainder(
        len(projects), (cfg.on_demand_fraction, cfg.rigid_fraction, cfg.malleable_fraction)
    )
    kind_of_project: Dict[str, JobKind] = {}
    for i, name in enumerate(projects):
        if i < n_od:
            kind_of_project[name] = JobKind.ON_DEMAND
        elif i < n_od + n_rigid:
            kind_of_project[name] = JobKind.RIGID
        else:
            kind_of_project[name] = JobKind.MALLEABLE

    threshold = cfg.large_od_threshold * cfg.capacity
    specs: List[JobSpec] = []
    for job in sorted(raw, key=lambda j: (j.submit_time, j.job_id)):
        kind = kind_of_project[job.project]
        size = min(job.size, cfg.capacity)
        runtime = max(job.actual_runtime, 1)
        estimate = max(job.runtime_estimate, runtime)
        if kind == JobKind.ON_DEMAND and size > threshold:
            kind = JobKind.RIGID if rng.random() < 0.5 else JobKind.MALLEABLE

        if kind == JobKind.RIGID:
            setup = _setup_seconds(rng, runtime, cfg.rigid_setup_fraction)
            spec = JobSpec(
                job_id=job.job_id,
                submit_time=job.submit_time,
                kind=kind,
                size=size,
                n_min=size,
                n_max=size,
                runtime_estimate=estimate,
                actual_work=(runtime - setup) * size,
                setup_time=setup,
            )
        elif kind == JobKind.MALLEABLE:
            setup = _setup_seconds(rng, runtime, cfg.malleable_setup_fraction)
            n_max = size
            n_min = max(1, int(math.ceil(cfg.shrink_fraction * n_max)))
            spec = JobSpec(
                job_id=job.job_id,
                submit_time=job.submit_time,
                kind=kind,
                size=n_max,
                n_min=n_min,
                n_max=n_max,
                runtime_estimate=estimate,
                actual_work=derive_t_single(n_max, runtime, setup),
                setup_time=setup,
            )
        else:
            cats = (
                NoticeCategory.NO_NOTICE,
                NoticeCategory.ACCURATE,
                NoticeCategory.EARLY,
                NoticeCategory.LATE,
            )
            category = rng.choices(cats, weights=cfg.notice_mix, k=1)[0]
            notice = _make_notice(rng, job.submit_time, size, estimate, category, cfg)
            spec = JobSpec(
                job_id=job.job_id,
                submit_time=job.submit_time,
                kind=kind,
                size=size,
                n_min=size,
                n_max=size,
                runtime_estimate=estimate,
                actual_work=runtime * size,
                setup_time=0,
                notice=notice,
            )
        spec.validate(capacity=cfg.capacity)
        specs.append(spec)
    return specs


# ---------------------------------------------------------------------------
# Native line-delimited format

def _spec_to_record(spec: JobSpec) -> dict:
    rec = {
        "job_id": spec.job_id,
        "submit_time": spec.submit_time,
        "kind": spec.kind.value,
        "size": spec.size,
        "n_min": spec.n_min,
        "n_max": spec.n_max,
        "runtime_estimate": spec.runtime_estimate,
        "actual_work": spec.actual_work,
        "setup_time": spec.setup_time,
    }
    if spec.notice is not None:
        n = spec.notice
        rec["notice"] = {
            "category": n.category.value,
            "estimated_arrival": n.estimated_arrival,
            "actual_arrival": n.actual_arrival,
            "estimated_size": n.estimated_size,
            "estimated_runtime": n.estimated_runtime,
            "notice_time": n.notice_time,
        }
    return rec


def write_native(specs: Sequence[JobSpec], path: str, capacity: Optional[int] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"format": NATIVE_FORMAT, "version": NATIVE_VERSION}
        if capacity is not None:
            header["capacity"] = capacity
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for spec in specs:
            fh.write(json.dumps(_spec_to_record(spec), sort_keys=True) + "\n")


_REQUIRED_FIELDS = (
    "job_id",
    "submit_time",
    "kind",
    "size",
    "n_min",
    "n_max",
    "runtime_estimate",
    "actual_work",
    "setup_time",
)


def parse_native(path: str) -> List[JobSpec]:
    """Read a native workload file, validating the schema per line."""
    specs: List[JobSpec] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"line 1: not a native workload header: {exc}") from None
        if header.get("format") != NATIVE_FORMAT:
            raise WorkloadError("line 1: unrecognized workload format")
        if header.get("version") != NATIVE_VERSION:
            raise WorkloadError(f"line 1: unsupported version {header.get('version')}")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise WorkloadError(f"line {lineno}: invalid record: {exc}") from None
            for name in _REQUIRED_FIELDS:
                if name not in rec:
                    raise WorkloadError(f"line {lineno}: missing field '{name}'")
            kind = JobKind(rec["kind"])
            notice = None
            if kind == JobKind.ON_DEMAND:
                if "notice" not in rec:
                    raise WorkloadError(f"line {lineno}: on-demand record missing 'notice'")
                nd = rec["notice"]
                notice = NoticeProfile(
                    category=NoticeCategory(nd["category"]),
                    estimated_arrival=nd["estimated_arrival"],
                    actual_arrival=nd["actual_arrival"],
                    estimated_size=nd["estimated_size"],
                    estimated_runtime=nd["estimated_runtime"],
                    notice_time=nd["notice_time"],
                )
            if kind == JobKind.MALLEABLE and rec["n_min"] is None:
                raise WorkloadError(f"line {lineno}: malleable record missing 'n_min'")
            spec = JobSpec(
                job_id=rec["job_id"],
                submit_time=rec["submit_time"],
                kind=kind,
                size=rec["size"],
                n_min=rec["n_min"],
                n_max=rec["n_max"],
                runtime_estimate=rec["runtime_estimate"],
                actual_work=rec["actual_work"],
                setup_time=rec["setup_time"],
                notice=notice,
            )
            try:
                spec.validate()
            except WorkloadError as exc:
                raise WorkloadError(f"line {lineno}: {exc}") from None
            specs.append(spec)
    return specs


# ---------------------------------------------------------------------------
# Synthetic raw traces (for experiments without a real trace)

@dataclass
class SyntheticTraceConfig:
    n_jobs: int = 2000
    n_projects: int = 40
    capacity: int = 512
    load_factor: float = 1.3  # offered node-seconds per capacity-second
    mean_runtime: float = 1800.0
    max_runtime: int = 43200
    seed: int = 0


def synthesize_trace(cfg: SyntheticTraceConfig) -> List[RawTraceJob]:
    """Generate a bursty project-grouped raw trace with Poisson arrivals.

    Jobs of one project arrive in runs, so project-based type assignment
    produces bursty on-demand submission patterns.
    """
    rng = random.Random(cfg.seed)
    # Log-normal-ish sizes, skewed small, capped at a quarter of the system.
    max_size = max(2, cfg.capacity // 4)
    sizes = []
    runtimes = []
    for _ in range(cfg.n_jobs):
        size = int(round(rng.lognormvariate(math.log(8), 1.0)))
        sizes.append(min(max(size, 1), max_size))
        runtime = int(rng.expovariate(1.0 / cfg.mean_runtime)) + 60
        runtimes.append(min(runtime, cfg.max_runtime))
    mean_work = sum(s * r for s, r in zip(sizes, runtimes)) / cfg.n_jobs
    interarrival = mean_work / (cfg.capacity * cfg.load_factor)

    jobs: List[RawTraceJob] = []
    t = 0.0
    project = rng.randrange(cfg.n_projects)
    burst_left = 0
    for i in range(cfg.n_jobs):
        t += rng.expovariate(1.0 / interarrival)
        if burst_left <= 0:
            project = rng.randrange(cfg.n_projects)
            burst_left = rng.randint(1, 12)
        burst_left -= 1
        runtime = runtimes[i]
        estimate = min(int(runtime * rng.uniform(1.0, 2.0)), cfg.max_runtime)
        jobs.append(
            RawTraceJob(
                job_id=i + 1,
                submit_time=int(t),
                runtime_estimate=max(estimate, runtime),
                actual_runtime=runtime,
                size=sizes[i],
                project=f"p{project}",
            )
        )
    return jobs
