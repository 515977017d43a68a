"""Planning rules for making room for on-demand jobs.

Pure functions over snapshots of the running jobs: the preemption-overhead
ordering, the preempt-at-arrival plan (ascending overhead until the deficit
is covered), and the shrink-first variant (even shrink of running malleable
jobs with fallback to preemption).  The engine applies the returned plans.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

from .jobs import JobKind


class VictimAction(str, Enum):
    KILL = "kill"  # immediate stop (rigid, or malleable still in setup)
    WARN = "warn"  # malleable drain, nodes yielded at warning expiry


class RunPhase(str, Enum):
    SETUP = "setup"
    RUNNING = "running"
    CHECKPOINT_WRITE = "checkpoint_write"
    WARNING_DRAIN = "warning_drain"


@dataclass(frozen=True)
class RunningSnapshot:
    """State of one running job, as the arrival planner sees it."""

    job_id: int
    kind: JobKind
    nodes: int
    n_min: int
    setup_time: int
    phase: RunPhase
    last_checkpoint_time: int  # start of unsaved compute (rigid)
    eligible: bool = True  # False: draining, reserved-backfilled elsewhere, etc.


@dataclass
class PreemptionPlan:
    victims: List[Tuple[int, VictimAction]] = field(default_factory=list)
    shrinks: List[Tuple[int, int]] = field(default_factory=list)  # (job_id, new size)
    nodes_yielded: int = 0
    feasible: bool = True


def preemption_overhead(job: RunningSnapshot, now: int, warning_duration: int) -> int:
    """Node-seconds wasted if the job is preempted now.

    Rigid jobs lose the compute since their last checkpoint and replay setup;
    malleable jobs lose nothing but occupy nodes through the warning drain and
    replay setup.  Jobs still in setup only replay setup.
    """
    if job.kind == JobKind.ON_DEMAND:
        raise ValueError("on-demand jobs are never preemption victims")
    if job.phase == RunPhase.SETUP:
        return job.nodes * job.setup_time
    if job.kind == JobKind.RIGID:
        return job.nodes * ((now - job.last_checkpoint_time) + job.setup_time)
    return job.nodes * (warning_duration + job.setup_time)


def _action_for(job: RunningSnapshot) -> VictimAction:
    if job.kind == JobKind.MALLEABLE and job.phase != RunPhase.SETUP:
        return VictimAction.WARN
    return VictimAction.KILL


def plan_paa(
    deficit: int, running: List[RunningSnapshot], now: int, warning_duration: int
) -> PreemptionPlan:
    """Preempt running jobs in ascending overhead order until covered."""
    plan = PreemptionPlan()
    if deficit <= 0:
        return plan
    candidates = [
        j
        for j in running
        if j.eligible and j.kind != JobKind.ON_DEMAND
    ]
    candidates.sort(key=lambda j: (preemption_overhead(j, now, warning_duration), j.job_id))
    for job in candidates:
        if plan.nodes_yielded >= deficit:
            break
        plan.victims.append((job.job_id, _action_for(job)))
        plan.nodes_yielded += job.nodes
    plan.feasible = plan.nodes_yielded >= deficit
    if not plan.feasible:
        plan.victims = []
        plan.nodes_yielded = 0
    return plan


def shrink_evenly(
    malleables: List[Tuple[int, int, int]], deficit: int
) -> List[Tuple[int, int]]:
    """Distribute ``deficit`` nodes over (job_id, current, n_min) triples.

    Proportional to each job's slack (current - n_min), integerized by
    largest remainder; ties break on ascending job id.
    """
    jobs = sorted(malleables)
    slack = [cur - lo for _, cur, lo in jobs]
    total = sum(slack)
    if deficit > total:
        raise ValueError("shrink deficit exceeds available slack")
    gives = [deficit * w // total for w in slack]
    remainders = [deficit * w % total for w in slack]
    short = deficit - sum(gives)
    order = sorted(range(len(jobs)), key=lambda i: (-remainders[i], jobs[i][0]))
    for i in order[:short]:
        gives[i] += 1
    return [
        (job_id, cur - give)
        for (job_id, cur, _), give in zip(jobs, gives)
        if give > 0
    ]


def plan_spaa(
    deficit: int, running: List[RunningSnapshot], now: int, warning_duration: int
) -> PreemptionPlan:
    """Shrink running malleable jobs evenly if their slack covers the deficit;
    otherwise fall back entirely to the preemption plan."""
    plan = PreemptionPlan()
    if deficit <= 0:
        return plan
    malleables = [
        j
        for j in running
        if j.eligible and j.kind == JobKind.MALLEABLE and j.phase != RunPhase.WARNING_DRAIN
    ]
    supply = sum(j.nodes - j.n_min for j in malleables)
    if supply < deficit:
        return plan_paa(deficit, running, now, warning_duration)
    triples = [(j.job_id, j.nodes, j.n_min) for j in malleables]
    plan.shrinks = shrink_evenly(triples, deficit)
    plan.nodes_yielded = deficit
    return plan
