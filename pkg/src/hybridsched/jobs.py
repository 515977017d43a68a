"""Job models: raw trace records, annotated job specs, and advance-notice profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class JobKind(str, Enum):
    RIGID = "rigid"
    ON_DEMAND = "on_demand"
    MALLEABLE = "malleable"


class NoticeCategory(str, Enum):
    NO_NOTICE = "no_notice"
    ACCURATE = "accurate"
    EARLY = "early"
    LATE = "late"


class WorkloadError(ValueError):
    """Raised on invalid trace records or workload schema violations."""


@dataclass(frozen=True)
class RawTraceJob:
    """One job as read from a scheduler trace, before type annotation."""

    job_id: int
    submit_time: int
    runtime_estimate: int
    actual_runtime: int
    size: int
    project: str


@dataclass(frozen=True)
class NoticeProfile:
    """Advance-notice behaviour of an on-demand job.

    ``notice_time`` is absent for NO_NOTICE jobs; ``actual_arrival`` is the
    time the job really shows up (equal to the submit event for NO_NOTICE).
    """

    category: NoticeCategory
    estimated_arrival: int
    actual_arrival: int
    estimated_size: int
    estimated_runtime: int
    notice_time: Optional[int] = None

    def validate(self, late_window: int = 1800) -> None:
        c = self.category
        if c == NoticeCategory.NO_NOTICE:
            if self.notice_time is not None:
                raise WorkloadError("no-notice job must not carry a notice time")
            return
        if self.notice_time is None:
            raise WorkloadError(f"{c.value} notice requires a notice time")
        if self.notice_time >= self.actual_arrival:
            raise WorkloadError("notice must precede actual arrival")
        if c == NoticeCategory.ACCURATE and self.actual_arrival != self.estimated_arrival:
            raise WorkloadError("accurate notice requires arrival == estimate")
        if c == NoticeCategory.EARLY and not (
            self.notice_time < self.actual_arrival < self.estimated_arrival
        ):
            raise WorkloadError("early arrival must fall between notice and estimate")
        if c == NoticeCategory.LATE:
            delta = self.actual_arrival - self.estimated_arrival
            if not (0 < delta <= late_window):
                raise WorkloadError("late arrival must be within the late window")


@dataclass(frozen=True)
class JobSpec:
    """Immutable description of one submitted job.

    ``actual_work`` is node-seconds of compute, hidden from the scheduler; a
    job running on ``n`` nodes needs ``actual_work / n`` seconds of compute
    plus ``setup_time`` at the start of every run attempt.  For rigid and
    on-demand jobs ``actual_work`` is ``size * compute_duration``; for
    malleable jobs it is derived from the runtime at ``n_max``.
    """

    job_id: int
    submit_time: int
    kind: JobKind
    size: int  # rigid/on-demand nodes; equals n_max for malleable
    n_min: int
    n_max: int
    runtime_estimate: int  # at n_max for malleable
    actual_work: int  # node-seconds
    setup_time: int
    notice: Optional[NoticeProfile] = None

    def validate(self, capacity: Optional[int] = None) -> None:
        if not (1 <= self.n_min <= self.n_max):
            raise WorkloadError(f"job {self.job_id}: bad size bounds {self.n_min}..{self.n_max}")
        if self.setup_time < 0:
            raise WorkloadError(f"job {self.job_id}: negative setup time")
        if self.actual_work < 1:
            raise WorkloadError(f"job {self.job_id}: non-positive work")
        if self.kind == JobKind.ON_DEMAND:
            if self.notice is None:
                raise WorkloadError(f"job {self.job_id}: on-demand job needs a notice profile")
            if capacity is not None and self.size > capacity:
                raise WorkloadError(f"job {self.job_id}: on-demand size exceeds capacity")
        elif self.notice is not None:
            raise WorkloadError(f"job {self.job_id}: only on-demand jobs carry notices")

    @property
    def compute_duration(self) -> int:
        """Compute seconds when running at ``size`` nodes (rigid/on-demand)."""
        return self.actual_work // self.size

    def runtime_at(self, n: int) -> int:
        """Wall seconds for a full run at n nodes (linear speedup + setup)."""
        return int(math.ceil(self.actual_work / n)) + self.setup_time


def derive_t_single(n_max: int, runtime_at_max: int, setup_time: int) -> int:
    """Total single-node compute (node-seconds) from the runtime at n_max."""
    if runtime_at_max < setup_time:
        raise WorkloadError("runtime at n_max smaller than setup time")
    return (runtime_at_max - setup_time) * n_max
