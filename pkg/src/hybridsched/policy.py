"""FCFS ordering with EASY backfilling over node counts.

Pure decision functions: the engine feeds snapshots (queue entries, free
counts, reserved-idle pools, future releases) and applies the returned start
decisions.  Stalled on-demand jobs are pinned to the front of the queue;
preempted jobs keep their first submission time and therefore re-enter near
the front.

Idle nodes banked inside an on-demand reservation may host waiting jobs, but
only jobs whose runtime estimate ends by the reservation's expected arrival:
EASY never knowingly delays an existing reservation.  Such jobs are flagged
backfilled-on-reserved and are evicted should the owner arrive early.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

INFINITY = float("inf")


@dataclass
class QueueEntry:
    """A waiting job as seen by the policy."""

    job_id: int
    first_submit: int
    need_min: int  # n_min for malleable, size otherwise
    need_max: int  # n_max for malleable, size otherwise
    duration_for: Callable[[int], int]  # estimated wall time if started at n nodes
    pinned: bool = False  # stalled on-demand job, front of the queue
    pin_time: int = 0  # arrival time, orders stalled on-demand jobs
    reserved_ok: bool = True  # may start on idle reserved nodes (not for
    # on-demand jobs, which must never become evictable backfill)


@dataclass
class ReservedPool:
    """Idle nodes banked for an on-demand reservation, usable until its
    expected arrival.  Pools are offered in banking priority order."""

    owner: int
    idle: int
    need_time: float  # estimated arrival; occupancy must clear by then


@dataclass
class StartDecision:
    job_id: int
    nodes: int
    backfilled: bool = False
    from_free: int = 0
    reserved_parts: List[Tuple[int, int]] = field(default_factory=list)


def fcfs_order(entries: List[QueueEntry]) -> List[QueueEntry]:
    """Stalled on-demand jobs first (by arrival), then first-submit order."""
    return sorted(
        entries,
        key=lambda e: (0, e.pin_time, e.job_id) if e.pinned else (1, e.first_submit, e.job_id),
    )


def head_start_plan(need: int, free: int, releases: List[Tuple[int, int]]) -> Tuple[float, int]:
    """Earliest time the queue head can start, by estimated releases.

    ``releases`` are (estimated release time, nodes) of running jobs.  Nodes
    idle inside on-demand reservations are deliberately not counted; they are
    promised elsewhere.  Returns (start time, nodes available then), where
    availability includes every release up to and including that time.
    """
    avail = free
    if need <= avail:
        return (-INFINITY, avail)
    start: float = INFINITY
    for t, n in sorted(releases):
        if avail >= need and t > start:
            break
        avail += n
        if avail >= need and start == INFINITY:
            start = t
    return start, avail


def easy_backfill_plan(
    now: int,
    free: int,
    pools: List[ReservedPool],
    releases: List[Tuple[int, int]],
    entries: List[QueueEntry],
) -> Tuple[List[StartDecision], Optional[Tuple[int, float]]]:
    """One scheduling pass: FCFS starts, then EASY backfill behind the head.

    Returns the decisions and the head reservation as (job_id, start time),
    if any.

    A backfill candidate must fit the idle nodes open to it and either finish
    by the head's reserved start (by its own estimate) or restrict itself to
    nodes the head will not need then.  Reserved-idle pools are open only to
    entries estimated to finish by the pool's need time.
    """
    decisions: List[StartDecision] = []
    releases = list(releases)
    order = fcfs_order(entries)
    free_now = free
    pools = [ReservedPool(p.owner, p.idle, p.need_time) for p in pools]

    def fit(entry: QueueEntry, cap: int) -> Optional[int]:
        """Largest start size ≤ cap from the idle nodes open to this entry."""
        hi = free_now
        if entry.reserved_ok:
            hi += sum(p.idle for p in pools)
        hi = min(cap, hi)
        for n in range(hi, entry.need_min - 1, -1):
            avail = free_now
            if entry.reserved_ok:
                d = entry.duration_for(n)
                avail += sum(p.idle for p in pools if now + d <= p.need_time)
            if n <= avail:
                return n
        return None

    def consume(entry: QueueEntry, n: int, backfilled: bool) -> None:
        nonlocal free_now
        taken_free = min(free_now, n)
        free_now -= taken_free
        rest = n - taken_free
        parts: List[Tuple[int, int]] = []
        if rest > 0:
            d = entry.duration_for(n)
            for p in pools:
                if now + d > p.need_time:
                    continue
                take = min(p.idle, rest)
                if take > 0:
                    p.idle -= take
                    parts.append((p.owner, take))
                    rest -= take
                if rest == 0:
                    break
        if rest > 0:
            raise AssertionError("start size exceeded the open idle nodes")
        releases.append((now + entry.duration_for(n), n))
        decisions.append(StartDecision(entry.job_id, n, backfilled, taken_free, parts))

    head: Optional[QueueEntry] = None
    head_idx = 0
    for i, entry in enumerate(order):
        n = fit(entry, entry.need_max)
        if n is None:
            head = entry
            head_idx = i
            break
        consume(entry, n, backfilled=False)

    if head is None:
        return decisions, None

    t_head, avail_at_head = head_start_plan(head.need_min, free_now, releases)
    extra = avail_at_head - head.need_min  # nodes the head will not need at t_head
    reservation = (head.job_id, t_head)

    for entry in order[head_idx + 1 :]:
        n = fit(entry, entry.need_max)
        if n is None:
            continue
        if now + entry.duration_for(n) <= t_head:
            pass  # finishes before the head needs its nodes
        elif n <= extra:
            extra -= n
        else:
            # a malleable candidate may still fit on the spare nodes alone
            n_alt = fit(entry, min(n, extra)) if extra >= entry.need_min else None
            if n_alt is not None:
                n = n_alt
                extra -= n
            else:
                continue
        consume(entry, n, backfilled=True)
    return decisions, reservation
