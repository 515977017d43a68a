"""Deterministic discrete-event simulation of the hybrid-workload scheduler.

Single-threaded event loop.  All events at one timestamp are processed in a
fixed class order (supply-side before demand-side), then one scheduling pass
runs.  All times are whole seconds; identical inputs give identical logs.

Event class order at equal timestamps:
    JobFinish < CheckpointComplete < WarningExpiry < CupPrepare
    < OnDemandArrival < AdvanceNotice < ReservationTimeout < JobSubmit
"""
from __future__ import annotations

import heapq
import time as _time
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Tuple

from .cluster import ClusterLedger
from .config import ArrivalStrategy, MechanismConfig, NoticeStrategy, SystemConfig
from .jobs import JobKind, JobSpec, NoticeCategory
from .mechanisms import (
    RunPhase,
    RunningSnapshot,
    VictimAction,
    plan_paa,
    plan_spaa,
    preemption_overhead,
)
from .policy import QueueEntry, ReservedPool, easy_backfill_plan

WASTE_BUCKETS = (
    "lost_compute",
    "setup_occupancy",
    "checkpoint_writes",
    "drain_occupancy",
    "completion_overshoot",
)


class EventClass(IntEnum):
    JOB_FINISH = 0
    CHECKPOINT_COMPLETE = 1
    WARNING_EXPIRY = 2
    CUP_PREPARE = 3
    OD_ARRIVAL = 4
    ADVANCE_NOTICE = 5
    RESERVATION_TIMEOUT = 6
    JOB_SUBMIT = 7


class Phase(IntEnum):
    NOT_SUBMITTED = 0
    WAITING = 1
    ALLOCATED = 2  # setup / compute / checkpoint write (derived sub-phase)
    DRAINING = 3
    PENDING_START = 4  # committed on-demand job collecting its nodes
    FINISHED = 5


class SimulationError(RuntimeError):
    pass


@dataclass
class JobState:
    spec: JobSpec
    first_submit: int = 0
    phase: Phase = Phase.NOT_SUBMITTED
    nodes: int = 0
    attempt: int = 0
    event_version: int = 0
    # current attempt geometry
    attempt_start: int = 0
    setup_end: int = 0
    # rigid bookkeeping (compute seconds)
    saved_base: int = 0  # checkpointed progress carried from earlier attempts
    attempt_R: int = 0  # compute seconds this attempt must deliver
    tau: int = 0
    delta: int = 0
    n_ckpts: int = 0
    # malleable bookkeeping (node-seconds); seg_time is the accrual mark
    completed_base: int = 0
    seg_time: int = 0
    seg_completed: int = 0
    setup_occ: int = 0
    original_size: int = 0  # size at attempt start, cap for later expansion
    # drain
    drain_deadline: int = 0
    drain_beneficiary: int = 0
    # preparation flag: on-demand job to yield to, either at the next
    # checkpoint or at the scheduled preparation time below
    cup_kill_for: Optional[int] = None
    cup_prep_at: Optional[int] = None
    # on-demand lifecycle
    arrived: Optional[int] = None
    instant: bool = False
    pending_needed: int = 0
    pinned: bool = False
    notice_voided: bool = False
    # stats
    preempt_count: int = 0
    finish_time: Optional[int] = None
    start_times: List[int] = field(default_factory=list)

    @property
    def kind(self) -> JobKind:
        return self.spec.kind

    @property
    def job_id(self) -> int:
        return self.spec.job_id


# -- rigid attempt timeline -------------------------------------------------
# An attempt is: setup, then compute in stretches of tau seconds, each
# followed by a checkpoint write of delta seconds; no checkpoint is taken
# when tau covers the remaining compute.


def rigid_plan(R: int, tau: int, delta: int) -> Tuple[int, int]:
    """(number of checkpoints, wall seconds after setup) for R compute secs."""
    if tau < R:
        k = (R + tau - 1) // tau - 1
    else:
        k = 0
    return k, R + k * delta


def rigid_progress(st: JobState, t: int) -> int:
    """Compute seconds achieved by time t this attempt (saved or not)."""
    if t <= st.setup_end:
        return 0
    x = t - st.setup_end
    cycle = st.tau + st.delta
    m = min(x // cycle, st.n_ckpts)
    y = x - m * cycle
    if m < st.n_ckpts:
        return m * st.tau + min(y, st.tau)
    return min(m * st.tau + y, st.attempt_R)


def rigid_saved(st: JobState, t: int) -> int:
    """Checkpointed compute seconds by time t (this attempt)."""
    if t <= st.setup_end:
        return 0
    return min((t - st.setup_end) // (st.tau + st.delta), st.n_ckpts) * st.tau


def rigid_write_elapsed(st: JobState, t: int) -> int:
    """Checkpoint-write seconds elapsed by time t (this attempt)."""
    if t <= st.setup_end:
        return 0
    x = t - st.setup_end
    cycle = st.tau + st.delta
    m = min(x // cycle, st.n_ckpts)
    y = x - m * cycle
    partial = min(max(y - st.tau, 0), st.delta) if m < st.n_ckpts else 0
    return m * st.delta + partial


def rigid_phase(st: JobState, t: int) -> RunPhase:
    if t < st.setup_end:
        return RunPhase.SETUP
    x = t - st.setup_end
    cycle = st.tau + st.delta
    m = min(x // cycle, st.n_ckpts)
    y = x - m * cycle
    if m < st.n_ckpts and y >= st.tau:
        return RunPhase.CHECKPOINT_WRITE
    return RunPhase.RUNNING


def rigid_last_checkpoint_time(st: JobState, t: int) -> int:
    """Time of the last saved point (setup end if none yet)."""
    if t <= st.setup_end:
        return st.setup_end
    m = min((t - st.setup_end) // (st.tau + st.delta), st.n_ckpts)
    return st.setup_end + m * (st.tau + st.delta)


def malleable_progress(st: JobState, t: int) -> int:
    """Node-seconds of compute achieved this attempt by time t (read view)."""
    base = max(st.seg_time, st.setup_end)
    return st.seg_completed + st.nodes * max(0, t - base)


class Simulator:
    def __init__(
        self,
        workload: List[JobSpec],
        system: SystemConfig,
        mechanism: MechanismConfig,
        collect_log: bool = True,
        ledger_audit=None,
    ):
        self.specs = sorted(workload, key=lambda s: (s.submit_time, s.job_id))
        self.system = system
        self.mech = mechanism
        self.collect_log = collect_log
        self.ledger = ClusterLedger(system.capacity, audit=ledger_audit)
        self.states: Dict[int, JobState] = {}
        self.heap: List[Tuple[int, int, int, int, int]] = []  # (t, class, job, seq, ver)
        self.seq = 0
        self.log: List[dict] = []
        self.waiting: set = set()
        self.lenders: Dict[int, List[Tuple[int, str, int]]] = {}
        self.arrival_latencies_ms: List[float] = []
        self.pass_latencies_ms: List[float] = []
        # accounting (node-seconds)
        self.useful = 0
        self.waste: Dict[str, int] = {k: 0 for k in WASTE_BUCKETS}
        self.alloc_integral = 0
        self._last_t: Optional[int] = None
        self.t_first: Optional[int] = None
        self.t_last: Optional[int] = None
        self.now = 0

    # -- infrastructure -----------------------------------------------------

    def emit(self, t: int, ev: str, job: Optional[int] = None, **kw) -> None:
        if not self.collect_log:
            return
        rec = {"t": t, "ev": ev}
        if job is not None:
            rec["job"] = job
        rec.update(kw)
        self.log.append(rec)

    def push(self, t: int, cls: EventClass, job_id: int, ver: int = 0) -> None:
        heapq.heappush(self.heap, (t, int(cls), job_id, self.seq, ver))
        self.seq += 1

    # -- estimates (scheduler view; never below the actual requirement) -----

    def est_duration_for(self, st: JobState, n: int) -> int:
        """Estimated wall time of a fresh attempt of this job at n nodes."""
        spec = st.spec
        if spec.kind == JobKind.RIGID:
            est_compute = max(spec.runtime_estimate - spec.setup_time, 1) - st.saved_base
            est_compute = max(est_compute, 1)
            tau = self.system.checkpoint_interval(spec.size)
            delta = self.system.checkpoint_cost(spec.size)
            _, wall = rigid_plan(est_compute, tau, delta)
            return spec.setup_time + wall
        if spec.kind == JobKind.MALLEABLE:
            est_work = max((spec.runtime_estimate - spec.setup_time) * spec.n_max, 1)
            rem = max(est_work - st.completed_base, 1)
            return spec.setup_time + (rem + n - 1) // n
        notice = spec.notice
        est = notice.estimated_runtime if notice is not None else spec.runtime_estimate
        return self.system.on_demand_setup + est

    def est_finish(self, st: JobState, now: int) -> int:
        """Estimated release time of an allocated job (scheduler view)."""
        spec = st.spec
        if spec.kind == JobKind.RIGID:
            est_compute = max(spec.runtime_estimate - spec.setup_time, 1) - st.saved_base
            est_compute = max(est_compute, 1)
            _, wall = rigid_plan(est_compute, st.tau, st.delta)
            return max(st.setup_end + wall, now + 1)
        if spec.kind == JobKind.MALLEABLE:
            est_work = max((spec.runtime_estimate - spec.setup_time) * spec.n_max, 1)
            rem = max(est_work - st.completed_base - malleable_progress(st, now), 0)
            return max(max(now, st.setup_end) + (rem + st.nodes - 1) // st.nodes, now + 1)
        notice = spec.notice
        est = notice.estimated_runtime if notice is not None else spec.runtime_estimate
        return max(st.setup_end + est, now + 1)

    # -- attempt lifecycle --------------------------------------------------

    def start_attempt(self, st: JobState, t: int, n: int, backfilled: bool = False) -> None:
        """Begin an attempt; the allocation is already registered in the ledger."""
        spec = st.spec
        st.attempt += 1
        st.event_version += 1
        st.phase = Phase.ALLOCATED
        st.nodes = n
        st.original_size = n
        st.attempt_start = t
        setup = self.system.on_demand_setup if spec.kind == JobKind.ON_DEMAND else spec.setup_time
        st.setup_end = t + setup
        self.waiting.discard(st.job_id)
        if spec.kind == JobKind.RIGID:
            st.attempt_R = spec.compute_duration - st.saved_base
            st.tau = self.system.checkpoint_interval(spec.size)
            st.delta = self.system.checkpoint_cost(spec.size)
            st.n_ckpts, wall = rigid_plan(st.attempt_R, st.tau, st.delta)
            for k in range(1, st.n_ckpts + 1):
                self.push(
                    st.setup_end + k * (st.tau + st.delta),
                    EventClass.CHECKPOINT_COMPLETE,
                    st.job_id,
                    st.event_version,
                )
            self.push(st.setup_end + wall, EventClass.JOB_FINISH, st.job_id, st.event_version)
        elif spec.kind == JobKind.MALLEABLE:
            st.seg_time = t
            st.seg_completed = 0
            st.setup_occ = 0
            rem = spec.actual_work - st.completed_base
            self.push(st.setup_end + (rem + n - 1) // n, EventClass.JOB_FINISH, st.job_id, st.event_version)
        else:
            self.push(st.setup_end + spec.compute_duration, EventClass.JOB_FINISH, st.job_id, st.event_version)
        st.start_times.append(t)
        self.emit(t, "start", st.job_id, n=n, backfilled=backfilled)

    def _accrue_malleable(self, st: JobState, t: int) -> None:
        """Advance the malleable occupancy accounting mark to time t."""
        mark = st.seg_time
        if mark < st.setup_end:
            st.setup_occ += st.nodes * (min(t, st.setup_end) - mark)
        st.seg_completed += st.nodes * max(0, t - max(mark, st.setup_end))
        st.seg_time = t

    def _close_attempt_accounting(self, st: JobState, t: int, finished: bool) -> None:
        """Classify this attempt's node-seconds into useful/waste buckets."""
        spec = st.spec
        if spec.kind == JobKind.RIGID:
            setup_used = min(max(t - st.attempt_start, 0), st.setup_end - st.attempt_start)
            self.waste["setup_occupancy"] += spec.size * setup_used
            self.waste["checkpoint_writes"] += spec.size * rigid_write_elapsed(st, t)
            if finished:
                self.useful += spec.size * st.attempt_R
            else:
                progress = rigid_progress(st, t)
                saved = rigid_saved(st, t)
                self.useful += spec.size * saved
                self.waste["lost_compute"] += spec.size * (progress - saved)
                st.saved_base += saved
        elif spec.kind == JobKind.MALLEABLE:
            self._accrue_malleable(st, t)
            self.waste["setup_occupancy"] += st.setup_occ
            if finished:
                gained = spec.actual_work - st.completed_base
                self.useful += gained
                self.waste["completion_overshoot"] += st.seg_completed - gained
                st.completed_base = spec.actual_work
            else:
                self.useful += st.seg_completed
                st.completed_base += st.seg_completed
        else:
            if not finished:
                raise SimulationError("on-demand jobs are never preempted")
            self.waste["setup_occupancy"] += spec.size * self.system.on_demand_setup
            self.useful += spec.size * spec.compute_duration

    def _resize_malleable(self, st: JobState, t: int, new_n: int) -> None:
        """Update the progress baseline and reschedule the finish event."""
        self._accrue_malleable(st, t)
        st.nodes = new_n
        st.event_version += 1
        rem = st.spec.actual_work - st.completed_base - st.seg_completed
        finish = max(t, st.setup_end) + (rem + new_n - 1) // new_n
        self.push(finish, EventClass.JOB_FINISH, st.job_id, st.event_version)

    def preempt_now(self, st: JobState, t: int, reason: str) -> int:
        """Immediate preemption (kill); returns loose (unlinked) nodes."""
        if st.kind == JobKind.ON_DEMAND:
            raise SimulationError("attempted to preempt an on-demand job")
        self._close_attempt_accounting(st, t, finished=False)
        st.event_version += 1
        loose = self.ledger.release(st.job_id)
        st.nodes = 0
        st.phase = Phase.WAITING
        st.preempt_count += 1
        st.cup_kill_for = None
        self.waiting.add(st.job_id)
        self.emit(t, "preempt", st.job_id, action="kill", reason=reason)
        return loose

    def warn_malleable(self, st: JobState, t: int, beneficiary: int) -> None:
        """Two-minute-warning preemption: drain, then yield at expiry."""
        self._accrue_malleable(st, t)  # freezes progress at the warn
        st.event_version += 1
        st.phase = Phase.DRAINING
        st.drain_deadline = t + self.mech.warning_duration
        st.drain_beneficiary = beneficiary
        st.preempt_count += 1
        self.push(st.drain_deadline, EventClass.WARNING_EXPIRY, st.job_id, st.event_version)
        self.emit(t, "preempt", st.job_id, action="warn", beneficiary=beneficiary)

    # -- snapshots for the planners -----------------------------------------

    def _snapshot(self, st: JobState, now: int) -> RunningSnapshot:
        if st.kind == JobKind.RIGID:
            phase = rigid_phase(st, now)
            last_ckpt = rigid_last_checkpoint_time(st, now)
        else:
            phase = RunPhase.SETUP if now < st.setup_end else RunPhase.RUNNING
            last_ckpt = st.setup_end
        eligible = (
            st.kind != JobKind.ON_DEMAND
            and st.phase == Phase.ALLOCATED
            and st.cup_kill_for is None
            and st.job_id not in self.ledger.backfill_links
        )
        setup = self.system.on_demand_setup if st.kind == JobKind.ON_DEMAND else st.spec.setup_time
        return RunningSnapshot(
            job_id=st.job_id,
            kind=st.kind,
            nodes=st.nodes,
            n_min=st.spec.n_min,
            setup_time=setup,
            phase=phase,
            last_checkpoint_time=last_ckpt,
            eligible=eligible,
        )

    def running_snapshots(self, now: int) -> List[RunningSnapshot]:
        out = []
        for jid in sorted(self.ledger.allocations):
            st = self.states[jid]
            if st.phase == Phase.ALLOCATED:
                out.append(self._snapshot(st, now))
        return out

    # -- loose-node routing helpers -----------------------------------------

    def _offer_to_beneficiary(self, beneficiary: int, loose: int, t: int) -> int:
        """Give loose nodes to a reservation or pending pool; returns leftover."""
        if beneficiary in self.ledger.reservations:
            loose -= self.ledger.bank_into(beneficiary, loose)
        bst = self.states.get(beneficiary)
        if bst is not None and bst.phase == Phase.PENDING_START and loose > 0:
            used = min(loose, bst.pending_needed - self.ledger.pending.get(beneficiary, 0))
            if used > 0:
                self.ledger.pending_add(beneficiary, used)
                loose -= used
                self._maybe_start_pending(bst, t)
        return loose

    def _maybe_start_pending(self, odst: JobState, t: int) -> None:
        od = odst.job_id
        if self.ledger.pending.get(od, 0) >= odst.pending_needed:
            pool = self.ledger.pending_take(od)
            extra = pool - odst.pending_needed
            self.ledger.allocations[od] = odst.pending_needed
            self.start_attempt(odst, t, odst.pending_needed)
            self.ledger.route_released(extra)

    def _record_lender(self, od: int, job_id: int, lend_type: str, amount: int) -> None:
        self.lenders.setdefault(od, []).append((job_id, lend_type, amount))

    # -- event handlers -----------------------------------------------------

    def on_submit(self, st: JobState, t: int) -> None:
        st.phase = Phase.WAITING
        st.first_submit = t
        self.waiting.add(st.job_id)
        self.emit(t, "submit", st.job_id)

    def on_notice(self, st: JobState, t: int) -> None:
        notice = st.spec.notice
        od = st.job_id
        self.emit(t, "notice", od, category=notice.category.value)
        target = notice.estimated_size
        expiry = notice.estimated_arrival + self.system.reservation_grace
        self.ledger.reserve_create(od, target, notice_time=t, expiry=expiry)
        self.ledger.reserve_available(od, target)
        self.push(expiry, EventClass.RESERVATION_TIMEOUT, od)
        if self.mech.notice_strategy != NoticeStrategy.CUP:
            return
        # count nodes expected back before the predicted arrival, then
        # prepare preemptions for the remaining deficit
        res = self.ledger.reservations[od]
        snaps = self.running_snapshots(t)
        expected = sum(
            s.nodes for s in snaps if self.est_finish(self.states[s.job_id], t) <= notice.estimated_arrival
        )
        deficit = target - res.held - expected
        if deficit <= 0:
            return
        candidates = [
            s
            for s in snaps
            if s.eligible and self.est_finish(self.states[s.job_id], t) > notice.estimated_arrival
        ]
        candidates.sort(key=lambda s: (preemption_overhead(s, t, self.mech.warning_duration), s.job_id))
        for snap in candidates:
            if deficit <= 0:
                break
            vst = self.states[snap.job_id]
            if snap.kind == JobKind.RIGID and self.mech.cup_checkpoint_aligned:
                next_ckpt = self._next_checkpoint_time(vst, t)
                if next_ckpt is not None and next_ckpt <= notice.estimated_arrival:
                    vst.cup_kill_for = od
                    deficit -= snap.nodes
                    self.emit(t, "cup_flag", vst.job_id, at=next_ckpt, beneficiary=od)
                    continue
            # preparation is timed so the nodes come loose exactly at the
            # predicted arrival: kills then, warnings one drain earlier; an
            # early arrival cancels the plan before it executes
            if snap.kind == JobKind.RIGID:
                prep_at = max(t, notice.estimated_arrival)
            else:
                prep_at = max(t, notice.estimated_arrival - self.mech.warning_duration)
            vst.cup_kill_for = od
            vst.cup_prep_at = prep_at
            self.emit(t, "cup_flag", vst.job_id, at=prep_at, beneficiary=od)
            deficit -= snap.nodes
            if prep_at == t:
                self.on_cup_prepare(vst, t)
            else:
                self.push(prep_at, EventClass.CUP_PREPARE, vst.job_id, vst.event_version)

    def on_cup_prepare(self, st: JobState, t: int) -> None:
        od = st.cup_kill_for
        st.cup_prep_at = None
        nodes = st.nodes
        if st.kind == JobKind.MALLEABLE and t >= st.setup_end:
            st.cup_kill_for = None
            self.warn_malleable(st, t, beneficiary=od)
            self._record_lender(od, st.job_id, "preempt", nodes)
        else:
            loose = self.preempt_now(st, t, reason="cup_prepare")
            self._record_lender(od, st.job_id, "preempt", nodes)
            loose -= self.ledger.bank_into(od, loose)
            self.ledger.route_released(loose)

    def _next_checkpoint_time(self, st: JobState, t: int) -> Optional[int]:
        if st.kind != JobKind.RIGID or st.phase != Phase.ALLOCATED or st.n_ckpts == 0:
            return None
        cycle = st.tau + st.delta
        for k in range(1, st.n_ckpts + 1):
            c = st.setup_end + k * cycle
            if c > t:
                return c
        return None

    def on_checkpoint_complete(self, st: JobState, t: int) -> None:
        self.emit(t, "checkpoint", st.job_id, saved=st.saved_base + rigid_saved(st, t))
        if st.cup_kill_for is not None:
            od = st.cup_kill_for
            nodes = st.nodes
            loose = self.preempt_now(st, t, reason="cup_checkpoint")
            self._record_lender(od, st.job_id, "preempt", nodes)
            loose = self._offer_to_beneficiary(od, loose, t)
            self.ledger.route_released(loose)

    def on_warning_expiry(self, st: JobState, t: int) -> None:
        beneficiary = st.drain_beneficiary
        self.emit(t, "warning_expiry", st.job_id)
        # setup and frozen compute are accrued; the drain itself is waste
        self.waste["setup_occupancy"] += st.setup_occ
        self.useful += st.seg_completed
        self.waste["drain_occupancy"] += st.nodes * self.mech.warning_duration
        st.completed_base += st.seg_completed
        st.event_version += 1
        loose = self.ledger.release(st.job_id)
        st.nodes = 0
        st.phase = Phase.WAITING
        self.waiting.add(st.job_id)
        loose = self._offer_to_beneficiary(beneficiary, loose, t)
        self.ledger.route_released(loose)

    def on_arrival(self, st: JobState, t: int) -> None:
        wall0 = _time.perf_counter()
        od = st.job_id
        st.arrived = t
        st.first_submit = t
        demand = st.spec.size
        # cancel any still-unexecuted preparation kills for this job
        for other in self.states.values():
            if other.cup_kill_for == od:
                other.cup_kill_for = None
                other.cup_prep_at = None
        pool = 0
        if od in self.ledger.reservations:
            # backfilled jobs are evicted only when the banked idle nodes
            # plus free do not cover the demand; otherwise they keep running
            # as ordinary allocations
            if self.ledger.idle_reserved(od) + self.ledger.free < demand:
                for jid in self.ledger.backfilled_on(od):
                    vict = self.states[jid]
                    nodes = vict.nodes
                    pool += self.preempt_now(vict, t, reason="evict_backfilled")
                    self._record_lender(od, jid, "preempt", nodes)
            pool += self.ledger.remove_reservation(od)
        avail = pool + self.ledger.free
        instant = False
        if avail >= demand:
            instant = True
            from_free = max(demand - pool, 0)
            self.ledger.take_free(from_free)
            leftover = pool - (demand - from_free)
            self.ledger.allocations[od] = demand
            self.start_attempt(st, t, demand)
            self.ledger.route_released(leftover)
        else:
            deficit = demand - avail
            snaps = self.running_snapshots(t)
            if self.mech.arrival_strategy == ArrivalStrategy.SPAA:
                plan = plan_spaa(deficit, snaps, t, self.mech.warning_duration)
            else:
                plan = plan_paa(deficit, snaps, t, self.mech.warning_duration)
            if plan.feasible:
                instant = True
                free_all = self.ledger.free
                self.ledger.take_free(free_all)
                pool += free_all
                for jid, new_size in plan.shrinks:
                    vst = self.states[jid]
                    old = vst.nodes
                    pool += self.ledger.resize(jid, new_size)
                    self._resize_malleable(vst, t, new_size)
                    self._record_lender(od, jid, "shrink", old - new_size)
                    self.emit(t, "shrink", jid, new=new_size)
                for jid, action in plan.victims:
                    vst = self.states[jid]
                    nodes = vst.nodes
                    if action == VictimAction.KILL:
                        pool += self.preempt_now(vst, t, reason="arrival_preempt")
                    else:
                        self.warn_malleable(vst, t, beneficiary=od)
                    self._record_lender(od, jid, "preempt", nodes)
                if pool >= demand:
                    self.ledger.allocations[od] = demand
                    self.start_attempt(st, t, demand)
                    self.ledger.route_released(pool - demand)
                else:
                    st.phase = Phase.PENDING_START
                    st.pending_needed = demand
                    self.ledger.pending_add(od, pool)
            else:
                # cannot be satisfied even by preempting everything eligible:
                # pin to the queue front, no further preemption on its behalf
                st.phase = Phase.WAITING
                st.pinned = True
                self.waiting.add(od)
                self.ledger.route_released(pool)
        st.instant = instant
        self.emit(t, "arrival", od, instant=instant)
        self.arrival_latencies_ms.append((_time.perf_counter() - wall0) * 1e3)

    def on_timeout(self, st: JobState, t: int) -> None:
        od = st.job_id
        if st.arrived is not None or od not in self.ledger.reservations:
            return
        if self.ledger.reservations[od].expiry != t:
            return
        loose = self.ledger.remove_reservation(od)
        st.notice_voided = True
        self.ledger.route_released(loose)
        self.emit(t, "timeout", od, released=loose)

    def on_finish(self, st: JobState, t: int) -> None:
        self._close_attempt_accounting(st, t, finished=True)
        st.event_version += 1
        loose = self.ledger.release(st.job_id)
        st.phase = Phase.FINISHED
        st.finish_time = t
        st.nodes = 0
        st.cup_kill_for = None
        self.emit(t, "finish", st.job_id)
        if st.kind == JobKind.ON_DEMAND:
            loose = self._return_to_lenders(st.job_id, loose, t)
        self.ledger.route_released(loose)

    def _return_to_lenders(self, od: int, pool: int, t: int) -> int:
        """Offer a finished on-demand job's nodes back to whoever yielded them."""
        for jid, lend_type, amount in sorted(self.lenders.get(od, [])):
            if pool == 0:
                break
            lst = self.states[jid]
            if lend_type == "shrink":
                if lst.phase == Phase.ALLOCATED and lst.nodes < lst.original_size:
                    grow = min(amount, pool, lst.original_size - lst.nodes)
                    if grow > 0:
                        self.ledger.allocations[jid] += grow
                        self._resize_malleable(lst, t, lst.nodes + grow)
                        pool -= grow
                        self.emit(t, "expand", jid, new=lst.nodes)
            elif lst.phase == Phase.WAITING:
                earmark = min(amount, pool)
                if lst.kind == JobKind.MALLEABLE:
                    total = earmark + self.ledger.free
                    if total >= lst.spec.n_min:
                        n = min(lst.spec.n_max, total)
                        from_pool = min(earmark, n)
                        self.ledger.take_free(n - from_pool)
                        self.ledger.allocations[jid] = n
                        pool -= from_pool
                        self.start_attempt(lst, t, n)
                else:
                    need = lst.spec.size
                    if earmark + self.ledger.free >= need:
                        from_pool = min(earmark, need)
                        self.ledger.take_free(need - from_pool)
                        self.ledger.allocations[jid] = need
                        pool -= from_pool
                        self.start_attempt(lst, t, need)
        return pool

    # -- scheduling pass ----------------------------------------------------

    def schedule_pass(self, t: int) -> None:
        if not self.waiting:
            return
        wall0 = _time.perf_counter()
        entries = []
        for jid in sorted(self.waiting):
            st = self.states[jid]
            spec = st.spec
            if spec.kind == JobKind.MALLEABLE:
                need_min, need_max = spec.n_min, spec.n_max
            else:
                need_min = need_max = spec.size

            def dur(n, _st=st):
                return self.est_duration_for(_st, n)

            entries.append(
                QueueEntry(
                    job_id=jid,
                    first_submit=st.first_submit,
                    need_min=need_min,
                    need_max=need_max,
                    duration_for=dur,
                    pinned=st.pinned,
                    pin_time=st.arrived or 0,
                    reserved_ok=spec.kind != JobKind.ON_DEMAND,
                )
            )
        releases = []
        for jid in sorted(self.ledger.allocations):
            st = self.states[jid]
            if st.phase == Phase.ALLOCATED:
                releases.append((self.est_finish(st, t), st.nodes))
        pools = []
        for res in sorted(self.ledger.reservations.values(), key=lambda r: (r.notice_time, r.owner)):
            idle = self.ledger.idle_reserved(res.owner)
            if idle > 0:
                need_time = self.states[res.owner].spec.notice.estimated_arrival
                pools.append(ReservedPool(res.owner, idle, need_time))
        decisions, _reservation = easy_backfill_plan(
            t, self.ledger.free, pools, releases, entries
        )
        for d in decisions:
            self.ledger.allocate_split(d.job_id, d.from_free, d.reserved_parts)
            st = self.states[d.job_id]
            st.pinned = False
            self.start_attempt(st, t, d.nodes, backfilled=d.backfilled)
            if st.kind == JobKind.ON_DEMAND and self.mech.is_baseline and t == st.first_submit:
                st.instant = True
        self.pass_latencies_ms.append((_time.perf_counter() - wall0) * 1e3)

    # -- main loop ----------------------------------------------------------

    def _valid(self, cls: int, job_id: int, ver: int, t: int) -> bool:
        st = self.states[job_id]
        if cls in (EventClass.JOB_FINISH, EventClass.CHECKPOINT_COMPLETE):
            return st.event_version == ver and st.phase == Phase.ALLOCATED
        if cls == EventClass.WARNING_EXPIRY:
            return st.event_version == ver and st.phase == Phase.DRAINING and st.drain_deadline == t
        if cls == EventClass.CUP_PREPARE:
            return (
                st.event_version == ver
                and st.phase == Phase.ALLOCATED
                and st.cup_kill_for is not None
                and st.cup_prep_at == t
            )
        if cls == EventClass.RESERVATION_TIMEOUT:
            res = self.ledger.reservations.get(st.job_id)
            return st.arrived is None and res is not None and res.expiry == t
        return True

    def run(self) -> "Simulator":
        for spec in self.specs:
            st = JobState(spec=spec, first_submit=spec.submit_time)
            self.states[spec.job_id] = st
            if spec.kind == JobKind.ON_DEMAND and not self.mech.is_baseline:
                notice = spec.notice
                self.push(notice.actual_arrival, EventClass.OD_ARRIVAL, spec.job_id)
                if (
                    notice.category != NoticeCategory.NO_NOTICE
                    and self.mech.notice_strategy in (NoticeStrategy.CUA, NoticeStrategy.CUP)
                ):
                    self.push(notice.notice_time, EventClass.ADVANCE_NOTICE, spec.job_id)
            elif spec.kind == JobKind.ON_DEMAND:
                self.push(spec.notice.actual_arrival, EventClass.JOB_SUBMIT, spec.job_id)
            else:
                self.push(spec.submit_time, EventClass.JOB_SUBMIT, spec.job_id)

        while self.heap:
            t = self.heap[0][0]
            busy = sum(self.ledger.allocations.values())
            if self._last_t is not None:
                if t < self._last_t:
                    raise SimulationError("clock moved backwards")
                self.alloc_integral += busy * (t - self._last_t)
            self._last_t = t
            self.now = t
            self.ledger.set_time(t)
            any_valid = False
            while self.heap and self.heap[0][0] == t:
                _, cls, job_id, _, ver = heapq.heappop(self.heap)
                if not self._valid(cls, job_id, ver, t):
                    continue
                any_valid = True
                st = self.states[job_id]
                if cls == EventClass.JOB_FINISH:
                    self.on_finish(st, t)
                elif cls == EventClass.CHECKPOINT_COMPLETE:
                    self.on_checkpoint_complete(st, t)
                elif cls == EventClass.WARNING_EXPIRY:
                    self.on_warning_expiry(st, t)
                elif cls == EventClass.CUP_PREPARE:
                    self.on_cup_prepare(st, t)
                elif cls == EventClass.OD_ARRIVAL:
                    self.on_arrival(st, t)
                elif cls == EventClass.ADVANCE_NOTICE:
                    self.on_notice(st, t)
                elif cls == EventClass.RESERVATION_TIMEOUT:
                    self.on_timeout(st, t)
                else:
                    self.on_submit(st, t)
            # stale-only timestamps (all events cancelled) trigger no pass,
            # keeping decision times a pure function of the visible history
            if any_valid:
                self.schedule_pass(t)
                if self.t_first is None:
                    self.t_first = t
                self.t_last = t
            self.ledger.check()

        unfinished = [jid for jid, st in self.states.items() if st.phase != Phase.FINISHED]
        if unfinished:
            raise SimulationError(f"run drained with unfinished jobs: {sorted(unfinished)[:10]}")
        return self
