"""Per-second reference simulation for differential testing.

A brute-force time-stepping re-implementation of the scheduler semantics:
every second, conditions are checked in the same order the event engine uses
(finish, checkpoint, drain expiry, arrival, notice, timeout, submit, pass)
and occupancy is accrued one second at a time instead of analytically.  It is
deliberately slow and only accepts tiny instances; its output (log, counters)
must match the event engine exactly.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .config import ArrivalStrategy, MechanismConfig, NoticeStrategy, SystemConfig
from .jobs import JobKind, JobSpec, NoticeCategory

MAX_CAPACITY = 16
MAX_JOBS = 16
MAX_SECONDS = 500_000

_WASTE = ("lost_compute", "setup_occupancy", "checkpoint_writes", "drain_occupancy", "completion_overshoot")


class OracleError(RuntimeError):
    pass


def _wall_after_setup(R: int, tau: int, delta: int) -> int:
    """Compute wall seconds for R compute seconds with periodic checkpoints."""
    if tau < R:
        k = -(-R // tau) - 1
    else:
        k = 0
    return R + k * delta


class PerSecondOracle:
    def __init__(self, workload: List[JobSpec], system: SystemConfig, mechanism: MechanismConfig):
        if system.capacity > MAX_CAPACITY:
            raise OracleError("oracle only accepts tiny systems")
        if len(workload) > MAX_JOBS:
            raise OracleError("oracle only accepts tiny workloads")
        self.specs = {s.job_id: s for s in workload}
        self.system = system
        self.mech = mechanism
        self.log: List[dict] = []
        self.useful = 0
        self.waste = {k: 0 for k in _WASTE}
        self.alloc_integral = 0
        self.free = system.capacity
        # job runtime state, all plain dicts
        self.j: Dict[int, dict] = {}
        # reservations: owner -> {target, held, notice_time, expiry}
        self.res: Dict[int, dict] = {}
        # backfilled job -> {owner: nodes}
        self.links: Dict[int, Dict[int, int]] = {}
        self.pending: Dict[int, int] = {}
        self.lenders: Dict[int, List[Tuple[int, str, int]]] = {}
        self.t_first: Optional[int] = None
        self.t_last: Optional[int] = None

    # -- helpers ------------------------------------------------------------

    def emit(self, t: int, ev: str, job: Optional[int] = None, **kw) -> None:
        rec = {"t": t, "ev": ev}
        if job is not None:
            rec["job"] = job
        rec.update(kw)
        self.log.append(rec)

    def occupied(self, owner: int) -> int:
        return sum(l.get(owner, 0) for l in self.links.values())

    def idle_reserved(self, owner: int) -> int:
        return self.res[owner]["held"] - self.occupied(owner)

    def idle_reserved_total(self) -> int:
        return sum(self.idle_reserved(o) for o in self.res)

    def bank_into(self, owner: int, n: int) -> int:
        r = self.res[owner]
        take = min(n, r["target"] - r["held"])
        r["held"] += take
        return take

    def route_released(self, n: int) -> None:
        unfilled = [r for r in self.res.values() if r["held"] < r["target"]]
        unfilled.sort(key=lambda r: (r["notice_time"], r["owner"]))
        for r in unfilled:
            if n == 0:
                break
            take = min(n, r["target"] - r["held"])
            r["held"] += take
            n -= take
        self.free += n

    def offer_to_beneficiary(self, ben: int, loose: int, t: int) -> int:
        if ben in self.res:
            loose -= self.bank_into(ben, loose)
        b = self.j.get(ben)
        if b is not None and b["status"] == "pending" and loose > 0:
            used = min(loose, b["pending_needed"] - self.pending.get(ben, 0))
            if used > 0:
                self.pending[ben] = self.pending.get(ben, 0) + used
                loose -= used
                self.maybe_start_pending(ben, t)
        return loose

    def maybe_start_pending(self, od: int, t: int) -> None:
        b = self.j[od]
        if self.pending.get(od, 0) >= b["pending_needed"]:
            pool = self.pending.pop(od)
            extra = pool - b["pending_needed"]
            self.begin_attempt(od, t, b["pending_needed"])
            self.route_released(extra)

    def release_alloc(self, jid: int) -> int:
        """Drop the allocation; linked nodes fall back idle to reservations."""
        st = self.j[jid]
        n = st["nodes"]
        linked = self.links.pop(jid, {})
        st["nodes"] = 0
        return n - sum(linked.values())

    # -- estimates ----------------------------------------------------------

    def est_attempt_duration(self, jid: int, n: int) -> int:
        spec = self.specs[jid]
        st = self.j[jid]
        if spec.kind == JobKind.RIGID:
            est = max(spec.runtime_estimate - spec.setup_time, 1) - st["saved_base"]
            est = max(est, 1)
            tau = self.system.checkpoint_interval(spec.size)
            delta = self.system.checkpoint_cost(spec.size)
            return spec.setup_time + _wall_after_setup(est, tau, delta)
        if spec.kind == JobKind.MALLEABLE:
            est_work = max((spec.runtime_estimate - spec.setup_time) * spec.n_max, 1)
            rem = max(est_work - st["completed_base"], 1)
            return spec.setup_time + -(-rem // n)
        notice = spec.notice
        est = notice.estimated_runtime if notice is not None else spec.runtime_estimate
        return self.system.on_demand_setup + est

    def est_finish(self, jid: int, now: int) -> int:
        spec = self.specs[jid]
        st = self.j[jid]
        if spec.kind == JobKind.RIGID:
            est = max(spec.runtime_estimate - spec.setup_time, 1) - st["saved_base"]
            est = max(est, 1)
            return max(st["setup_end"] + _wall_after_setup(est, st["tau"], st["delta"]), now + 1)
        if spec.kind == JobKind.MALLEABLE:
            est_work = max((spec.runtime_estimate - spec.setup_time) * spec.n_max, 1)
            rem = max(est_work - st["completed_base"] - st["done"], 0)
            return max(max(now, st["setup_end"]) + -(-rem // st["nodes"]), now + 1)
        notice = spec.notice
        est = notice.estimated_runtime if notice is not None else spec.runtime_estimate
        return max(st["setup_end"] + est, now + 1)

    # -- attempts -----------------------------------------------------------

    def begin_attempt(self, jid: int, t: int, n: int, backfilled: bool = False) -> None:
        spec = self.specs[jid]
        st = self.j[jid]
        setup = self.system.on_demand_setup if spec.kind == JobKind.ON_DEMAND else spec.setup_time
        st.update(
            status="alloc",
            nodes=n,
            original_size=n,
            attempt_start=t,
            setup_end=t + setup,
            setup_left=setup,
            setup_occ=0,
        )
        if spec.kind == JobKind.RIGID:
            st["tau"] = self.system.checkpoint_interval(spec.size)
            st["delta"] = self.system.checkpoint_cost(spec.size)
            st["rem"] = spec.compute_duration - st["saved_base"]
            st["since_save"] = 0
            st["saved_attempt"] = 0
            st["writing"] = False
            st["write_left"] = 0
            st["write_secs"] = 0
        elif spec.kind == JobKind.MALLEABLE:
            st["target"] = spec.actual_work - st["completed_base"]
            st["done"] = 0
        else:
            st["rem"] = spec.compute_duration
        st["starts"].append(t)
        self.emit(t, "start", jid, n=n, backfilled=backfilled)

    def kill_now(self, jid: int, t: int, reason: str) -> int:
        spec = self.specs[jid]
        st = self.j[jid]
        if spec.kind == JobKind.RIGID:
            self.waste["setup_occupancy"] += spec.size * (spec.setup_time - st["setup_left"])
            self.waste["checkpoint_writes"] += spec.size * st["write_secs"]
            self.useful += spec.size * st["saved_attempt"]
            self.waste["lost_compute"] += spec.size * st["since_save"]
            st["saved_base"] += st["saved_attempt"]
        else:
            self.waste["setup_occupancy"] += st["setup_occ"]
            self.useful += st["done"]
            st["completed_base"] += st["done"]
        loose = self.release_alloc(jid)
        st["status"] = "waiting"
        st["preempts"] += 1
        st["cup_kill_for"] = None
        self.emit(t, "preempt", jid, action="kill", reason=reason)
        return loose

    def warn_now(self, jid: int, t: int, beneficiary: int) -> None:
        st = self.j[jid]
        st["status"] = "drain"
        st["drain_left"] = self.mech.warning_duration
        st["beneficiary"] = beneficiary
        st["preempts"] += 1
        self.emit(t, "preempt", jid, action="warn", beneficiary=beneficiary)

    # -- arrival planning (re-derived, not imported) ------------------------

    def _overhead(self, jid: int, now: int) -> int:
        spec = self.specs[jid]
        st = self.j[jid]
        if st["setup_left"] > 0:
            return st["nodes"] * spec.setup_time
        if spec.kind == JobKind.RIGID:
            last_save = now - st["since_save"] - (st["delta"] - st["write_left"] if st["writing"] else 0)
            return st["nodes"] * ((now - last_save) + spec.setup_time)
        return st["nodes"] * (self.mech.warning_duration + spec.setup_time)

    def _eligible_running(self) -> List[int]:
        out = []
        for jid in sorted(self.j):
            st = self.j[jid]
            if (
                st["status"] == "alloc"
                and self.specs[jid].kind != JobKind.ON_DEMAND
                and st["cup_kill_for"] is None
                and jid not in self.links
            ):
                out.append(jid)
        return out

    def _paa_plan(self, deficit: int, now: int):
        victims = []
        got = 0
        cands = sorted(self._eligible_running(), key=lambda j: (self._overhead(j, now), j))
        for jid in cands:
            if got >= deficit:
                break
            st = self.j[jid]
            warn = self.specs[jid].kind == JobKind.MALLEABLE and st["setup_left"] == 0
            victims.append((jid, "warn" if warn else "kill"))
            got += st["nodes"]
        if got < deficit:
            return None
        return victims

    def _spaa_plan(self, deficit: int, now: int):
        """Returns (shrinks, victims) or None if infeasible."""
        mall = [
            j
            for j in self._eligible_running()
            if self.specs[j].kind == JobKind.MALLEABLE
        ]
        supply = sum(self.j[j]["nodes"] - self.specs[j].n_min for j in mall)
        if supply < deficit:
            v = self._paa_plan(deficit, now)
            return None if v is None else ([], v)
        # even shrink by largest remainder over slack, ties on ascending id
        slack = [self.j[j]["nodes"] - self.specs[j].n_min for j in mall]
        total = sum(slack)
        gives = [deficit * w // total for w in slack]
        rems = [deficit * w % total for w in slack]
        order = sorted(range(len(mall)), key=lambda i: (-rems[i], mall[i]))
        for i in order[: deficit - sum(gives)]:
            gives[i] += 1
        shrinks = [
            (j, self.j[j]["nodes"] - g) for j, g in zip(mall, gives) if g > 0
        ]
        return (shrinks, [])

    def resize_malleable(self, jid: int, t: int, new_n: int) -> int:
        """Change size; returns freed unlinked nodes (shrink only here)."""
        st = self.j[jid]
        freed = st["nodes"] - new_n
        loose = freed
        links = self.links.get(jid)
        if links and freed > 0:
            for owner in sorted(links):
                take = min(links[owner], loose)
                links[owner] -= take
                loose -= take
                if links[owner] == 0:
                    del links[owner]
                if loose == 0:
                    break
            if not links:
                del self.links[jid]
        st["nodes"] = new_n
        return max(loose, 0)

    # -- per-second condition handlers --------------------------------------

    def finish_job(self, jid: int, t: int) -> None:
        spec = self.specs[jid]
        st = self.j[jid]
        if spec.kind == JobKind.RIGID:
            self.waste["setup_occupancy"] += spec.size * spec.setup_time
            self.waste["checkpoint_writes"] += spec.size * st["write_secs"]
            self.useful += spec.size * (spec.compute_duration - st["saved_base"])
        elif spec.kind == JobKind.MALLEABLE:
            self.waste["setup_occupancy"] += st["setup_occ"]
            self.useful += st["target"]
            self.waste["completion_overshoot"] += st["done"] - st["target"]
            st["completed_base"] = spec.actual_work
        else:
            self.waste["setup_occupancy"] += spec.size * self.system.on_demand_setup
            self.useful += spec.size * spec.compute_duration
        loose = self.release_alloc(jid)
        st["status"] = "done"
        st["finish"] = t
        st["cup_kill_for"] = None
        self.emit(t, "finish", jid)
        if spec.kind == JobKind.ON_DEMAND:
            loose = self.return_to_lenders(jid, loose, t)
        self.route_released(loose)

    def return_to_lenders(self, od: int, pool: int, t: int) -> int:
        for jid, lend_type, amount in sorted(self.lenders.get(od, [])):
            if pool == 0:
                break
            st = self.j[jid]
            spec = self.specs[jid]
            if lend_type == "shrink":
                if st["status"] == "alloc" and st["nodes"] < st["original_size"]:
                    grow = min(amount, pool, st["original_size"] - st["nodes"])
                    if grow > 0:
                        st["nodes"] += grow
                        pool -= grow
                        self.emit(t, "expand", jid, new=st["nodes"])
            elif st["status"] == "waiting":
                earmark = min(amount, pool)
                if spec.kind == JobKind.MALLEABLE:
                    total = earmark + self.free
                    if total >= spec.n_min:
                        n = min(spec.n_max, total)
                        from_pool = min(earmark, n)
                        self.free -= n - from_pool
                        pool -= from_pool
                        self.begin_attempt(jid, t, n)
                else:
                    need = spec.size
                    if earmark + self.free >= need:
                        from_pool = min(earmark, need)
                        self.free -= need - from_pool
                        pool -= from_pool
                        self.begin_attempt(jid, t, need)
        return pool

    def ckpt_complete(self, jid: int, t: int) -> None:
        st = self.j[jid]
        st["writing"] = False
        st["saved_attempt"] += st["tau"]
        st["since_save"] = 0
        self.emit(t, "checkpoint", jid, saved=st["saved_base"] + st["saved_attempt"])
        if st["cup_kill_for"] is not None:
            od = st["cup_kill_for"]
            nodes = st["nodes"]
            loose = self.kill_now(jid, t, reason="cup_checkpoint")
            self.lenders.setdefault(od, []).append((jid, "preempt", nodes))
            loose = self.offer_to_beneficiary(od, loose, t)
            self.route_released(loose)

    def drain_expire(self, jid: int, t: int) -> None:
        spec = self.specs[jid]
        st = self.j[jid]
        ben = st["beneficiary"]
        self.emit(t, "warning_expiry", jid)
        self.waste["setup_occupancy"] += st["setup_occ"]
        self.useful += st["done"]
        self.waste["drain_occupancy"] += st["nodes"] * self.mech.warning_duration
        st["completed_base"] += st["done"]
        loose = self.release_alloc(jid)
        st["status"] = "waiting"
        loose = self.offer_to_beneficiary(ben, loose, t)
        self.route_released(loose)

    def handle_notice(self, od: int, t: int) -> None:
        spec = self.specs[od]
        notice = spec.notice
        self.emit(t, "notice", od, category=notice.category.value)
        target = notice.estimated_size
        expiry = notice.estimated_arrival + self.system.reservation_grace
        take = min(self.free, target)
        self.free -= take
        self.res[od] = {
            "owner": od,
            "target": target,
            "held": take,
            "notice_time": t,
            "expiry": expiry,
        }
        self.j[od]["timeout_at"] = expiry
        if self.mech.notice_strategy != NoticeStrategy.CUP:
            return
        running = [
            j for j in sorted(self.j) if self.j[j]["status"] == "alloc"
        ]
        expected = sum(
            self.j[j]["nodes"] for j in running if self.est_finish(j, t) <= notice.estimated_arrival
        )
        deficit = target - take - expected
        if deficit <= 0:
            return
        cands = [
            j
            for j in self._eligible_running()
            if self.est_finish(j, t) > notice.estimated_arrival
        ]
        cands.sort(key=lambda j: (self._overhead(j, t), j))
        for jid in cands:
            if deficit <= 0:
                break
            st = self.j[jid]
            spec_v = self.specs[jid]
            nodes = st["nodes"]
            if spec_v.kind == JobKind.RIGID and self.mech.cup_checkpoint_aligned:
                nxt = self._next_ckpt_time(jid, t)
                if nxt is not None and nxt <= notice.estimated_arrival:
                    st["cup_kill_for"] = od
                    deficit -= nodes
                    self.emit(t, "cup_flag", jid, at=nxt, beneficiary=od)
                    continue
            # preparation is timed so the nodes come loose exactly at the
            # predicted arrival: kills then, warnings one drain earlier
            if spec_v.kind == JobKind.RIGID:
                prep_at = max(t, notice.estimated_arrival)
            else:
                prep_at = max(t, notice.estimated_arrival - self.mech.warning_duration)
            st["cup_kill_for"] = od
            st["cup_prep_at"] = prep_at
            self.emit(t, "cup_flag", jid, at=prep_at, beneficiary=od)
            deficit -= nodes
            if prep_at == t:
                self.cup_prepare(jid, t)

    def cup_prepare(self, jid: int, t: int) -> None:
        st = self.j[jid]
        spec = self.specs[jid]
        od = st["cup_kill_for"]
        st["cup_prep_at"] = None
        nodes = st["nodes"]
        if spec.kind == JobKind.MALLEABLE and st["setup_left"] == 0:
            st["cup_kill_for"] = None
            self.warn_now(jid, t, beneficiary=od)
            self.lenders.setdefault(od, []).append((jid, "preempt", nodes))
        else:
            loose = self.kill_now(jid, t, reason="cup_prepare")
            self.lenders.setdefault(od, []).append((jid, "preempt", nodes))
            loose -= self.bank_into(od, loose)
            self.route_released(loose)

    def _next_ckpt_time(self, jid: int, t: int) -> Optional[int]:
        """First future checkpoint completion, from the per-second counters."""
        st = self.j[jid]
        spec = self.specs[jid]
        tau, delta = st["tau"], st["delta"]
        # replay forward from the current counters
        rem = st["rem"]
        since = st["since_save"]
        when = t
        if st["setup_left"] > 0:
            when += st["setup_left"]
        if st["writing"]:
            return when + st["write_left"]
        while rem > 0:
            step = tau - since
            if step > rem:
                return None
            when += step
            rem -= step
            since = 0
            if rem > 0:
                return when + delta
            return None
        return None

    def handle_arrival(self, od: int, t: int) -> None:
        spec = self.specs[od]
        st = self.j[od]
        st["arrived"] = t
        st["first_submit"] = t
        demand = spec.size
        for other in self.j.values():
            if other["cup_kill_for"] == od:
                other["cup_kill_for"] = None
                other["cup_prep_at"] = None
        pool = 0
        if od in self.res:
            # evict backfilled jobs only when banked idle plus free fall short
            if self.idle_reserved(od) + self.free < demand:
                backfilled = sorted(j for j, l in self.links.items() if od in l)
                for jid in backfilled:
                    nodes = self.j[jid]["nodes"]
                    pool += self.kill_now(jid, t, reason="evict_backfilled")
                    self.lenders.setdefault(od, []).append((jid, "preempt", nodes))
            r = self.res.pop(od)
            held = r["held"]
            for jid in list(self.links):
                if od in self.links[jid]:
                    held -= self.links[jid].pop(od)
                    if not self.links[jid]:
                        del self.links[jid]
            pool += held
        avail = pool + self.free
        instant = False
        if avail >= demand:
            instant = True
            from_free = max(demand - pool, 0)
            self.free -= from_free
            leftover = pool - (demand - from_free)
            self.begin_attempt(od, t, demand)
            self.route_released(leftover)
        else:
            deficit = demand - avail
            if self.mech.arrival_strategy == ArrivalStrategy.SPAA:
                planned = self._spaa_plan(deficit, t)
            else:
                v = self._paa_plan(deficit, t)
                planned = None if v is None else ([], v)
            if planned is not None:
                instant = True
                shrinks, victims = planned
                pool += self.free
                self.free = 0
                for jid, new_size in shrinks:
                    old = self.j[jid]["nodes"]
                    pool += self.resize_malleable(jid, t, new_size)
                    self.lenders.setdefault(od, []).append((jid, "shrink", old - new_size))
                    self.emit(t, "shrink", jid, new=new_size)
                for jid, action in victims:
                    nodes = self.j[jid]["nodes"]
                    if action == "kill":
                        pool += self.kill_now(jid, t, reason="arrival_preempt")
                    else:
                        self.warn_now(jid, t, beneficiary=od)
                    self.lenders.setdefault(od, []).append((jid, "preempt", nodes))
                if pool >= demand:
                    self.begin_attempt(od, t, demand)
                    self.route_released(pool - demand)
                else:
                    st["status"] = "pending"
                    st["pending_needed"] = demand
                    self.pending[od] = self.pending.get(od, 0) + pool
            else:
                st["status"] = "waiting"
                st["pinned"] = True
                self.route_released(pool)
        st["instant"] = instant
        self.emit(t, "arrival", od, instant=instant)

    def handle_timeout(self, od: int, t: int) -> None:
        st = self.j[od]
        if st["arrived"] is not None or od not in self.res:
            return
        r = self.res.pop(od)
        held = r["held"]
        for jid in list(self.links):
            if od in self.links[jid]:
                held -= self.links[jid].pop(od)
                if not self.links[jid]:
                    del self.links[jid]
        st["notice_voided"] = True
        self.route_released(held)
        self.emit(t, "timeout", od, released=held)

    # -- the scheduling pass ------------------------------------------------

    def schedule_pass(self, t: int) -> None:
        waiting = [j for j in sorted(self.j) if self.j[j]["status"] == "waiting"]
        if not waiting:
            return
        order = sorted(
            waiting,
            key=lambda j: (0, self.j[j]["arrived"] or 0, j)
            if self.j[j]["pinned"]
            else (1, self.j[j]["first_submit"], j),
        )
        free_now = self.free
        releases = [
            (self.est_finish(j, t), self.j[j]["nodes"])
            for j in sorted(self.j)
            if self.j[j]["status"] == "alloc"
        ]
        # reserved-idle pools, usable until the owner's estimated arrival
        pools = []
        for r in sorted(self.res.values(), key=lambda r: (r["notice_time"], r["owner"])):
            idle = self.idle_reserved(r["owner"])
            if idle > 0:
                need_time = self.specs[r["owner"]].notice.estimated_arrival
                pools.append([r["owner"], idle, need_time])
        decisions = []  # (jid, n, from_free, parts, backfilled)

        def bounds(jid):
            spec = self.specs[jid]
            if spec.kind == JobKind.MALLEABLE:
                return spec.n_min, spec.n_max
            return spec.size, spec.size

        def fit(jid, cap):
            # on-demand jobs never start on reserved idle nodes
            lo, _ = bounds(jid)
            reserved_ok = self.specs[jid].kind != JobKind.ON_DEMAND
            hi = free_now + (sum(p[1] for p in pools) if reserved_ok else 0)
            hi = min(cap, hi)
            for n in range(hi, lo - 1, -1):
                avail = free_now
                if reserved_ok:
                    d = self.est_attempt_duration(jid, n)
                    avail += sum(p[1] for p in pools if t + d <= p[2])
                if n <= avail:
                    return n
            return None

        def consume(jid, n, backfilled):
            nonlocal free_now
            taken_free = min(free_now, n)
            free_now -= taken_free
            rest = n - taken_free
            parts = []
            if rest > 0:
                d = self.est_attempt_duration(jid, n)
                for p in pools:
                    if t + d > p[2]:
                        continue
                    take = min(p[1], rest)
                    if take > 0:
                        p[1] -= take
                        parts.append((p[0], take))
                        rest -= take
                    if rest == 0:
                        break
            if rest > 0:
                raise OracleError("start size exceeded the open idle nodes")
            releases.append((t + self.est_attempt_duration(jid, n), n))
            decisions.append((jid, n, taken_free, parts, backfilled))

        head = None
        head_idx = 0
        for i, jid in enumerate(order):
            n = fit(jid, bounds(jid)[1])
            if n is None:
                head = jid
                head_idx = i
                break
            consume(jid, n, False)

        if head is not None:
            lo_h, _ = bounds(head)
            # earliest start for the head, from free nodes plus estimated
            # releases; stays infinite when they never cover the need
            inf = float("inf")
            avail = free_now
            t_head = inf
            for rt, rn in sorted(releases):
                if avail >= lo_h and rt > t_head:
                    break
                avail += rn
                if avail >= lo_h and t_head == inf:
                    t_head = rt
            extra = avail - lo_h
            for jid in order[head_idx + 1 :]:
                lo, hi = bounds(jid)
                n = fit(jid, hi)
                if n is None:
                    continue
                if t + self.est_attempt_duration(jid, n) <= t_head:
                    pass
                elif n <= extra:
                    extra -= n
                else:
                    n_alt = fit(jid, min(n, extra)) if extra >= lo else None
                    if n_alt is not None:
                        n = n_alt
                        extra -= n
                    else:
                        continue
                consume(jid, n, True)

        for jid, n, from_free, parts, backfilled in decisions:
            self.free -= from_free
            if parts:
                self.links[jid] = dict(parts)
            st = self.j[jid]
            st["pinned"] = False
            self.begin_attempt(jid, t, n, backfilled=backfilled)
            if (
                self.specs[jid].kind == JobKind.ON_DEMAND
                and self.mech.is_baseline
                and t == st["first_submit"]
            ):
                st["instant"] = True

    # -- main loop ----------------------------------------------------------

    def run(self) -> "PerSecondOracle":
        for jid, spec in self.specs.items():
            self.j[jid] = {
                "status": "unsubmitted",
                "nodes": 0,
                "first_submit": spec.submit_time,
                "saved_base": 0,
                "completed_base": 0,
                "setup_left": 0,
                "setup_end": 0,
                "setup_occ": 0,
                "cup_kill_for": None,
                "cup_prep_at": None,
                "arrived": None,
                "instant": False,
                "pinned": False,
                "pending_needed": 0,
                "notice_voided": False,
                "timeout_at": None,
                "preempts": 0,
                "finish": None,
                "starts": [],
                "writing": False,
                "write_left": 0,
                "since_save": 0,
                "done": 0,
            }
        submits = {}
        arrivals = {}
        notices = {}
        for jid, spec in self.specs.items():
            if spec.kind == JobKind.ON_DEMAND and not self.mech.is_baseline:
                arrivals.setdefault(spec.notice.actual_arrival, []).append(jid)
                if (
                    spec.notice.category != NoticeCategory.NO_NOTICE
                    and self.mech.notice_strategy in (NoticeStrategy.CUA, NoticeStrategy.CUP)
                ):
                    notices.setdefault(spec.notice.notice_time, []).append(jid)
            elif spec.kind == JobKind.ON_DEMAND:
                submits.setdefault(spec.notice.actual_arrival, []).append(jid)
            else:
                submits.setdefault(spec.submit_time, []).append(jid)

        t = 0
        while t <= MAX_SECONDS:
            if all(st["status"] == "done" for st in self.j.values()):
                break
            fired = False
            # 1. finishes
            for jid in sorted(self.j):
                st = self.j[jid]
                if st["status"] != "alloc" or st["setup_left"] > 0:
                    continue
                spec = self.specs[jid]
                if spec.kind == JobKind.RIGID:
                    done = st["rem"] == 0 and not st["writing"]
                elif spec.kind == JobKind.MALLEABLE:
                    done = st["done"] >= st["target"]
                else:
                    done = st["rem"] == 0
                if done:
                    fired = True
                    self.finish_job(jid, t)
            # 2. checkpoint completions
            for jid in sorted(self.j):
                st = self.j[jid]
                if st["status"] == "alloc" and st["writing"] and st["write_left"] == 0:
                    fired = True
                    self.ckpt_complete(jid, t)
            # 3. drain expiries
            for jid in sorted(self.j):
                st = self.j[jid]
                if st["status"] == "drain" and st["drain_left"] == 0:
                    fired = True
                    self.drain_expire(jid, t)
            # 4. scheduled preparation preemptions for predicted arrivals
            for jid in sorted(self.j):
                st = self.j[jid]
                if (
                    st["status"] == "alloc"
                    and st["cup_kill_for"] is not None
                    and st["cup_prep_at"] == t
                ):
                    fired = True
                    self.cup_prepare(jid, t)
            # 5. on-demand arrivals
            for jid in arrivals.get(t, []):
                fired = True
                self.handle_arrival(jid, t)
            # 6. advance notices
            for jid in notices.get(t, []):
                fired = True
                self.handle_notice(jid, t)
            # 7. reservation timeouts; one consumed by an earlier arrival is
            # a non-event (no pass, no horizon extension)
            for jid in sorted(self.j):
                st = self.j[jid]
                if st["timeout_at"] == t and st["arrived"] is None and jid in self.res:
                    fired = True
                    self.handle_timeout(jid, t)
            # 8. submissions
            for jid in submits.get(t, []):
                fired = True
                st = self.j[jid]
                st["status"] = "waiting"
                st["first_submit"] = t
                self.emit(t, "submit", jid)
            # 9. one scheduling pass per active second
            if fired:
                self.schedule_pass(t)
                if self.t_first is None:
                    self.t_first = t
                self.t_last = t
            # 10. accrue the second [t, t+1)
            busy = sum(st["nodes"] for st in self.j.values() if st["status"] in ("alloc", "drain"))
            self.alloc_integral += busy
            for jid in sorted(self.j):
                st = self.j[jid]
                if st["status"] == "alloc":
                    spec = self.specs[jid]
                    if st["setup_left"] > 0:
                        st["setup_left"] -= 1
                        if spec.kind != JobKind.RIGID:
                            st["setup_occ"] += st["nodes"]
                    elif spec.kind == JobKind.RIGID:
                        if st["writing"]:
                            st["write_left"] -= 1
                            st["write_secs"] += 1
                        else:
                            st["rem"] -= 1
                            st["since_save"] += 1
                            if st["since_save"] == st["tau"] and st["rem"] > 0:
                                st["writing"] = True
                                st["write_left"] = st["delta"]
                    elif spec.kind == JobKind.MALLEABLE:
                        st["done"] += st["nodes"]
                    else:
                        st["rem"] -= 1
                elif st["status"] == "drain":
                    st["drain_left"] -= 1
            t += 1
        else:
            raise OracleError("oracle exceeded its horizon limit")
        return self
