"""Event engine behaviour on hand-checkable instances, plus run invariants
(conservation, determinism) over the random tiny corpus."""
import random

import pytest

from hybridsched.config import MechanismConfig, SystemConfig
from hybridsched.engine import Simulator
from hybridsched.jobs import JobKind, JobSpec, NoticeCategory, NoticeProfile
from hybridsched.metrics import report_from_engine
from tiny import tiny_instance

QUIET = SystemConfig(
    capacity=8,
    mtbf=10**9,  # effectively no checkpointing
    checkpoint_cost_small=600,
    checkpoint_cost_large=1200,
    checkpoint_node_threshold=1024,
    reservation_grace=600,
)


def rigid(jid, submit, size, compute, setup=0, estimate=None):
    return JobSpec(
        job_id=jid, submit_time=submit, kind=JobKind.RIGID, size=size,
        n_min=size, n_max=size,
        runtime_estimate=(compute + setup) if estimate is None else estimate,
        actual_work=compute * size, setup_time=setup,
    )


def malleable(jid, submit, n_max, compute_at_max, n_min=1, setup=0, estimate=None):
    return JobSpec(
        job_id=jid, submit_time=submit, kind=JobKind.MALLEABLE, size=n_max,
        n_min=n_min, n_max=n_max,
        runtime_estimate=(compute_at_max + setup) if estimate is None else estimate,
        actual_work=compute_at_max * n_max, setup_time=setup,
    )


def on_demand(jid, arrival, size, compute, notice=None):
    profile = notice or NoticeProfile(
        category=NoticeCategory.NO_NOTICE, estimated_arrival=arrival,
        actual_arrival=arrival, estimated_size=size, estimated_runtime=compute,
    )
    return JobSpec(
        job_id=jid, submit_time=arrival, kind=JobKind.ON_DEMAND, size=size,
        n_min=size, n_max=size, runtime_estimate=compute,
        actual_work=compute * size, setup_time=0, notice=profile,
    )


def run(specs, mech="N&PAA", system=QUIET, **kw):
    sim = Simulator(specs, system, MechanismConfig.parse(mech), collect_log=True, **kw)
    return sim.run()


def test_single_rigid_job_closed_form():
    sim = run([rigid(1, submit=5, size=4, compute=100, setup=10)])
    st = sim.states[1]
    assert st.finish_time == 5 + 10 + 100
    assert sim.useful == 400
    assert sim.waste["setup_occupancy"] == 40
    assert sim.alloc_integral == 4 * 110


def test_malleable_runs_at_largest_feasible_size():
    # 8 free nodes, n_max 6: starts at 6 and finishes in work/6 seconds
    sim = run([malleable(1, submit=0, n_max=6, compute_at_max=60)])
    st = sim.states[1]
    assert st.finish_time == 60
    assert any(e["ev"] == "start" and e["n"] == 6 for e in sim.log)


def test_on_demand_preempts_rigid_at_arrival():
    # rigid holds all 8 nodes; a 4-node on-demand job arrives and kills it
    specs = [
        rigid(1, submit=0, size=8, compute=500),
        on_demand(2, arrival=100, size=4, compute=50),
    ]
    sim = run(specs)
    assert any(
        e["ev"] == "preempt" and e["job"] == 1 and e["action"] == "kill"
        for e in sim.log
    )
    assert sim.states[2].instant
    # the killed job loses its unsaved work and reruns afterwards
    assert sim.waste["lost_compute"] == 8 * 100
    assert sim.states[1].finish_time > sim.states[2].finish_time


def test_on_demand_warns_malleable_then_starts_at_expiry():
    specs = [
        malleable(1, submit=0, n_max=8, compute_at_max=500, n_min=2),
        on_demand(2, arrival=100, size=8, compute=50),
    ]
    sim = run(specs, mech="N&PAA")
    warn = next(e for e in sim.log if e["ev"] == "preempt" and e["action"] == "warn")
    assert warn["t"] == 100
    start = next(e for e in sim.log if e["ev"] == "start" and e["job"] == 2)
    assert start["t"] == 100 + 120  # full warning drain
    # the demand was committed at arrival, so the start still counts instant
    assert sim.states[2].instant


def test_spaa_shrinks_instead_of_preempting():
    specs = [
        malleable(1, submit=0, n_max=8, compute_at_max=800, n_min=2),
        on_demand(2, arrival=100, size=4, compute=50),
    ]
    sim = run(specs, mech="N&SPAA")
    shrink = next(e for e in sim.log if e["ev"] == "shrink")
    assert shrink == {"t": 100, "ev": "shrink", "job": 1, "new": 4}
    assert sim.states[2].instant
    # nodes come back at the on-demand finish and the job expands again
    expand = next(e for e in sim.log if e["ev"] == "expand")
    assert expand["t"] == sim.states[2].finish_time
    assert expand["new"] == 8
    assert sim.states[1].preempt_count == 0


def test_cua_reservation_banks_releases_until_arrival():
    notice = NoticeProfile(
        category=NoticeCategory.ACCURATE, estimated_arrival=300,
        actual_arrival=300, estimated_size=6, estimated_runtime=50,
        notice_time=100,
    )
    specs = [
        rigid(1, submit=0, size=6, compute=150),  # releases at t=150
        rigid(2, submit=0, size=2, compute=500),
        on_demand(3, arrival=300, size=6, compute=50, notice=notice),
    ]
    sim = run(specs, mech="CUA&PAA")
    assert any(e["ev"] == "notice" and e["job"] == 3 for e in sim.log)
    # job 1's released nodes were banked, so the arrival needs no preemption
    assert sim.states[3].instant
    assert all(e["ev"] != "preempt" for e in sim.log)


def test_reservation_timeout_frees_banked_nodes():
    notice = NoticeProfile(
        category=NoticeCategory.EARLY, estimated_arrival=200,
        actual_arrival=1500, estimated_size=8, estimated_runtime=50,
        notice_time=100,
    )
    specs = [
        rigid(1, submit=250, size=8, compute=100),
        on_demand(2, arrival=1500, size=8, compute=50, notice=notice),
    ]
    sim = run(specs, mech="CUA&PAA")
    timeout = next(e for e in sim.log if e["ev"] == "timeout")
    assert timeout["t"] == 200 + QUIET.reservation_grace
    # job 1 only starts once the reservation dissolves
    start = next(e for e in sim.log if e["ev"] == "start" and e["job"] == 1)
    assert start["t"] == timeout["t"]


def test_checkpoint_progress_survives_preemption():
    # small mtbf forces frequent checkpoints; the kill only loses the tail
    busy = SystemConfig(
        capacity=8, mtbf=200, checkpoint_cost_small=4,
        checkpoint_cost_large=4, checkpoint_node_threshold=1024,
        reservation_grace=600,
    )
    tau = busy.checkpoint_interval(8)
    specs = [
        rigid(1, submit=0, size=8, compute=10 * tau),
        on_demand(2, arrival=3 * tau, size=8, compute=50),
    ]
    sim = run(specs, system=busy)
    assert any(e["ev"] == "checkpoint" for e in sim.log)
    assert 0 < sim.waste["lost_compute"] < 8 * 3 * tau
    assert sim.states[1].finish_time > 10 * tau


def test_conservation_on_tiny_corpus():
    for seed in range(40):
        for mech in ("N&PAA", "CUA&SPAA", "CUP&PAA", "FCFS-EASY"):
            specs, system, mc = tiny_instance(seed, mech)
            sim = Simulator(specs, system, mc, collect_log=False).run()
            assert sim.useful + sum(sim.waste.values()) == sim.alloc_integral
            horizon = sim.t_last - sim.t_first
            assert sim.alloc_integral <= system.capacity * horizon


def test_work_conservation_per_job():
    # every finished job's accounted useful compute equals its actual work
    total = 0
    for seed in range(20):
        specs, system, mc = tiny_instance(seed, "CUP&SPAA")
        sim = Simulator(specs, system, mc, collect_log=False).run()
        total += sum(s.actual_work for s in specs)
        assert sim.useful == sum(s.actual_work for s in specs)
    assert total > 0


def test_determinism_identical_logs():
    rng = random.Random(7)
    seeds = [rng.randint(0, 10**6) for _ in range(5)]
    for seed in seeds:
        specs, system, mc = tiny_instance(seed, "CUA&PAA")
        a = Simulator(specs, system, mc, collect_log=True).run()
        b = Simulator(specs, system, mc, collect_log=True).run()
        assert a.log == b.log
        assert report_from_engine(a).comparable() == report_from_engine(b).comparable()


def test_duplicate_job_ids_rejected():
    specs = [rigid(1, 0, 2, 10), rigid(1, 5, 2, 10)]
    with pytest.raises(Exception):
        run(specs)
