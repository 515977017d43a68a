"""Suite-level acceptance gate.

Seven criteria, one test each; every test prints a single summary line
(shown by pytest on failure, or with -s) naming the criterion and its
verdict.  Expensive 2,000-job simulations are cached and shared between
criteria 3 and 4.
"""
import json
import random
import statistics
import time
from functools import lru_cache

from hybridsched.config import BASELINE, MECHANISM_NAMES, MechanismConfig, SystemConfig
from hybridsched.engine import Simulator
from hybridsched.jobs import JobKind, JobSpec
from hybridsched.metrics import report_from_engine, report_from_oracle
from hybridsched.oracle import PerSecondOracle
from hybridsched.policy import QueueEntry, ReservedPool, easy_backfill_plan
from hybridsched.workload import (
    NOTICE_MIXES,
    SyntheticTraceConfig,
    WorkloadConfig,
    generate_workload,
    synthesize_trace,
)
from tiny import dense_instance, tiny_instance

SEEDS = tuple(range(10))
SIX = tuple(MECHANISM_NAMES)
CAPACITY = 512


def fixture_specs(seed, mix="W5"):
    """One of the ten shared benchmark traces: ~2,000 jobs on 512 nodes."""
    raw = synthesize_trace(SyntheticTraceConfig(capacity=CAPACITY, seed=seed))
    cfg = WorkloadConfig(
        capacity=CAPACITY,
        rng_seed=seed,
        notice_mix=NOTICE_MIXES[mix],
        on_demand_fraction=0.15,
        rigid_fraction=0.60,
        malleable_fraction=0.25,
    )
    return generate_workload(raw, cfg)


@lru_cache(maxsize=None)
def bench_sim(seed, mechanism, mix="W5", scale=1.0):
    specs = fixture_specs(seed, mix)
    system = SystemConfig(capacity=CAPACITY, checkpoint_scale=scale)
    return Simulator(
        specs, system, MechanismConfig.parse(mechanism), collect_log=False
    ).run()


@lru_cache(maxsize=None)
def bench_report(seed, mechanism, mix="W5", scale=1.0):
    return report_from_engine(bench_sim(seed, mechanism, mix, scale))


def mean_metric(mechanism, getter, mix="W5", scale=1.0):
    return statistics.fmean(
        getter(bench_report(seed, mechanism, mix, scale)) for seed in SEEDS
    )


def test_criterion_1_oracle_equivalence():
    """Engine and per-second reference agree exactly on 600 tiny runs."""
    t0 = time.perf_counter()
    mismatches = []
    for mechanism in SIX:
        for seed in range(100):
            specs, system, mech = tiny_instance(seed, mechanism)
            sim = Simulator(specs, system, mech).run()
            orc = PerSecondOracle(specs, system, mech).run()
            same = (
                sim.log == orc.log
                and report_from_engine(sim).comparable()
                == report_from_oracle(orc).comparable()
            )
            if not same:
                mismatches.append((mechanism, seed))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 60.0
    print(
        f"CRITERION 1 oracle equivalence (600 runs, {elapsed:.1f}s): "
        f"{'PASS' if ok else 'FAIL'} {mismatches[:5]}"
    )
    assert not mismatches, mismatches[:5]
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_2_conservation():
    """Node-second and work conservation on tiny corpus and benchmark runs."""
    failures = []
    for seed in range(40):
        for mechanism in SIX + (BASELINE,):
            specs, system, mech = tiny_instance(seed, mechanism)
            sim = Simulator(specs, system, mech, collect_log=False).run()
            horizon = sim.t_last - sim.t_first
            idle = system.capacity * horizon - sim.alloc_integral
            if sim.useful + sum(sim.waste.values()) != sim.alloc_integral:
                failures.append(("buckets", mechanism, seed))
            if sim.useful + sum(sim.waste.values()) + idle != system.capacity * horizon:
                failures.append(("capacity", mechanism, seed))
            if idle < 0:
                failures.append(("idle", mechanism, seed))
            if sim.useful != sum(s.actual_work for s in specs):
                failures.append(("work", mechanism, seed))
    # the identity must also hold at benchmark scale
    for mechanism in ("CUA&SPAA", BASELINE):
        sim = bench_sim(0, mechanism)
        if sim.useful + sum(sim.waste.values()) != sim.alloc_integral:
            failures.append(("buckets-big", mechanism))
        if sim.useful != sum(s.actual_work for s in fixture_specs(0)):
            failures.append(("work-big", mechanism))
    print(f"CRITERION 2 conservation: {'PASS' if not failures else 'FAIL'} {failures[:5]}")
    assert not failures, failures[:5]


def test_criterion_3_instant_start():
    """All six mechanisms reach >= 0.95 instant start; baseline stays < 0.60."""
    t0 = time.perf_counter()
    rates = {m: mean_metric(m, lambda r: r.instant_start_rate) for m in SIX}
    base = mean_metric(BASELINE, lambda r: r.instant_start_rate)
    elapsed = time.perf_counter() - t0
    ok = all(v >= 0.95 for v in rates.values()) and base < 0.60
    summary = " ".join(f"{m}={v:.3f}" for m, v in rates.items())
    print(
        f"CRITERION 3 instant start ({elapsed:.0f}s): {'PASS' if ok else 'FAIL'} "
        f"{summary} baseline={base:.3f}"
    )
    assert ok, (rates, base)


def _per_seed_violations(name, condition):
    """Evaluate a per-seed ordering predicate, returning violating seeds."""
    return [seed for seed in SEEDS if not condition(seed)]


def test_criterion_4_mechanism_orderings():
    """Directional orderings between mechanisms on the shared trace means."""

    def tat(m, mix="W5", scale=1.0):
        return mean_metric(m, lambda r: r.avg_turnaround, mix, scale)

    def util(m, mix="W5", scale=1.0):
        return mean_metric(m, lambda r: r.utilization, mix, scale)

    def tat_kind(m, kind, mix="W5", scale=1.0):
        return mean_metric(m, lambda r: r.avg_turnaround_by_kind.get(kind, 0.0), mix, scale)

    def preempted(m, kind):
        if kind == "rigid":
            return mean_metric(m, lambda r: r.preempted_fraction_rigid)
        return mean_metric(m, lambda r: r.preempted_fraction_malleable)

    results = {}
    results["a"] = all(tat("N&PAA") >= tat(m) for m in SIX) and all(
        util("N&PAA") <= util(m) for m in SIX
    )
    results["b"] = all(
        preempted(p + "SPAA", "malleable") < preempted(p + "PAA", "malleable")
        and util(p + "SPAA") >= util(p + "PAA")
        for p in ("N&", "CUA&", "CUP&")
    )
    results["c"] = all(
        tat(p + "PAA") <= tat(p + "SPAA") for p in ("CUA&", "CUP&")
    )
    results["d"] = all(
        tat("CUA&" + x) <= tat("CUP&" + x) and util("CUA&" + x) >= util("CUP&" + x)
        for x in ("PAA", "SPAA")
    )
    results["e"] = all(
        tat_kind(m, "malleable") < tat_kind(m, "rigid")
        for m in SIX
        if m.startswith(("CUA", "CUP"))
    )
    results["f"] = all(
        preempted(m, "malleable") > preempted(m, "rigid") for m in SIX
    )
    results["g"] = all(
        util(m, mix="W2") >= util(m, mix="W1") and tat(m, mix="W2") <= tat(m, mix="W1")
        for m in ("CUP&PAA", "CUP&SPAA")
    )
    results["h"] = all(
        min(("W1", "W2", "W3", "W4", "W5"), key=lambda w: tat(m, mix=w)) == "W4"
        for m in ("CUA&PAA", "CUA&SPAA")
    )
    results["i"] = all(
        tat_kind(m, "rigid", scale=0.5) <= tat_kind(m, "rigid", scale=1.0)
        and util(m, scale=0.5) >= util(m, scale=1.0)
        for m in SIX
    )

    # trace-level violation report for the passing orderings
    def seed_tat(m, seed, mix="W5"):
        return bench_report(seed, m, mix).avg_turnaround

    per_seed = {
        "a": _per_seed_violations(
            "a", lambda s: all(seed_tat("N&PAA", s) >= seed_tat(m, s) for m in SIX)
        ),
        "c": _per_seed_violations(
            "c",
            lambda s: all(
                seed_tat(p + "PAA", s) <= seed_tat(p + "SPAA", s)
                for p in ("CUA&", "CUP&")
            ),
        ),
        "d": _per_seed_violations(
            "d",
            lambda s: all(
                seed_tat("CUA&" + x, s) <= seed_tat("CUP&" + x, s)
                for x in ("PAA", "SPAA")
            ),
        ),
    }
    failed = sorted(k for k, v in results.items() if not v)
    verdict = "PASS" if not failed else f"FAIL [{', '.join(failed)}]"
    print(
        f"CRITERION 4 mechanism orderings: {verdict}; "
        f"per-trace violations a={per_seed['a']} c={per_seed['c']} d={per_seed['d']}"
    )
    assert not failed, f"failed sub-criteria: {failed}"


def test_criterion_5_decision_latency():
    """p99 arrival-handling wall time < 10 ms with > 1,000 queued jobs."""
    t0 = time.perf_counter()
    capacity = 4392
    specs = []
    rng = random.Random(7)
    for jid in range(1, 1401):
        size = rng.randint(8, 24)
        compute = rng.randint(6000, 7200)
        specs.append(
            JobSpec(
                job_id=jid, submit_time=0, kind=JobKind.RIGID, size=size,
                n_min=size, n_max=size, runtime_estimate=compute + 100,
                actual_work=size * compute, setup_time=0,
            )
        )
    from hybridsched.jobs import NoticeCategory, NoticeProfile

    for k in range(40):
        arrival = 200 + 40 * k
        size = rng.randint(32, 128)
        specs.append(
            JobSpec(
                job_id=2000 + k, submit_time=arrival, kind=JobKind.ON_DEMAND,
                size=size, n_min=size, n_max=size, runtime_estimate=600,
                actual_work=size * 600, setup_time=0,
                notice=NoticeProfile(
                    category=NoticeCategory.NO_NOTICE, estimated_arrival=arrival,
                    actual_arrival=arrival, estimated_size=size,
                    estimated_runtime=600,
                ),
            )
        )
    system = SystemConfig(capacity=capacity)
    sim = Simulator(
        specs, system, MechanismConfig.parse("N&PAA"), collect_log=False
    ).run()
    lat = sorted(sim.arrival_latencies_ms)
    p99 = lat[max(0, -(-len(lat) * 99 // 100) - 1)]
    elapsed = time.perf_counter() - t0
    ok = p99 < 10.0 and elapsed < 120.0
    print(
        f"CRITERION 5 decision latency: {'PASS' if ok else 'FAIL'} "
        f"p99={p99:.3f}ms over {len(lat)} arrivals ({elapsed:.0f}s)"
    )
    assert len(lat) == 40
    assert p99 < 10.0, f"p99 {p99:.3f}ms"
    assert elapsed < 120.0


def _random_plan_case(rng):
    capacity = rng.randint(12, 40)
    free = rng.randint(0, capacity // 2)
    n_entries = rng.randint(4, 12)
    entries = []
    for jid in range(1, n_entries + 1):
        hi = rng.randint(1, capacity)
        lo = hi if rng.random() < 0.6 else max(1, int(hi * 0.2))
        base = rng.randint(5, 200)
        entries.append(
            QueueEntry(
                job_id=jid,
                first_submit=rng.randint(0, 50),
                need_min=lo,
                need_max=hi,
                duration_for=lambda n, b=base, h=hi: b * h // max(n, 1) + 1,
                pinned=False,
                pin_time=0,
                reserved_ok=rng.random() < 0.8,
            )
        )
    pools = [
        ReservedPool(owner=1000 + i, idle=rng.randint(1, 6), need_time=rng.randint(5, 150))
        for i in range(rng.randint(0, 2))
    ]
    releases = [
        (rng.randint(1, 250), rng.randint(1, capacity // 2))
        for _ in range(rng.randint(0, 6))
    ]
    return free, pools, releases, entries


def test_criterion_6_backfill_never_delays_head():
    """Removing any backfilled job never changes the head reservation."""
    rng = random.Random(2024)
    checked = 0
    bad = []
    attempts = 0
    while checked < 200 and attempts < 4000:
        attempts += 1
        free, pools, releases, entries = _random_plan_case(rng)
        decisions, head = easy_backfill_plan(0, free, pools, releases, entries)
        if head is None:
            continue
        backfilled = [d for d in decisions if d.backfilled]
        if not backfilled:
            continue
        for d in backfilled:
            pruned = [e for e in entries if e.job_id != d.job_id]
            _, head2 = easy_backfill_plan(0, free, pools, releases, pruned)
            if head2 != head:
                bad.append((d.job_id, head, head2))
            checked += 1
    print(
        f"CRITERION 6 backfill safety ({checked} cases): "
        f"{'PASS' if not bad and checked >= 200 else 'FAIL'} {bad[:3]}"
    )
    assert checked >= 200
    assert not bad, bad[:3]


def test_criterion_7_determinism():
    """Repeated runs produce byte-identical logs and reports."""

    def run_once(specs, system, mech):
        sim = Simulator(specs, system, mech, collect_log=True).run()
        log_bytes = json.dumps(sim.log, sort_keys=True).encode()
        report_bytes = json.dumps(
            report_from_engine(sim).comparable(), sort_keys=True
        ).encode()
        return log_bytes, report_bytes

    cases = []
    specs, system, mech = dense_instance(5, "CUP&SPAA")
    cases.append(("dense", specs, system, mech))
    big = fixture_specs(0)
    cases.append(("bench-cua", big, SystemConfig(capacity=CAPACITY), MechanismConfig.parse("CUA&SPAA")))
    cases.append(("bench-base", big, SystemConfig(capacity=CAPACITY), MechanismConfig.parse(BASELINE)))
    diffs = []
    for name, sp, sy, me in cases:
        first = run_once(sp, sy, me)
        second = run_once(sp, sy, me)
        if first != second:
            diffs.append(name)
    print(f"CRITERION 7 determinism (3 runs twice): {'PASS' if not diffs else 'FAIL'} {diffs}")
    assert not diffs, diffs
