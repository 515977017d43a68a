"""Report aggregation: percentiles, turnaround means, rates, utilization."""
from hybridsched.metrics import JobRecord, MetricsReport, _aggregate, percentile


def rec(jid, kind="rigid", submit=0, finish=100, preempts=0, instant=None):
    return JobRecord(
        job_id=jid, kind=kind, first_submit=submit, finish=finish,
        n_starts=1 + preempts, preempt_count=preempts, instant=instant,
    )


def test_percentile_nearest_rank():
    vals = [5.0, 1.0, 3.0, 2.0, 4.0]
    assert percentile(vals, 50) == 3.0
    assert percentile(vals, 99) == 5.0
    assert percentile(vals, 100) == 5.0
    assert percentile([], 99) == 0.0
    assert percentile([7.0], 1) == 7.0


def make_report(records, capacity=2, horizon=10, useful=5):
    return _aggregate(
        "N&PAA", capacity, horizon, useful,
        {"lost_compute": 0}, useful, records,
    )


def test_utilization_toy_example():
    # 2 nodes over 10 s, one 1-node job computing for 5 s: 5/20
    r = make_report([rec(1, finish=5)])
    assert r.utilization == 0.25


def test_turnaround_means_by_kind():
    r = make_report([
        rec(1, kind="rigid", submit=0, finish=100),
        rec(2, kind="rigid", submit=50, finish=250),
        rec(3, kind="malleable", submit=0, finish=50),
    ])
    assert r.avg_turnaround == (100 + 200 + 50) / 3
    assert r.avg_turnaround_by_kind == {"malleable": 50.0, "rigid": 150.0}


def test_rates_none_without_population():
    r = make_report([rec(1, kind="rigid")])
    assert r.instant_start_rate is None
    assert r.preempted_fraction_malleable is None
    assert r.preempted_fraction_rigid == 0.0


def test_preemption_and_instant_rates():
    r = make_report([
        rec(1, kind="rigid", preempts=2),
        rec(2, kind="rigid"),
        rec(3, kind="malleable", preempts=1),
        rec(4, kind="on_demand", instant=True),
        rec(5, kind="on_demand", instant=False),
    ])
    assert r.preempted_fraction_rigid == 0.5
    assert r.preempted_fraction_malleable == 1.0
    assert r.instant_start_rate == 0.5


def test_comparable_drops_wall_clock_fields():
    r = _aggregate(
        "N&PAA", 2, 10, 5, {}, 5, [rec(1)],
        arrival_lat=[0.5], pass_lat=[0.1, 0.2],
    )
    d = r.comparable()
    assert "arrival_latency_ms" not in d and "pass_latency_ms" not in d
    assert r.arrival_latency_ms["count"] == 1


def test_json_round_trip_excludes_jobs_by_default():
    import json

    r = make_report([rec(1)])
    d = json.loads(r.to_json())
    assert "jobs" not in d
    assert json.loads(r.to_json(include_jobs=True))["jobs"][0]["job_id"] == 1
