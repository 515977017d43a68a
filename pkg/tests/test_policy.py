"""Queue ordering, head reservation planning, and EASY backfill decisions."""
import random

from hypothesis import given, strategies as st

from hybridsched.policy import (
    INFINITY,
    QueueEntry,
    ReservedPool,
    StartDecision,
    easy_backfill_plan,
    fcfs_order,
    head_start_plan,
)


def entry(jid, submit=0, need=2, need_max=None, dur=100, pinned=False,
          pin_time=0, reserved_ok=True):
    return QueueEntry(
        job_id=jid, first_submit=submit, need_min=need,
        need_max=need if need_max is None else need_max,
        duration_for=lambda n, d=dur: d, pinned=pinned, pin_time=pin_time,
        reserved_ok=reserved_ok,
    )


class TestFcfsOrder:
    def test_submit_time_then_id(self):
        order = fcfs_order([entry(3, submit=5), entry(1, submit=9), entry(2, submit=5)])
        assert [e.job_id for e in order] == [2, 3, 1]

    def test_pinned_jobs_lead_by_arrival(self):
        order = fcfs_order([
            entry(1, submit=0),
            entry(2, submit=99, pinned=True, pin_time=10),
            entry(3, submit=99, pinned=True, pin_time=5),
        ])
        assert [e.job_id for e in order] == [3, 2, 1]


class TestHeadStartPlan:
    def test_fits_now(self):
        t, avail = head_start_plan(3, free=4, releases=[(50, 2)])
        assert t == -INFINITY and avail == 4

    def test_waits_for_release(self):
        t, avail = head_start_plan(4, free=1, releases=[(30, 2), (20, 1)])
        assert t == 30
        assert avail == 4

    def test_counts_simultaneous_releases(self):
        t, avail = head_start_plan(4, free=0, releases=[(30, 2), (30, 3)])
        assert t == 30 and avail == 5

    def test_never_enough(self):
        t, avail = head_start_plan(9, free=1, releases=[(30, 2)])
        assert t == INFINITY and avail == 3


class TestEasyBackfillPlan:
    def test_fcfs_starts_until_blocked(self):
        decisions, res = easy_backfill_plan(
            0, free=4, pools=[], releases=[],
            entries=[entry(1, need=2), entry(2, need=3), entry(3, need=1)],
        )
        started = {d.job_id: d for d in decisions}
        assert set(started) == {1, 3}
        assert not started[1].backfilled and started[3].backfilled
        # the head can start once the two started jobs release at t=100
        assert res == (2, 100)

    def test_backfill_fits_before_head_start(self):
        # head needs 4 at t=100; a 90 s single-node job slips in
        decisions, res = easy_backfill_plan(
            0, free=1, pools=[], releases=[(100, 3)],
            entries=[entry(1, need=4), entry(2, need=1, dur=90)],
        )
        assert res == (1, 100)
        assert [d.job_id for d in decisions] == [2]

    def test_backfill_respects_head_reservation(self):
        # the same filler running 150 s would delay the head: rejected
        decisions, res = easy_backfill_plan(
            0, free=1, pools=[], releases=[(100, 3)],
            entries=[entry(1, need=4), entry(2, need=1, dur=150)],
        )
        assert decisions == [] and res == (1, 100)

    def test_backfill_on_spare_nodes_beyond_head_need(self):
        # at t=100 the head has 5 available but needs 4: one spare node may
        # host a long filler
        decisions, _ = easy_backfill_plan(
            0, free=2, pools=[], releases=[(100, 3)],
            entries=[entry(1, need=4), entry(2, need=1, dur=9999),
                     entry(3, need=1, dur=9999)],
        )
        assert [d.job_id for d in decisions] == [2]

    def test_malleable_filler_shrinks_onto_spare_nodes(self):
        decisions, _ = easy_backfill_plan(
            0, free=3, pools=[], releases=[(100, 2)],
            entries=[entry(1, need=4), entry(2, need=1, need_max=3, dur=9999)],
        )
        assert decisions == [StartDecision(2, 1, True, 1, [])]

    def test_reserved_pool_open_to_short_jobs_only(self):
        pool = [ReservedPool(owner=9, idle=2, need_time=100)]
        decisions, _ = easy_backfill_plan(
            0, free=0, pools=pool, releases=[],
            entries=[entry(1, need=2, dur=100)],
        )
        assert decisions == [StartDecision(1, 2, False, 0, [(9, 2)])]
        decisions, _ = easy_backfill_plan(
            0, free=0, pools=[ReservedPool(9, 2, 100)], releases=[],
            entries=[entry(1, need=2, dur=101)],
        )
        assert decisions == []

    def test_on_demand_entries_never_use_pools(self):
        decisions, _ = easy_backfill_plan(
            0, free=0, pools=[ReservedPool(9, 4, 10_000)], releases=[],
            entries=[entry(1, need=2, dur=5, reserved_ok=False)],
        )
        assert decisions == []

    def test_free_consumed_before_pools(self):
        decisions, _ = easy_backfill_plan(
            0, free=1, pools=[ReservedPool(9, 3, 1000)], releases=[],
            entries=[entry(1, need=3, dur=50)],
        )
        assert decisions == [StartDecision(1, 3, False, 1, [(9, 2)])]

    @given(seed=st.integers(0, 5000))
    def test_backfill_never_delays_head(self, seed):
        """The head's planned start, recomputed after applying the plan's
        consumption, never moves later than the plan's reservation."""
        rng = random.Random(seed)
        free = rng.randint(0, 6)
        releases = [
            (rng.randint(1, 200), rng.randint(1, 4))
            for _ in range(rng.randint(0, 4))
        ]
        entries = [
            entry(j, submit=rng.randint(0, 9), need=rng.randint(1, 6),
                  dur=rng.randint(1, 300))
            for j in range(1, rng.randint(2, 8))
        ]
        decisions, res = easy_backfill_plan(0, free, [], releases, entries)
        if res is None or res[1] == INFINITY:
            return
        head_id, t_head = res
        head = next(e for e in entries if e.job_id == head_id)
        free_after = free - sum(d.from_free for d in decisions)
        releases_after = list(releases) + [
            (d.nodes and 0 + e.duration_for(d.nodes), d.nodes)
            for d in decisions
            for e in [next(x for x in entries if x.job_id == d.job_id)]
        ]
        t_again, _ = head_start_plan(head.need_min, free_after, releases_after)
        assert t_again <= t_head
