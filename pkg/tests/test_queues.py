import pytest
from hypothesis import given, settings, strategies as st

from diana_sched.costs import JobDataSpec
from diana_sched.errors import DuplicateEnqueue
from diana_sched.queues import (FeedbackQueues, Job, PriorityPolicy, UserStats, apply_aging,
                                effective_priority, enqueue_burst, next_job, queue_snapshot)

DATA = JobDataSpec(0, 0, 0, "A", "A", "A")


def make_burst(procs, owner="u0", burst=0, first_id=0):
    return [Job(id=first_id + i, owner=owner, burst=burst, processors_required=p,
                compute_demand=10.0, data=DATA) for i, p in enumerate(procs)]


def levels(q):
    return [[j.id for j in level] for level in q.levels]


class TestEffectivePriority:
    P = PriorityPolicy(num_levels=3, base_level=1, job_threshold=10, time_threshold=100)

    def test_below_threshold_is_base(self):
        assert effective_priority(UserStats("u", 10), 0.0, self.P) == 1

    def test_decay_clamps_at_lowest(self):
        assert effective_priority(UserStats("u", 12), 0.0, self.P) == 2

    def test_aging_clamps_at_highest(self):
        assert effective_priority(UserStats("u", 0), 300.0, self.P) == 0

    def test_fractional_rates_floor(self):
        p = PriorityPolicy(num_levels=5, base_level=2, job_threshold=10, time_threshold=100,
                           decay_per_excess_job=0.5, aging_step=0.5)
        assert effective_priority(UserStats("u", 13), 0.0, p) == 3  # floor(1.5)
        assert effective_priority(UserStats("u", 0), 300.0, p) == 1  # floor(1.5)

    @given(n=st.integers(0, 100), wait=st.floats(0, 1e4), dn=st.integers(0, 50),
           dw=st.floats(0, 1e4), levels=st.integers(2, 6), base=st.integers(0, 5),
           decay=st.floats(0, 3), age=st.floats(0, 3))
    def test_monotone_and_in_range(self, n, wait, dn, dw, levels, base, decay, age):
        p = PriorityPolicy(levels, min(base, levels - 1), 10, 50.0, decay, age)
        lvl = effective_priority(UserStats("u", n), wait, p)
        assert 0 <= lvl < levels
        assert effective_priority(UserStats("u", n + dn), wait, p) >= lvl
        assert effective_priority(UserStats("u", n), wait + dw, p) <= lvl

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            PriorityPolicy(num_levels=1)
        with pytest.raises(ValueError):
            PriorityPolicy(num_levels=3, base_level=3)
        with pytest.raises(ValueError):
            PriorityPolicy(time_threshold=0)


class TestEnqueue:
    def test_sjf_order(self):
        q = FeedbackQueues(PriorityPolicy())
        enqueue_burst(make_burst([4, 1, 2]), q, 0.0)
        assert [j.processors_required for j in q.levels[1]] == [1, 2, 4]

    def test_sjf_ties_by_id(self):
        q = FeedbackQueues(PriorityPolicy())
        enqueue_burst(make_burst([2, 1, 2, 1]), q, 0.0)
        assert levels(q)[1] == [1, 3, 0, 2]

    def test_fifo_variant_keeps_order(self):
        q = FeedbackQueues(PriorityPolicy(sjf=False))
        enqueue_burst(make_burst([4, 1, 2]), q, 0.0)
        assert levels(q)[1] == [0, 1, 2]

    def test_single_job_idle_user(self):
        q = FeedbackQueues(PriorityPolicy())
        assert enqueue_burst(make_burst([1]), q, 5.0) == 1
        assert levels(q) == [[], [0], []]

    def test_second_burst_demoted(self):
        # threshold 5: first burst brings the count to 4 (base level),
        # the second to 8, three over, so decay pushes it to the bottom.
        p = PriorityPolicy(num_levels=3, base_level=1, job_threshold=5, time_threshold=100)
        q = FeedbackQueues(p)
        first = enqueue_burst(make_burst([1] * 4, burst=0), q, 0.0)
        second = enqueue_burst(make_burst([1] * 4, burst=1, first_id=4), q, 10.0)
        assert (first, second) == (1, 2)
        assert effective_priority(UserStats("u0", 4), 0, p) == 1
        assert effective_priority(UserStats("u0", 8), 0, p) == 2

    def test_window_resets(self):
        p = PriorityPolicy(job_threshold=5, time_threshold=100)
        q = FeedbackQueues(p)
        enqueue_burst(make_burst([1] * 4, burst=0), q, 0.0)
        # a full window later the count starts over
        assert enqueue_burst(make_burst([1] * 4, burst=1, first_id=4), q, 100.0) == 1
        assert q.stats["u0"].jobs_in_window == 4

    def test_other_users_unaffected(self):
        p = PriorityPolicy(job_threshold=2)
        q = FeedbackQueues(p)
        assert enqueue_burst(make_burst([1] * 5, owner="heavy"), q, 0.0) == 2
        assert enqueue_burst(make_burst([1], owner="light", burst=1, first_id=5), q, 0.0) == 1

    def test_duplicate_rejected(self):
        q = FeedbackQueues(PriorityPolicy())
        burst = make_burst([1, 1])
        enqueue_burst(burst, q, 0.0)
        with pytest.raises(DuplicateEnqueue):
            enqueue_burst(burst[:1], q, 1.0)

    def test_mixed_burst_rejected(self):
        q = FeedbackQueues(PriorityPolicy())
        burst = make_burst([1, 1])
        burst[1].owner = "other"
        with pytest.raises(ValueError):
            enqueue_burst(burst, q, 0.0)

    def test_priority_ignores_job_fields(self):
        # identical user history gives identical levels whatever the jobs say
        a, b = FeedbackQueues(PriorityPolicy()), FeedbackQueues(PriorityPolicy())
        la = enqueue_burst(make_burst([1, 1]), a, 0.0)
        jobs = make_burst([8, 8])
        for j in jobs:
            j.current_level = 0
            j.compute_demand = 1e9
        assert enqueue_burst(jobs, b, 0.0) == la


class TestNextJob:
    def test_strict_level_priority(self):
        q = FeedbackQueues(PriorityPolicy())
        a, b, c = make_burst([1, 1, 1])
        q.levels[0].extend([a, b])
        q.levels[1].append(c)
        q._where.update({0: 0, 1: 0, 2: 1})
        assert next_job(q) is a

    def test_falls_through(self):
        q = FeedbackQueues(PriorityPolicy())
        enqueue_burst(make_burst([1]), q, 0.0)
        assert next_job(q).id == 0

    def test_empty(self):
        assert next_job(FeedbackQueues(PriorityPolicy())) is None

    def test_snapshot(self):
        q = FeedbackQueues(PriorityPolicy())
        assert queue_snapshot(q) == {"levels": [0, 0, 0], "total": 0}
        enqueue_burst(make_burst([1, 2, 3]), q, 0.0)
        assert queue_snapshot(q)["total"] == 3
        next_job(q)
        assert queue_snapshot(q) == {"levels": [0, 2, 0], "total": 2}


class TestAging:
    def _two_at_bottom(self):
        p = PriorityPolicy(num_levels=3, base_level=2, time_threshold=100)
        q = FeedbackQueues(p)
        enqueue_burst(make_burst([1, 1]), q, 0.0)
        return q

    def test_not_yet(self):
        q = self._two_at_bottom()
        assert apply_aging(q, 99.9) == []

    def test_promotes_one_level_in_order(self):
        q = self._two_at_bottom()
        moves = apply_aging(q, 100.0)
        assert [(m.job, m.old_level, m.new_level) for m in moves] == [(0, 2, 1), (1, 2, 1)]
        assert levels(q) == [[], [0, 1], []]

    def test_each_threshold_counts_once(self):
        q = self._two_at_bottom()
        apply_aging(q, 100.0)
        assert apply_aging(q, 150.0) == []
        apply_aging(q, 200.0)
        assert levels(q) == [[0, 1], [], []]
        assert apply_aging(q, 1000.0) == []

    def test_promoted_jobs_go_to_tail(self):
        q = self._two_at_bottom()
        newer = make_burst([1], owner="v", burst=1, first_id=9)
        q.policy.base_level = 1
        enqueue_burst(newer, q, 50.0)
        apply_aging(q, 100.0)
        assert levels(q)[1] == [9, 0, 1]

    def test_zero_aging_never_promotes(self):
        p = PriorityPolicy(base_level=2, aging_step=0)
        q = FeedbackQueues(p)
        enqueue_burst(make_burst([1]), q, 0.0)
        assert apply_aging(q, 1e6) == []


@settings(max_examples=60, deadline=None)
@given(ops=st.lists(st.tuples(st.sampled_from(["enq", "next", "age"]),
                              st.integers(1, 4), st.integers(0, 3)), max_size=60))
def test_conservation_and_single_membership(ops):
    q = FeedbackQueues(PriorityPolicy(job_threshold=3, time_threshold=10))
    now, nid, bid = 0.0, 0, 0
    served = set()
    for op, size, owner in ops:
        now += 3.0
        if op == "enq":
            enqueue_burst(make_burst([1 + (i % 3) for i in range(size)], owner=f"u{owner}",
                                     burst=bid, first_id=nid), q, now)
            nid += size
            bid += 1
        elif op == "next":
            job = next_job(q)
            if job is not None:
                assert job.id not in served
                served.add(job.id)
        else:
            apply_aging(q, now)
        ids = [j.id for level in q.levels for j in level]
        assert len(ids) == len(set(ids)) == len(q)
        assert q.enqueued == q.dequeued + len(q)
        assert not served & set(ids)
