"""Multilevel feedback priority queues for bulk jobs.

Level 0 is the highest priority. A user's priority drops as they submit
more jobs inside the frequency window and rises again the longer their
jobs wait. Within a level, service is first come first served.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .costs import JobDataSpec
from .errors import DuplicateEnqueue

STATES = ("pending", "queued", "transferring", "running", "done")
_NEXT_STATE = {"pending": {"queued"}, "queued": {"transferring", "running"},
               "transferring": {"running"}, "running": {"done"}, "done": set()}


@dataclass(eq=False)
class Job:
    id: int
    owner: str
    burst: int
    processors_required: int
    compute_demand: float
    data: JobDataSpec
    submit_time: float = 0.0
    enqueue_time: float = 0.0
    current_level: int = 0
    remigratable: bool = True
    state: str = "pending"
    dataset: Optional[str] = None
    site: Optional[str] = None  # site whose queue currently holds / runs the job
    aging_steps: int = 0  # time thresholds already credited at the current site

    def advance(self, new_state: str) -> None:
        if new_state not in _NEXT_STATE[self.state]:
            raise ValueError(f"job {self.id}: illegal transition {self.state} -> {new_state}")
        self.state = new_state

    def __repr__(self):
        return (f"Job(id={self.id}, owner={self.owner!r}, procs={self.processors_required}, "
                f"level={self.current_level}, state={self.state})")


@dataclass
class PriorityPolicy:
    num_levels: int = 3
    base_level: int = 1
    job_threshold: int = 20
    time_threshold: float = 100.0
    decay_per_excess_job: float = 1.0
    aging_step: float = 1.0
    sjf: bool = True  # order bursts shortest-first; False keeps submission order

    def __post_init__(self):
        if self.num_levels < 2:
            raise ValueError("num_levels must be >= 2")
        if not 0 <= self.base_level < self.num_levels:
            raise ValueError("base_level must lie in [0, num_levels)")
        if self.job_threshold <= 0 or self.time_threshold <= 0:
            raise ValueError("job_threshold and time_threshold must be > 0")
        if self.decay_per_excess_job < 0 or self.aging_step < 0:
            raise ValueError("decay_per_excess_job and aging_step must be >= 0")


@dataclass
class UserStats:
    owner: str
    jobs_in_window: int = 0
    window_start: float = 0.0

    def roll(self, now: float, window: float) -> None:
        """Reset the count once ``now`` leaves the current window."""
        if now - self.window_start >= window:
            self.window_start = now
            self.jobs_in_window = 0


def effective_priority(stats: UserStats, wait_time: float, policy: PriorityPolicy) -> int:
    excess = max(0, stats.jobs_in_window - policy.job_threshold)
    decay = math.floor(policy.decay_per_excess_job * excess)
    aging = math.floor(policy.aging_step * math.floor(wait_time / policy.time_threshold))
    level = policy.base_level + decay - aging
    return min(max(level, 0), policy.num_levels - 1)


def sjf_order(burst: Iterable[Job]) -> list[Job]:
    return sorted(burst, key=lambda j: (j.processors_required, j.id))


@dataclass
class Promotion:
    job: int
    old_level: int
    new_level: int


class FeedbackQueues:
    """Priority levels of FIFO queues plus per-user frequency bookkeeping."""

    def __init__(self, policy: PriorityPolicy):
        self.policy = policy
        self.levels: list[deque] = [deque() for _ in range(policy.num_levels)]
        self.stats: dict[str, UserStats] = {}
        self._where: dict[int, int] = {}  # job id -> level
        self.enqueued = 0
        self.dequeued = 0
        self.withdrawn = 0

    def __len__(self):
        return len(self._where)

    def __contains__(self, job_id):
        return job_id in self._where

    def user_stats(self, owner: str, now: float) -> UserStats:
        st = self.stats.get(owner)
        if st is None:
            st = self.stats[owner] = UserStats(owner, 0, now)
        st.roll(now, self.policy.time_threshold)
        return st

    def enqueue_burst(self, burst: list[Job], now: float) -> int:
        """Queue a burst on a single level and return that level.

        The owner's frequency count includes the burst itself, so a burst
        that pushes the user past the job threshold is already demoted.
        """
        if not burst:
            return self.policy.base_level
        owner = burst[0].owner
        ids = set()
        for job in burst:
            if job.owner != owner or job.burst != burst[0].burst:
                raise ValueError("a burst must share owner and burst id")
            if job.id in self._where or job.id in ids:
                raise DuplicateEnqueue(f"job {job.id} is already queued")
            if job.state not in ("pending", "queued"):
                raise DuplicateEnqueue(f"job {job.id} is {job.state}; cannot enqueue")
            ids.add(job.id)
        stats = self.user_stats(owner, now)
        stats.jobs_in_window += len(burst)
        level = effective_priority(stats, 0.0, self.policy)
        ordered = sjf_order(burst) if self.policy.sjf else list(burst)
        for job in ordered:
            if job.state == "pending":
                job.advance("queued")
            job.current_level = level
            job.enqueue_time = now
            job.aging_steps = 0
            self.levels[level].append(job)
            self._where[job.id] = level
        self.enqueued += len(burst)
        return level

    def peek_job(self) -> Optional[Job]:
        for level in self.levels:
            if level:
                return level[0]
        return None

    def next_job(self) -> Optional[Job]:
        for level in self.levels:
            if level:
                job = level.popleft()
                del self._where[job.id]
                self.dequeued += 1
                return job
        return None

    def withdraw(self, job_id: int) -> Job:
        """Remove a queued job without serving it (hand-off to another site)."""
        level = self._where.pop(job_id)
        q = self.levels[level]
        for i, job in enumerate(q):
            if job.id == job_id:
                del q[i]
                self.withdrawn += 1
                return job
        raise AssertionError(f"index out of sync for job {job_id}")

    def apply_aging(self, now: float) -> list[Promotion]:
        T = self.policy.time_threshold
        moves = []
        for lvl in range(1, len(self.levels)):
            for job in self.levels[lvl]:
                steps = math.floor((now - job.enqueue_time) / T)
                if steps <= job.aging_steps:
                    continue
                up = (math.floor(self.policy.aging_step * steps)
                      - math.floor(self.policy.aging_step * job.aging_steps))
                job.aging_steps = steps
                if up > 0:
                    moves.append((job, lvl, max(0, lvl - up)))
        out = []
        for job, old, new in moves:
            self.levels[old].remove(job)
            self.levels[new].append(job)
            self._where[job.id] = new
            job.current_level = new
            out.append(Promotion(job.id, old, new))
        return out

    def queue_snapshot(self) -> dict:
        lengths = [len(level) for level in self.levels]
        return {"levels": lengths, "total": sum(lengths)}

    def jobs(self):
        """Queued jobs from highest to lowest priority, FIFO within a level."""
        for level in self.levels:
            yield from level


# Module-level spellings of the queue operations.

def enqueue_burst(burst, q: FeedbackQueues, now: float) -> int:
    return q.enqueue_burst(burst, now)


def next_job(q: FeedbackQueues):
    return q.next_job()


def apply_aging(q: FeedbackQueues, now: float):
    return q.apply_aging(now)


def queue_snapshot(q: FeedbackQueues) -> dict:
    return q.queue_snapshot()
