"""Performance indicators and plot-ready series derived from event logs.

Everything here is a pure function of an :class:`EventLog`; no simulator
state is consulted.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import LogIntegrityError
from .events import EventLog

SERIES_KINDS = ("local_vs_migrated_over_time", "exec_time_vs_job_count")

# Position of each lifecycle milestone; a job's milestones must appear in order.
_STAGE = {"arrival": 0, "placement": 1, "enqueue": 1, "transfer_start": 2,
          "transfer_end": 3, "exec_start": 4, "exec_end": 5}


@dataclass
class JobRecord:
    id: int
    arrival: float = math.nan
    enqueue: float = math.nan  # first enqueue
    dequeue: float = math.nan  # input stage-in start
    staged: float = math.nan
    exec_start: float = math.nan
    exec_end: float = math.nan
    delivered: float = math.nan
    site: str = ""
    procs: int = 0
    migrated: bool = False

    @property
    def completed(self) -> bool:
        return not math.isnan(self.exec_end)

    @property
    def finish(self) -> float:
        return self.exec_end if math.isnan(self.delivered) else self.delivered

    @property
    def transfer(self) -> float:
        return self.staged - self.dequeue

    @property
    def turnaround(self) -> float:
        return self.finish - self.arrival

    @property
    def waiting(self) -> float:
        return self.exec_start - self.enqueue - self.transfer

    @property
    def response(self) -> float:
        return self.exec_start - self.arrival


def job_records(log: EventLog) -> dict:
    """Replay the log into per-job records, checking it is well formed."""
    jobs: dict[int, JobRecord] = {}
    stage: dict[int, int] = {}
    last_time, last_seq = -math.inf, -1
    for e in log.events:
        if e.seq <= last_seq or e.time < last_time:
            raise LogIntegrityError(f"event seq={e.seq} is out of order", e)
        last_time, last_seq = e.time, e.seq
        if e.job is None or e.kind not in _STAGE and e.kind != "export":
            continue
        rec = jobs.get(e.job)
        if rec is None:
            if e.kind != "arrival":
                raise LogIntegrityError(f"event seq={e.seq} ({e.kind}) precedes arrival "
                                        f"of job {e.job}", e)
            rec = jobs[e.job] = JobRecord(e.job)
            stage[e.job] = 0
        if e.kind == "export":
            if rec.migrated:
                raise LogIntegrityError(f"event seq={e.seq}: job {e.job} exported twice", e)
            if stage[e.job] != 1:
                raise LogIntegrityError(f"event seq={e.seq}: job {e.job} exported while "
                                        "not queued", e)
            rec.migrated = True
            continue
        leg = e.payload.get("leg")
        if e.kind == "arrival":
            if not math.isnan(rec.arrival):
                raise LogIntegrityError(f"event seq={e.seq}: duplicate arrival of job {e.job}", e)
            rec.arrival = e.time
            continue
        if leg == "output":
            if stage[e.job] != 5:
                raise LogIntegrityError(f"event seq={e.seq}: output transfer of job {e.job} "
                                        "before exec_end", e)
            if e.kind == "transfer_end":
                rec.delivered = e.time
            continue
        want = _STAGE[e.kind]
        if want < stage[e.job] or want > stage[e.job] + 1:
            raise LogIntegrityError(f"event seq={e.seq} ({e.kind}) out of order for "
                                    f"job {e.job}", e)
        stage[e.job] = want
        if e.kind == "enqueue":
            if math.isnan(rec.enqueue):
                rec.enqueue = e.time
            rec.site = e.site
        elif e.kind == "transfer_start":
            rec.dequeue = e.time
        elif e.kind == "transfer_end":
            rec.staged = e.time
        elif e.kind == "exec_start":
            rec.exec_start = e.time
        elif e.kind == "exec_end":
            if not e.time > rec.exec_start:
                raise LogIntegrityError(f"event seq={e.seq}: exec_end not after exec_start "
                                        f"for job {e.job}", e)
            rec.exec_end = e.time
            rec.site = e.site
            rec.procs = e.payload.get("procs", 1)
    return jobs


@dataclass
class MetricsSummary:
    completed: int = 0
    makespan: float = 0.0
    throughput: float = 0.0
    mean_turnaround: float = 0.0
    median_turnaround: float = 0.0
    p95_turnaround: float = 0.0
    mean_waiting: float = 0.0
    mean_response: float = 0.0
    cpu_utilization: dict = field(default_factory=dict)
    jobs_local: int = 0
    jobs_migrated: int = 0
    littles_residual: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(log: EventLog) -> MetricsSummary:
    recs = job_records(log)
    sites = log.meta.get("sites", {})
    done = [r for r in recs.values() if r.completed]
    if not done:
        return MetricsSummary(cpu_utilization={s: 0.0 for s in sites})
    start = min(r.arrival for r in recs.values())
    makespan = max(r.finish for r in done) - start
    turn = np.array([r.turnaround for r in done])
    busy = defaultdict(float)
    for r in done:
        busy[r.site] += r.procs * (r.exec_end - r.exec_start)
    util = {}
    for sid, info in sites.items():
        util[sid] = busy[sid] / (info["processors"] * makespan) if makespan > 0 else 0.0
    migrated = sum(r.migrated for r in done)
    return MetricsSummary(
        completed=len(done),
        makespan=makespan,
        throughput=len(done) / makespan if makespan > 0 else 0.0,
        mean_turnaround=float(turn.mean()),
        median_turnaround=float(np.median(turn)),
        p95_turnaround=float(np.percentile(turn, 95)),
        mean_waiting=float(np.mean([r.waiting for r in done])),
        mean_response=float(np.mean([r.response for r in done])),
        cpu_utilization=util,
        jobs_local=len(done) - migrated,
        jobs_migrated=migrated,
        littles_residual=littles_residual(log, makespan, start) if makespan > 0 else 0.0,
    )


def littles_residual(log: EventLog, window: float, start: float = None) -> float:
    """Relative gap ``|N - R*W| / max(N, 1)`` over ``[start, start + window)``.

    N is the time-averaged number of queued jobs (not counting those in
    service), R the rate of jobs entering the queues and W their mean
    queueing delay. ``start`` defaults to the first arrival.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    recs = [r for r in job_records(log).values() if not math.isnan(r.enqueue)]
    if not recs:
        return 0.0
    if start is None:
        start = min(r.arrival for r in recs)
    end = start + window
    horizon = log.events[-1].time
    area = 0.0
    waits = []
    for r in recs:
        left = r.dequeue if not math.isnan(r.dequeue) else horizon
        area += max(0.0, min(left, end) - max(r.enqueue, start))
        if start <= r.enqueue < end:
            waits.append(left - r.enqueue)
    n_bar = area / window
    r_bar = len(waits) / window
    w_bar = sum(waits) / len(waits) if waits else 0.0
    return abs(n_bar - r_bar * w_bar) / max(n_bar, 1.0)


@dataclass
class Table:
    columns: list
    rows: list

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v
                        for v in row])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


FIG5_MEASURES = ("mean_turnaround", "makespan")


def series(logs: Union[EventLog, Sequence[EventLog]], kind: str, bucket: float = 1,
           labels: Optional[Sequence[str]] = None, measure: str = "mean_turnaround") -> Table:
    """Plot-ready table for the local/migrated timeline or the job-count sweep.

    ``local_vs_migrated_over_time`` takes one log and counts completions per
    ``bucket`` seconds, cumulatively. ``exec_time_vs_job_count`` takes one
    log (mean turnaround of the first n submitted jobs, n stepping by
    ``bucket``) or several logs: then there is one row per job count and one
    column per label (default: the run's scheduler kind), holding
    ``measure`` averaged over the runs that share both.
    """
    if kind not in SERIES_KINDS:
        raise ValueError(f"unknown series kind {kind!r}; expected one of {SERIES_KINDS}")
    if not bucket > 0:
        raise ValueError("bucket must be > 0")
    if isinstance(logs, EventLog):
        logs = [logs]
    if kind == "local_vs_migrated_over_time":
        if len(logs) != 1:
            raise ValueError("local_vs_migrated_over_time takes a single log")
        return _timeline(logs[0], bucket)
    if labels is None and len(logs) == 1:
        return _prefix_turnaround(logs[0], int(bucket))
    if measure not in FIG5_MEASURES:
        raise ValueError(f"unknown measure {measure!r}; expected one of {FIG5_MEASURES}")
    if labels is None:
        labels = [log.meta.get("scheduler_kind", "run") for log in logs]
    if len(labels) != len(logs):
        raise ValueError("need one label per log")
    return _sweep_table(logs, labels, measure)


def _timeline(log, bucket):
    done = [r for r in job_records(log).values() if r.completed]
    t0 = log.meta.get("start_time", 0.0)
    if not done:
        return Table(["time", "local", "migrated"], [])
    n = max(1, math.ceil((max(r.exec_end for r in done) - t0) / bucket))
    local = [0] * n
    moved = [0] * n
    for r in done:
        k = min(n - 1, max(0, math.ceil((r.exec_end - t0) / bucket) - 1))
        (moved if r.migrated else local)[k] += 1
    rows, cl, cm = [], 0, 0
    for k in range(n):
        cl += local[k]
        cm += moved[k]
        rows.append((t0 + (k + 1) * bucket, cl, cm))
    return Table(["time", "local", "migrated"], rows)


def _prefix_turnaround(log, step):
    step = max(1, step)
    recs = sorted(job_records(log).values(), key=lambda r: (r.arrival, r.id))
    rows = []
    for n in range(step, len(recs) + 1, step):
        done = [r.turnaround for r in recs[:n] if r.completed]
        rows.append((n, float(np.mean(done)) if done else 0.0))
    return Table(["jobs", "mean_turnaround"], rows)


def _sweep_table(logs, labels, measure):
    acc = defaultdict(lambda: defaultdict(list))
    columns = []
    for log, label in zip(logs, labels):
        if label not in columns:
            columns.append(label)
        m = compute_metrics(log)
        acc[len(job_records(log))][label].append(getattr(m, measure))
    rows = []
    for n in sorted(acc):
        row = [n]
        for label in columns:
            vals = acc[n].get(label)
            row.append(float(np.mean(vals)) if vals else None)
        rows.append(tuple(row))
    return Table(["jobs", *columns], rows)
