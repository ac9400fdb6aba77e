"""Deterministic discrete-event simulation of a multi-site grid.

Bursts arrive, the meta-scheduler places each burst on one site, jobs wait
in that site's feedback queues, stage their input and executable in, run
non-preemptively and finally ship their output to the user. A periodic tick
ages queued jobs and, under the DIANA policy, exports work away from
overloaded sites.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field, replace
from itertools import islice
from typing import Optional

from .costs import CostWeights, SiteState, transfer_legs
from .errors import SimulationCorrupt, UnknownRoute, UnrunnableAtSite
from .events import EventLog
from .queues import FeedbackQueues, Job, PriorityPolicy
from .scheduler import (DEFAULT_OVERLOAD_FACTOR, GridView, estimate_arrivals, export_budget,
                        export_jobs, greedy_select, job_cost, random_select, resolve_data,
                        select_site)
from .workload import WorkloadSpec, generate_workload, rng_streams

SCHEDULER_KINDS = ("diana", "greedy-compute", "random")


@dataclass
class Scenario:
    sites: list
    topology: dict  # (src, dst) -> NetworkLink
    weights: CostWeights = field(default_factory=CostWeights)
    policy: PriorityPolicy = field(default_factory=PriorityPolicy)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    scheduler_kind: str = "diana"
    duration: float = 1000.0
    seed: int = 0
    aging_tick: Optional[float] = None  # default: time_threshold / 4
    estimate_window: Optional[float] = None  # default: time_threshold
    overload_factor: float = DEFAULT_OVERLOAD_FACTOR
    export_enabled: bool = True
    min_loss: float = 1e-6
    drain: bool = True  # keep running past `duration` until every job finishes
    series_bucket: Optional[float] = None

    @property
    def tick(self) -> float:
        return self.aging_tick if self.aging_tick is not None else self.policy.time_threshold / 4

    @property
    def window(self) -> float:
        return (self.estimate_window if self.estimate_window is not None
                else self.policy.time_threshold)

    def to_dict(self) -> dict:
        """Canonical plain-data form; field names match the scenario file."""
        from dataclasses import asdict
        return {
            "sites": [{"id": s.id, "capability": s.capability, "processors": s.processors,
                       "hosted_data": sorted(s.hosted_data)} for s in self.sites],
            "topology": [asdict(self.topology[k]) for k in sorted(self.topology)],
            "weights": asdict(self.weights),
            "policy": asdict(self.policy),
            "workload": self.workload.as_dict(),
            "scheduler_kind": self.scheduler_kind,
            "duration": self.duration,
            "seed": self.seed,
            "aging_tick": self.tick,
            "estimate_window": self.window,
            "overload_factor": self.overload_factor,
            "export_enabled": self.export_enabled,
            "min_loss": self.min_loss,
            "drain": self.drain,
            "series_bucket": self.series_bucket,
        }


def scenario_digest(scenario: Scenario) -> str:
    blob = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def job_service_time(job: Job, site: SiteState) -> float:
    if job.processors_required > site.processors:
        raise UnrunnableAtSite(f"job {job.id} needs {job.processors_required} processors, "
                               f"site {site.id} has {site.processors}")
    if not site.capability > 0:
        raise ValueError(f"site {site.id} has non-positive capability")
    return job.compute_demand / site.capability


@dataclass(frozen=True)
class TransferPlan:
    stage_in: float  # input + executable legs, before execution
    stage_out: float  # output leg, after execution


def transfer_phase(job: Job, site_id: str, view: GridView) -> TransferPlan:
    t_in, t_out, t_exe = transfer_legs(resolve_data(job, site_id, view), site_id, view.topology)
    return TransferPlan(stage_in=t_in + t_exe, stage_out=t_out)


class _Site:
    def __init__(self, state: SiteState, policy: PriorityPolicy):
        self.state = state
        self.queues = FeedbackQueues(policy)
        self.free = state.processors
        self.running: dict[int, Job] = {}  # processors reserved, transferring or running

    def snapshot(self) -> SiteState:
        st = self.state
        return SiteState(st.id, st.capability, len(self.queues),
                         (st.processors - self.free) / st.processors, st.processors,
                         st.hosted_data)


class Simulation:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.log = EventLog()
        self._heap = []
        self._seq = 0
        self._tick_at = None
        self._plans = {}
        self._costs = {}
        self.now = 0.0
        self.counts = {"arrived": 0, "done": 0}

    # -- event heap ------------------------------------------------------
    def _push(self, t, kind, data=None):
        heapq.heappush(self._heap, (t, self._seq, kind, data))
        self._seq += 1

    def _emit(self, kind, job=None, site=None, **payload):
        return self.log.append(self.now, kind, job, site, payload)

    # -- setup -----------------------------------------------------------
    def _setup(self):
        sc = self.sc
        topo = {}
        for key, link in sorted(sc.topology.items()):
            if link.loss_prob < sc.min_loss:
                topo[key] = replace(link, loss_prob=sc.min_loss)
            else:
                topo[key] = link
        self.topology = topo
        ids = [s.id for s in sc.sites]
        max_procs = max(s.processors for s in sc.sites)
        self.workload = generate_workload(sc.workload, sc.seed, ids, max_processors=max_procs)
        hosted = {s.id: set(s.hosted_data) for s in sc.sites}
        for d, hosts in self.workload.hosting.items():
            for h in hosts:
                hosted[h].add(d)
        self.sites = {s.id: _Site(replace(s, queue_length=0, load=0.0,
                                          hosted_data=frozenset(hosted[s.id])), sc.policy)
                      for s in sorted(sc.sites, key=lambda s: s.id)}
        self.rng = rng_streams(sc.seed)["scheduler"]
        self.log.meta = {
            "scenario_digest": scenario_digest(sc),
            "scheduler_kind": sc.scheduler_kind,
            "seed": sc.seed,
            "duration": sc.duration,
            "sites": {sid: {"processors": s.state.processors, "capability": s.state.capability}
                      for sid, s in self.sites.items()},
            "start_time": 0.0,
        }
        for key, link in sorted(sc.topology.items()):
            if link.loss_prob < sc.min_loss:
                self._emit("warning", site=key[0],
                           message=f"loss_prob {link.loss_prob!r} on {key[0]}->{key[1]} "
                                   f"clamped to {sc.min_loss!r}")
        n = 0
        for burst in self.workload.bursts:
            if burst.time < sc.duration:
                self._push(burst.time, "burst", burst)
                n += len(burst.jobs)
        self.log.meta["jobs"] = n

    def view(self) -> GridView:
        return GridView(sites=tuple(s.snapshot() for s in self.sites.values()),
                        topology=self.topology, weights=self.sc.weights,
                        data_cache=self._costs)

    # -- main loop -------------------------------------------------------
    def run(self) -> EventLog:
        self._setup()
        while self._heap:
            t, _, kind, data = heapq.heappop(self._heap)
            if not self.sc.drain and t > self.sc.duration:
                break
            if t < self.now:
                raise SimulationCorrupt(f"time went backwards: {t} < {self.now}")
            self.now = t
            getattr(self, "_on_" + kind)(data)
            self._check_conservation()
        self.log.meta["end_time"] = self.now
        return self.log

    def _check_conservation(self):
        queued = sum(len(s.queues) for s in self.sites.values())
        busy = sum(len(s.running) for s in self.sites.values())
        if self.counts["arrived"] != self.counts["done"] + queued + busy:
            raise SimulationCorrupt(
                f"t={self.now}: arrived {self.counts['arrived']} != done "
                f"{self.counts['done']} + queued {queued} + in service {busy}")

    # -- handlers --------------------------------------------------------
    def _on_burst(self, burst):
        jobs = burst.jobs
        for job in jobs:
            self.counts["arrived"] += 1
            self._emit("arrival", job.id, burst.home, burst=burst.id, owner=job.owner)
        view = self.view()
        kind = self.sc.scheduler_kind
        try:
            if kind == "diana":
                placement = select_site(jobs, view)
            elif kind == "greedy-compute":
                placement = greedy_select(jobs, view)
            else:
                placement = random_select(jobs, view, self.rng)
            dest = placement.site
        except UnknownRoute as exc:
            self._emit("warning", site=burst.home, burst=burst.id,
                       message=f"placement failed ({exc}); running at home site")
            dest, placement = burst.home, None
        snap = view.site(dest)
        cands = ({sid: c.total for sid, c in placement.candidates.items()}
                 if placement else {})
        for job in jobs:
            cost = job_cost(job, snap, view)
            self._emit("placement", job.id, dest, burst=burst.id, cost=cost.as_dict(),
                       candidates=cands)
        self._enqueue(dest, jobs)
        self._dispatch(dest)

    def _enqueue(self, sid, jobs):
        site = self.sites[sid]
        level = site.queues.enqueue_burst(jobs, self.now)
        base = self.sc.policy.base_level
        queue = site.queues.levels[level]
        # the burst now sits at the tail of its level, in service order
        for job in islice(queue, len(queue) - len(jobs), None):
            job.site = sid
            self._emit("enqueue", job.id, sid, level=level, procs=job.processors_required,
                       demand=job.compute_demand, owner=job.owner)
            if level > base:
                self._emit("demotion", job.id, sid, old_level=base, new_level=level)
        if self._tick_at is None:
            k = math.floor(self.now / self.sc.tick) + 1
            self._tick_at = k
            self._push(k * self.sc.tick, "tick", k)

    def _dispatch(self, sid):
        site = self.sites[sid]
        while True:
            job = site.queues.peek_job()
            if job is None or job.processors_required > site.free:
                return  # head-of-line job waits for processors; no backfilling
            try:
                plan = transfer_phase(job, sid, self.view())
            except UnknownRoute as exc:
                self._reroute_home(site, job, exc)
                continue
            site.queues.next_job()
            site.free -= job.processors_required
            site.running[job.id] = job
            job.advance("transferring")
            self._plans[job.id] = plan
            self._emit("transfer_start", job.id, sid, leg="input", duration=plan.stage_in,
                       waited=self.now - job.enqueue_time)
            self._push(self.now + plan.stage_in, "staged", (sid, job))

    def _reroute_home(self, site, job, exc):
        home = job.data.output_sink
        if home == site.state.id or home not in self.sites:
            raise SimulationCorrupt(f"job {job.id}: no route at its own home site ({exc})")
        site.queues.withdraw(job.id)
        self._emit("warning", job.id, site.state.id,
                   message=f"transfer route missing ({exc}); job re-queued at {home}")
        self._enqueue(home, [job])
        self._dispatch(home)

    def _on_staged(self, data):
        sid, job = data
        site = self.sites[sid]
        self._emit("transfer_end", job.id, sid, leg="input")
        service = job_service_time(job, site.state)
        in_use = sum(j.processors_required for j in site.running.values())
        if in_use > site.state.processors:
            raise SimulationCorrupt(f"site {sid} over capacity: {in_use} > {site.state.processors}")
        job.advance("running")
        self._emit("exec_start", job.id, sid, service=service)
        self._push(self.now + service, "executed", (sid, job))

    def _on_executed(self, data):
        sid, job = data
        site = self.sites[sid]
        self._emit("exec_end", job.id, sid, service=job.compute_demand / site.state.capability,
                   procs=job.processors_required)
        del site.running[job.id]
        site.free += job.processors_required
        job.advance("done")
        self.counts["done"] += 1
        out = self._plans.pop(job.id).stage_out
        self._emit("transfer_start", job.id, sid, leg="output", duration=out)
        self._push(self.now + out, "delivered", (sid, job))
        self._dispatch(sid)

    def _on_delivered(self, data):
        sid, job = data
        self._emit("transfer_end", job.id, sid, leg="output")

    def _on_tick(self, k):
        for sid, site in self.sites.items():
            for p in site.queues.apply_aging(self.now):
                self._emit("promotion", p.job, sid, old_level=p.old_level, new_level=p.new_level)
            self._dispatch(sid)
        if self.sc.scheduler_kind == "diana" and self.sc.export_enabled and len(self.sites) > 1:
            for sid in self.sites:
                self._export_from(sid)
        if any(len(s.queues) for s in self.sites.values()):
            self._tick_at = k + 1
            self._push((k + 1) * self.sc.tick, "tick", k + 1)
        else:
            self._tick_at = None

    def _export_from(self, sid):
        site = self.sites[sid]
        window = self.sc.window
        est = estimate_arrivals(self.log, sid, window, now=self.now)
        budget = export_budget(site.snapshot(), est, window, self.sc.overload_factor)
        if budget == 0:
            return
        # lowest-priority level first, newest first within a level
        candidates = [j for level in reversed(site.queues.levels) for j in reversed(level)
                      if j.remigratable]
        decisions = export_jobs(candidates, sid, self.view(), limit=budget)
        for job_id, dest, local, remote in decisions:
            job = site.queues.withdraw(job_id)
            self._emit("export", job_id, sid, to=dest, local_total=local, remote_total=remote,
                       arrival_rate=est.arrival_rate,
                       capacity=(est.service_capacity if math.isfinite(est.service_capacity)
                                 else None))
            self._enqueue(dest, [job])
        for dest in sorted({d.destination for d in decisions}):
            self._dispatch(dest)
        if decisions:
            self._dispatch(sid)


def run(scenario: Scenario) -> EventLog:
    """Simulate ``scenario`` and return its complete event log."""
    return Simulation(scenario).run()
