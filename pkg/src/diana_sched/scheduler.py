"""Meta-scheduling decisions: site selection, overload detection, export.

All functions are pure over a :class:`GridView` snapshot. Ties are broken
by ascending site id so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Optional, Sequence

from .costs import (CostBreakdown, CostWeights, JobDataSpec, SiteState, compute_cost,
                    data_transfer_cost, network_cost, route, tcp_throughput)
from .errors import NoRunnableSite, UndefinedEstimate
from .events import EventLog
from .queues import Job

DEFAULT_OVERLOAD_FACTOR = 5.0


@dataclass(frozen=True)
class GridView:
    sites: tuple
    topology: Mapping
    weights: CostWeights
    # (job id, site id) -> (network, dtc); valid while topology and hosting are fixed
    data_cache: Optional[dict] = field(default=None, compare=False, repr=False)

    def site(self, site_id: str) -> SiteState:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    def with_site(self, site: SiteState) -> "GridView":
        return replace(self, sites=tuple(site if s.id == site.id else s for s in self.sites))


@dataclass(frozen=True)
class Placement:
    burst: int
    site: str
    cost: CostBreakdown
    candidates: dict  # site id -> CostBreakdown summed over the burst


@dataclass(frozen=True)
class LittleEstimate:
    arrival_rate: float
    avg_wait: float
    predicted_queue: float
    service_capacity: float


class ExportDecision(NamedTuple):
    job_id: int
    destination: str
    local_total: float
    remote_total: float


def littles_formula(n: Optional[float] = None, r: Optional[float] = None,
                    w: Optional[float] = None) -> float:
    """Solve ``N = R * W`` for whichever of the three is omitted."""
    given = [x is not None for x in (n, r, w)]
    if sum(given) != 2:
        raise ValueError("exactly two of n, r, w must be given")
    for x in (n, r, w):
        if x is not None and not (math.isfinite(x) and x >= 0):
            raise ValueError(f"Little's formula inputs must be finite and >= 0, got {x!r}")
    if n is None:
        return r * w
    if r is None:
        if w == 0:
            raise UndefinedEstimate("cannot solve for R with W = 0")
        return n / w
    if r == 0:
        raise UndefinedEstimate("cannot solve for W with R = 0")
    return n / r


def resolve_data(job: Job, candidate: str, view: GridView) -> JobDataSpec:
    """Pick the input replica a job would read from if run at ``candidate``.

    A local replica wins; otherwise the hosting site with the fastest link
    to the candidate (ties by id). Jobs without a dataset keep their spec.
    """
    if job.dataset is None:
        return job.data
    hosts = sorted(s.id for s in view.sites if job.dataset in s.hosted_data)
    if not hosts:
        return job.data
    if candidate in hosts:
        src = candidate
    else:
        src = min(hosts, key=lambda h: (-tcp_throughput(route(view.topology, h, candidate)), h))
    if src == job.data.input_source:
        return job.data
    return replace(job.data, input_source=src)


def _data_terms(job: Job, site_id: str, view: GridView) -> tuple:
    """(network, dtc) for a job at a site; cached when the view carries a cache."""
    cache = view.data_cache
    key = (job.id, site_id)
    terms = cache.get(key) if cache is not None else None
    if terms is None:
        data = resolve_data(job, site_id, view)
        link = route(view.topology, data.input_source, site_id)
        net = 0.0 if link is None else network_cost(link, view.weights.b_ref)
        terms = (net, data_transfer_cost(data, site_id, view.topology))
        if cache is not None:
            cache[key] = terms
    return terms


def _combine(net, comp, dtc, w: CostWeights) -> CostBreakdown:
    # same arithmetic as costs.total_cost, so results are bit-identical
    return CostBreakdown(net, comp, dtc, w.alpha * net + w.beta * comp + w.gamma * dtc)


def job_cost(job: Job, site: SiteState, view: GridView) -> CostBreakdown:
    """``total_cost`` of one job at one site, with the replica resolved."""
    net, dtc = _data_terms(job, site.id, view)
    return _combine(net, compute_cost(site, view.weights), dtc, view.weights)


def runnable_sites(burst: Sequence[Job], view: GridView) -> list:
    need = max(j.processors_required for j in burst)
    return sorted((s for s in view.sites if s.processors >= need), key=lambda s: s.id)


def burst_costs(burst: Sequence[Job], view: GridView) -> dict:
    """Summed cost breakdown of the burst at every runnable site."""
    out = {}
    for site in runnable_sites(burst, view):
        net = comp = dtc = tot = 0.0
        site_comp = compute_cost(site, view.weights)
        for job in burst:
            j_net, j_dtc = _data_terms(job, site.id, view)
            c = _combine(j_net, site_comp, j_dtc, view.weights)
            net += c.network
            comp += c.compute
            dtc += c.dtc
            tot += c.total
        out[site.id] = CostBreakdown(net, comp, dtc, tot)
    return out


def _placement(burst, costs, chosen) -> Placement:
    return Placement(burst=burst[0].burst, site=chosen, cost=costs[chosen], candidates=costs)


def select_site(burst: Sequence[Job], view: GridView) -> Placement:
    """Place the whole burst on the site with the least summed total cost."""
    if not burst:
        raise ValueError("empty burst")
    costs = burst_costs(burst, view)
    if not costs:
        raise NoRunnableSite(f"no site has {max(j.processors_required for j in burst)} processors")
    chosen = min(costs, key=lambda sid: (costs[sid].total, sid))
    return _placement(burst, costs, chosen)


def greedy_select(burst: Sequence[Job], view: GridView) -> Placement:
    """Baseline: least compute cost only, ignoring data and network."""
    costs = burst_costs(burst, view)
    if not costs:
        raise NoRunnableSite("no runnable site for burst")
    comp = {sid: compute_cost(view.site(sid), view.weights) for sid in costs}
    chosen = min(comp, key=lambda sid: (comp[sid], sid))
    return _placement(burst, costs, chosen)


def random_select(burst: Sequence[Job], view: GridView, rng) -> Placement:
    """Baseline: uniform choice over runnable sites using the run's generator."""
    costs = burst_costs(burst, view)
    if not costs:
        raise NoRunnableSite("no runnable site for burst")
    ids = sorted(costs)
    return _placement(burst, costs, ids[int(rng.integers(len(ids)))])


def should_export(site: SiteState, est: LittleEstimate,
                  overload_factor: float = DEFAULT_OVERLOAD_FACTOR) -> bool:
    if est.arrival_rate > est.service_capacity:
        return True
    return site.queue_length > site.processors * overload_factor


def export_budget(site: SiteState, est: LittleEstimate, window: float,
                  overload_factor: float = DEFAULT_OVERLOAD_FACTOR) -> int:
    """How many jobs may leave before ``should_export`` turns false.

    Each export shortens the queue by one and removes one arrival from the
    estimate window.
    """
    limit = site.processors * overload_factor
    n = 0
    while n < site.queue_length:
        rate = max(0.0, est.arrival_rate - n / window)
        if not (rate > est.service_capacity or site.queue_length - n > limit):
            break
        n += 1
    return n


def export_jobs(jobs: Sequence[Job], from_site: str, view: GridView,
                limit: Optional[int] = None) -> list:
    """Send each job to the cheapest remote site if that beats staying put.

    Jobs are considered in the given order, stopping after ``limit``
    exports. The working view is updated after every move (queue shrinks at
    home, grows at the destination), so later decisions see earlier ones.
    Exported jobs lose ``remigratable``.
    """
    decisions = []
    w = view.weights
    home = view.site(from_site)
    remotes = {s.id: s for s in view.sites if s.id != from_site}
    comp = {s.id: compute_cost(s, w) for s in view.sites}
    order = sorted(remotes)
    for job in jobs:
        if limit is not None and len(decisions) >= limit:
            break
        if not job.remigratable:
            continue
        net, dtc = _data_terms(job, from_site, view)
        local = _combine(net, comp[from_site], dtc, w).total
        best = None
        for sid in order:
            if remotes[sid].processors < job.processors_required:
                continue
            net, dtc = _data_terms(job, sid, view)
            c = _combine(net, comp[sid], dtc, w).total
            if best is None or c < best[1]:
                best = (sid, c)
        if best is None or not best[1] < local:
            continue
        dest, remote = best
        job.remigratable = False
        decisions.append(ExportDecision(job.id, dest, local, remote))
        home = replace(home, queue_length=max(0, home.queue_length - 1))
        remotes[dest] = replace(remotes[dest], queue_length=remotes[dest].queue_length + 1)
        comp[from_site] = compute_cost(home, w)
        comp[dest] = compute_cost(remotes[dest], w)
    return decisions


def estimate_arrivals(log: EventLog, site: str, window: float,
                      now: Optional[float] = None) -> LittleEstimate:
    """Little's-formula estimate for ``site`` over ``(now - window, now]``.

    Arrivals are jobs entering the site's queues, net of jobs exported away
    in the same window. Capacity is processors over mean processor-seconds
    per completed job, or the nominal rate of recent arrivals when nothing
    completed.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    if now is None:
        now = log.events[-1].time if log.events else 0.0
    info = log.meta.get("sites", {}).get(site, {})
    processors = info.get("processors", 1)
    capability = info.get("capability")

    arrivals = exported = 0
    waits, work_done, work_in = [], [], []
    for e in log.between(now - window, now):
        if e.site != site:
            continue
        if e.kind == "enqueue":
            arrivals += 1
            work_in.append(e.payload["procs"] * e.payload["demand"])
        elif e.kind == "export":
            exported += 1
        elif e.kind == "transfer_start" and e.payload.get("leg") == "input":
            waits.append(e.payload["waited"])
        elif e.kind == "exec_end":
            work_done.append(e.payload["procs"] * e.payload["service"])
    rate = max(0, arrivals - exported) / window
    wait = sum(waits) / len(waits) if waits else 0.0
    if work_done:
        capacity = processors / (sum(work_done) / len(work_done))
    elif work_in and capability:
        capacity = processors * capability / (sum(work_in) / len(work_in))
    else:
        capacity = math.inf
    return LittleEstimate(rate, wait, littles_formula(r=rate, w=wait), capacity)
