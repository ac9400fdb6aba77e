"""Synthetic bulk-submission workloads.

Each user submits a sequence of bursts; a burst is a handful of jobs that
read the same dataset and are placed together. All randomness flows from
one seed through independent numpy streams, so a (spec, seed) pair always
yields the same jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .costs import JobDataSpec
from .queues import Job

DIST_KINDS = ("constant", "uniform", "exponential")


@dataclass(frozen=True)
class Dist:
    kind: str = "constant"
    value: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    mean: float = 1.0

    @classmethod
    def constant(cls, value):
        return cls("constant", value=value)

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", lo=lo, hi=hi)

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", mean=mean)

    def as_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "uniform":
            return {"kind": "uniform", "lo": self.lo, "hi": self.hi}
        return {"kind": "exponential", "mean": self.mean}

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "uniform":
            return float(rng.uniform(self.lo, self.hi))
        if self.kind == "exponential":
            return float(rng.exponential(self.mean))
        raise ValueError(f"unknown distribution kind {self.kind!r}")

    def sample_int(self, rng: np.random.Generator) -> int:
        if self.kind == "constant":
            return int(self.value)
        if self.kind == "uniform":
            return int(rng.integers(int(self.lo), int(self.hi) + 1))
        return int(math.ceil(self.sample(rng)))


@dataclass(frozen=True)
class DataPlacement:
    kind: str = "single-home"  # or "replicated"
    k: int = 1
    site_weights: Optional[tuple] = None  # relative hosting likelihood per site

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "k": self.k}
        if self.site_weights is not None:
            d["site_weights"] = list(self.site_weights)
        return d


@dataclass(frozen=True)
class WorkloadSpec:
    users: int = 1
    bursts_per_user: int = 1
    burst_size: Dist = Dist.constant(1)
    inter_arrival: Dist = Dist.constant(10.0)
    compute_demand: Dist = Dist.constant(100.0)
    processors_required: Dist = Dist.constant(1)
    input_bytes: Dist = Dist.constant(0.0)
    output_bytes: Dist = Dist.constant(0.0)
    executable_bytes: Dist = Dist.constant(0.0)
    data_placement: DataPlacement = DataPlacement()
    datasets: Optional[int] = None  # defaults to one per user
    user_sites: Optional[tuple] = None  # home site per user, cycled
    start_time: float = 0.0
    demand_per_processor: bool = False  # scale compute demand by processors required

    def as_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if hasattr(v, "as_dict"):
                v = v.as_dict()
            elif isinstance(v, tuple):
                v = list(v)
            out[name] = v
        return out


@dataclass
class Burst:
    time: float
    id: int
    owner: str
    home: str
    jobs: list = field(default_factory=list)


@dataclass
class Workload:
    bursts: list
    hosting: dict  # dataset id -> sorted list of hosting site ids

    @property
    def num_jobs(self) -> int:
        return sum(len(b.jobs) for b in self.bursts)


def rng_streams(seed: int) -> dict:
    """Independent generators for data placement, jobs and random placement."""
    ss = np.random.SeedSequence(seed)
    placement, jobs, scheduler = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3))
    return {"placement": placement, "jobs": jobs, "scheduler": scheduler}


def place_datasets(spec: WorkloadSpec, site_ids: Sequence[str], rng) -> dict:
    n = spec.datasets if spec.datasets is not None else max(spec.users, 1)
    ids = list(site_ids)
    if spec.data_placement.site_weights is not None:
        p = np.asarray(spec.data_placement.site_weights, dtype=float)
        p = p / p.sum()
    else:
        p = None
    k = 1 if spec.data_placement.kind == "single-home" else min(spec.data_placement.k, len(ids))
    hosting = {}
    for d in range(n):
        chosen = rng.choice(len(ids), size=k, replace=False, p=p)
        hosting[f"d{d}"] = [ids[i] for i in chosen]  # first entry is the primary copy
    return hosting


def generate_workload(spec: WorkloadSpec, seed: int, site_ids: Sequence[str],
                      max_processors: Optional[int] = None) -> Workload:
    streams = rng_streams(seed)
    hosting = place_datasets(spec, site_ids, streams["placement"])
    rng = streams["jobs"]
    homes = list(spec.user_sites) if spec.user_sites else list(site_ids)
    datasets = sorted(hosting, key=lambda d: int(d[1:]))

    raw = []  # (time, user index, burst index within user, owner, home, job fields)
    for u in range(spec.users):
        owner = f"u{u}"
        home = homes[u % len(homes)]
        t = spec.start_time
        for b in range(spec.bursts_per_user):
            t += max(0.0, spec.inter_arrival.sample(rng))
            size = max(1, spec.burst_size.sample_int(rng))
            dataset = datasets[int(rng.integers(len(datasets)))]
            jobs = []
            for _ in range(size):
                procs = max(1, spec.processors_required.sample_int(rng))
                if max_processors is not None:
                    procs = min(procs, max_processors)
                demand = max(1e-9, spec.compute_demand.sample(rng))
                if spec.demand_per_processor:
                    demand *= procs
                sizes = tuple(max(0.0, d.sample(rng)) for d in
                              (spec.input_bytes, spec.output_bytes, spec.executable_bytes))
                jobs.append((procs, demand, sizes))
            raw.append((t, u, b, owner, home, dataset, jobs))

    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    bursts = []
    next_job = 0
    for bid, (t, _, _, owner, home, dataset, jobs) in enumerate(raw):
        burst = Burst(time=t, id=bid, owner=owner, home=home)
        for procs, demand, (nin, nout, nexe) in jobs:
            data = JobDataSpec(input_bytes=nin, output_bytes=nout, executable_bytes=nexe,
                               input_source=hosting[dataset][0], output_sink=home,
                               executable_source=home)
            burst.jobs.append(Job(id=next_job, owner=owner, burst=bid,
                                  processors_required=procs, compute_demand=demand,
                                  data=data, submit_time=t, dataset=dataset))
            next_job += 1
        bursts.append(burst)
    return Workload(bursts=bursts, hosting={d: sorted(h) for d, h in hosting.items()})
