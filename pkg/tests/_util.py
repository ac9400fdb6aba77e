"""Scenario builders shared by the test modules."""

from collections import defaultdict

from diana_sched import CostWeights, NetworkLink, PriorityPolicy, Scenario, SiteState
from diana_sched.workload import DataPlacement, Dist, WorkloadSpec


def mesh(ids, bw=1e9, loss=1e-4, rtt=0.05):
    return {(a, b): NetworkLink(a, b, bw, loss, rtt) for a in ids for b in ids if a != b}


def skewed_grid(jobs_per_user_bursts=10, seed=1, kind="diana", users=4, beta=60.0):
    """Four equal sites, most data at A; the scheduler-comparison family."""
    ids = "ABCD"
    return Scenario(
        sites=[SiteState(x, 10.0, processors=8) for x in ids],
        topology=mesh(ids),
        weights=CostWeights(beta=beta),
        workload=WorkloadSpec(
            users=users, bursts_per_user=jobs_per_user_bursts, burst_size=Dist.constant(5),
            inter_arrival=Dist.exponential(100.0), compute_demand=Dist.uniform(500, 1500),
            processors_required=Dist.uniform(1, 4), input_bytes=Dist.uniform(1e8, 2e9),
            output_bytes=Dist.constant(1e7), executable_bytes=Dist.constant(1e6),
            datasets=16, data_placement=DataPlacement("single-home", 1, (8, 1, 1, 1))),
        scheduler_kind=kind, duration=1e6, seed=seed)


def hot_site(rate, procs=4, size=5, horizon=2000.0, seed=0):
    """All users and data at A; submission rate in jobs/s. A serves procs/10 jobs/s."""
    ids = "ABC"
    return Scenario(
        sites=[SiteState(x, 10.0, processors=procs) for x in ids],
        topology=mesh(ids),
        workload=WorkloadSpec(
            users=1, bursts_per_user=int(horizon * rate / size) + 1,
            burst_size=Dist.constant(size), inter_arrival=Dist.constant(size / rate),
            compute_demand=Dist.constant(100.0), input_bytes=Dist.constant(1e8),
            output_bytes=Dist.constant(1e6), executable_bytes=Dist.constant(1e6),
            data_placement=DataPlacement("single-home", 1, (1, 0, 0)),
            user_sites=("A",), datasets=1),
        duration=1e6, seed=seed)


def single_site(workload, procs=4, capability=10.0, policy=None, seed=0):
    return Scenario(sites=[SiteState("A", capability, processors=procs)], topology={},
                    workload=workload, policy=policy or PriorityPolicy(), duration=1e7,
                    seed=seed)


def replay(log):
    """Independent per-job timeline from raw events: {job: {milestone: time}}."""
    out = defaultdict(dict)
    for e in log.events:
        if e.job is None:
            continue
        rec = out[e.job]
        leg = e.payload.get("leg")
        if e.kind == "transfer_start" and leg == "output":
            rec["out_start"] = e.time
        elif e.kind == "transfer_end" and leg == "output":
            rec["out_end"] = e.time
        elif e.kind == "export":
            rec["exports"] = rec.get("exports", 0) + 1
        elif e.kind in ("enqueue", "placement"):
            rec.setdefault(e.kind, e.time)
            rec[e.kind + "_site"] = e.site
        else:
            rec[e.kind] = e.time
            if e.kind == "exec_end":
                rec["procs"] = e.payload["procs"]
                rec["site"] = e.site
    return dict(out)
