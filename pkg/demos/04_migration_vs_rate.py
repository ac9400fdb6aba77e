# %% [markdown]
# # Migrations as the submission rate grows
#
# One site receives every job; two identical neighbours sit idle. While the
# arrival rate stays under what the site can serve nothing moves. Above it the
# queue is trimmed by exporting jobs, and the number exported climbs with the
# rate.

# %%
import numpy as np

from diana_sched import (CostWeights, DataPlacement, Dist, NetworkLink, Scenario, SiteState,
                         WorkloadSpec, compute_metrics, run)

PROCS, DEMAND, CAP = 4, 100.0, 10.0
capacity = PROCS * CAP / DEMAND  # jobs per second at the hot site


def scenario(rate, horizon=1500.0, size=5):
    ids = "ABC"
    topo = {(a, b): NetworkLink(a, b, 1e9, 1e-4, 0.05) for a in ids for b in ids if a != b}
    wl = WorkloadSpec(users=1, bursts_per_user=int(horizon * rate / size) + 1,
                      burst_size=Dist.constant(size), inter_arrival=Dist.constant(size / rate),
                      compute_demand=Dist.constant(DEMAND), input_bytes=Dist.constant(1e8),
                      datasets=1, user_sites=("A",),
                      data_placement=DataPlacement("single-home", 1, (1, 0, 0)))
    return Scenario(sites=[SiteState(x, CAP, processors=PROCS) for x in ids], topology=topo,
                    weights=CostWeights(), workload=wl, duration=1e6)


# %%
factors = np.array([0.5, 0.9, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0])
migrated = []
for f in factors:
    m = compute_metrics(run(scenario(f * capacity)))
    migrated.append(m.jobs_migrated)
    print(f"rate {f:4.2f} x capacity: {m.completed:5d} jobs, {m.jobs_migrated:5d} migrated")

# %%
assert migrated == sorted(migrated)
