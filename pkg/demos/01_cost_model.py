# %% [markdown]
# # The cost model
#
# A site is scored by three terms: how lossy and slow the network into it is,
# how busy its processors are, and how much data has to be moved to run there.
# This script evaluates each piece for a small two-site grid.

# %%
import numpy as np

from diana_sched import (CostWeights, JobDataSpec, NetworkLink, SiteState, compute_cost,
                         network_cost, tcp_throughput, total_cost)

# %% [markdown]
# Achievable TCP throughput is capped by the link bandwidth, and below that it
# falls off with the square root of the loss rate.

# %%
for loss in (1e-6, 1e-4, 1e-2):
    link = NetworkLink("A", "B", bandwidth=1e9, loss_prob=loss, rtt=0.05)
    print(f"loss={loss:g}  throughput={tcp_throughput(link) / 1e6:8.2f} MB/s  "
          f"network_cost={network_cost(link):.3g}")

# %% [markdown]
# Compute cost grows with queue length per processor and with current load.

# %%
w = CostWeights()
for q in (0, 10, 100):
    print(q, compute_cost(SiteState("A", 10.0, queue_length=q, load=0.5, processors=8), w))

# %% [markdown]
# Put together: a job whose 2 GB input lives at A, compared at A and at B.
# B is idle but every byte has to cross the link first.

# %%
topo = {("A", "B"): NetworkLink("A", "B", 1e8, 1e-3, 0.1),
        ("B", "A"): NetworkLink("B", "A", 1e8, 1e-3, 0.1)}
job = JobDataSpec(input_bytes=2e9, output_bytes=1e7, executable_bytes=1e6,
                  input_source="A", output_sink="A", executable_source="A")
sites = [SiteState("A", 10.0, queue_length=40, load=0.9, processors=8),
         SiteState("B", 10.0, queue_length=0, load=0.0, processors=8)]
for beta in (1.0, 60.0):
    w = CostWeights(beta=beta)
    costs = {s.id: total_cost(job, s, topo, w) for s in sites}
    best = min(costs, key=lambda k: costs[k].total)
    print(f"beta={beta:>4}: " + ", ".join(f"{k}={c.total:.4g}" for k, c in costs.items())
          + f" -> {best}")

# %% [markdown]
# Raising `beta` multiplies A's score sixty-fold, yet it still wins: pushing
# 2 GB through a lossy 100 MB/s link costs more than a long queue.
