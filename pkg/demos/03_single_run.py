# %% [markdown]
# # One simulated run
#
# Load the example scenario (four sites, most data at A), run it, and look at
# the summary and the event log.

# %%
from pathlib import Path
from collections import Counter

from diana_sched import compute_metrics, load_scenario, run
from diana_sched.metrics import series

ROOT = Path(__file__).resolve().parent.parent
sc = load_scenario(ROOT / "scenarios" / "example.toml")
log = run(sc)
m = compute_metrics(log)

# %%
print(f"{m.completed} jobs, makespan {m.makespan:.0f}s, mean turnaround "
      f"{m.mean_turnaround:.0f}s, {m.jobs_migrated} migrated")
print({k: round(v, 3) for k, v in m.cpu_utilization.items()})

# %% [markdown]
# Where did jobs end up?

# %%
print(Counter(e.site for e in log.of_kind("exec_start")))
print(Counter(e.kind for e in log.events).most_common())

# %% [markdown]
# The first few events of job 0, in order.

# %%
for e in log.events:
    if e.job == 0:
        print(f"{e.time:9.3f}  {e.kind:15s} {e.site}  {e.payload}")

# %%
print(series(log, "local_vs_migrated_over_time", 2000.0).to_csv())
