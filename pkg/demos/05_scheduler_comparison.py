# %% [markdown]
# # DIANA against the baselines
#
# Same workload, three placement policies, growing job counts. Each point is
# averaged over a few seeds. This is what `diana-sched compare` does from the
# command line; here the library is driven directly.

# %%
from pathlib import Path

from diana_sched import load_scenario, run
from diana_sched.metrics import series
from diana_sched.scenario import read_scenario_dict, scenario_from_dict

ROOT = Path(__file__).resolve().parent.parent
base = read_scenario_dict(ROOT / "scenarios" / "example.toml")

# %%
logs = []
for kind in ("diana", "greedy-compute", "random"):
    for bursts in (5, 10, 20):
        for seed in (1, 2, 3):
            raw = dict(base, scheduler_kind=kind, seed=seed,
                       workload=dict(base["workload"], bursts_per_user=bursts))
            logs.append(run(scenario_from_dict(raw)))

for measure in ("mean_turnaround", "makespan"):
    print(measure)
    print(series(logs, "exec_time_vs_job_count", measure=measure).to_csv())

# %% [markdown]
# With most input data at one site and a heavy weight on queue length, DIANA
# spreads bursts out but keeps them near their data; greedy-compute ignores
# the transfer and pays for it, random ignores both.
