# %% [markdown]
# # Multilevel feedback queues
#
# Users who submit a lot sink to lower levels; anything left waiting long enough
# is promoted back up. Within a burst, jobs needing fewer processors go first.

# %%
from diana_sched import FeedbackQueues, Job, JobDataSpec, PriorityPolicy, effective_priority
from diana_sched.queues import UserStats

policy = PriorityPolicy(num_levels=4, base_level=1, job_threshold=5, time_threshold=60.0)

# %% [markdown]
# Level for a burst, given how many jobs the user has had in the current window
# and how long it has waited (level 0 is served first).

# %%
for recent in (0, 5, 6, 8, 40):
    print(recent, [effective_priority(UserStats("u", recent), wait, policy)
                   for wait in (0.0, 60.0, 120.0)])

# %% [markdown]
# A queue with a heavy user (alice) and a light one (bob).

# %%
data = JobDataSpec(0.0, 0.0, 0.0, "A", "A", "A")
q = FeedbackQueues(policy)
jid = 0
for t, user, size in [(0.0, "alice", 4), (1.0, "alice", 4), (2.0, "bob", 2)]:
    burst = []
    for _ in range(size):
        burst.append(Job(jid, user, 0, processors_required=1 + (jid * 7) % 3,
                         compute_demand=50.0, data=data))
        jid += 1
    print(f"t={t}: {user} burst -> level {q.enqueue_burst(burst, t)}")

print("levels:", [[j.id for j in lvl] for lvl in q.levels])

# %% [markdown]
# Aging lifts whatever is still waiting after each `time_threshold` seconds.

# %%
for p in q.apply_aging(65.0):
    print(f"job {p.job}: level {p.old_level} -> {p.new_level}")
print("levels:", [[j.id for j in lvl] for lvl in q.levels])
print("dispatch order:", [q.next_job().id for _ in range(len(q))])
