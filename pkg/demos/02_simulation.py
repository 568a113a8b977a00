# Monte Carlo paths and regeneration counts
#
# Sampling paths, counting regeneration times and comparing the averages
# with their closed forms.

# %%
import numpy as np

from bpve import build_dtable, make_constant, make_near_critical, run_replicas, sample_path
from bpve.simulator import regen_times, replica_seed

# %% [markdown]
# A single path. Regeneration times are the generations where the
# population is empty (time 0 always counts).

# %%
env = make_constant(0.5)
path = sample_path(env, 50, seed=replica_seed(1, 0))
print(path.z[:20])
print(regen_times(path))

# %% [markdown]
# Many replicas at once. The accumulators are integers, so the result does
# not depend on how many worker threads are used.

# %%
stats = run_replicas(env, 100, replicas=20000, base_seed=3, parallelism=4)
table = build_dtable(env, 100)
print("mean S_100:", stats.s_curve[100], "+/-", stats.s_stderr[100])
print("exact     :", table.inv_cumsum[100])
print("P(Z_100 = 0):", stats.zero_freq[100], "exact:", table.inv_d[100])

# %% [markdown]
# For B = 2 the regenerations stop early; the last one sits in the first few
# dozen generations for almost every replica.

# %%
stats = run_replicas(make_near_critical(2.0), 10**4, replicas=500, base_seed=5, parallelism=4)
last = stats.included_last_regen
print("median, max last regeneration:", np.median(last), last.max())
