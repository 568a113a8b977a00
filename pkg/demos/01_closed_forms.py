# Closed forms and the exact distribution
#
# A walk through the deterministic side of the package: the D table, the
# probability of a regeneration at time n, and a check against the exact
# truncated distribution of Z_n.

# %%
import numpy as np

from bpve import build_dtable, exact_distribution, make_constant, make_near_critical
from bpve.analytics import mean_population, pgf_F, prob_regen_k

# %% [markdown]
# In the critical environment every offspring mean equals one, so D(n) = n + 1
# and the chance of finding the population empty at time n is 1/(n + 1).

# %%
critical = make_constant(0.5)
table = build_dtable(critical, 20)
print(table.d[:6])
print(table.inv_d[:6])

# %% [markdown]
# The same numbers come out of a brute-force dynamic program over the
# population size, up to a cap where the lost mass is reported.

# %%
dist = exact_distribution(critical, 20, cap=2000)
print("P(Z_20 = 0) exact DP:", dist.pmf[0], " closed form:", table.inv_d[20])
print("mass beyond cap:", dist.lost_mass)
print("E Z_20 DP:", dist.mean(), " closed form:", mean_population(table, 20))

# %% [markdown]
# Generating functions agree too.

# %%
for s in (0.0, 0.5, 0.9):
    print(s, pgf_F(table, 20, s), dist.pgf(s))

# %% [markdown]
# Near-critical environments p_i = 1/2 - B/(4i) push the means above one by
# roughly B/i. The table is kept in log space, so huge horizons are cheap.

# %%
for B in (0.5, 1.0, 2.0):
    t = build_dtable(make_near_critical(B), 10**6)
    print(f"B={B}: log10 D(1e6) = {t.log_d[-1] / np.log(10):.3f}")

# %% [markdown]
# Probability of k consecutive empty generations starting at n.

# %%
print([prob_regen_k(critical, table, n, 2) for n in (1, 5, 10)])
