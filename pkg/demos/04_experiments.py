# Running the packaged experiments from Python
#
# Every CLI subcommand is a function returning CSV text, which is handy in a
# notebook. Shell equivalents are given in the comments.

# %%
import csv
import io

from bpve.harness import ExperimentConfig, run_exact, run_theorem2, run_theorem3


def rows(text):
    return list(csv.DictReader(io.StringIO("\n".join(
        line for line in text.splitlines() if not line.startswith("#")))))


# %%
# bpve exact --env critical --n 1000
print(run_exact(ExperimentConfig("exact", env="critical", n=1000))[:600])

# %%
# bpve theorem2 --env near-critical --B 0.5 --n 10000 --replicas 300
for r in rows(run_theorem2(ExperimentConfig("theorem2", env="near-critical", B=0.5,
                                            n=10**4, replicas=300, parallelism=4))):
    print(r["n"], r["median_last_regen"], r["frac_regen_in_window"])

# %%
# bpve theorem3 --env near-critical --B 0.5 --n 100000 --replicas 100
for r in rows(run_theorem3(ExperimentConfig("theorem3", env="near-critical", B=0.5,
                                            n=10**5, replicas=100, parallelism=4)))[-3:]:
    print(r["n"], r["exact_ratio_log"], r["mc_mean_S"], r["path_ratio_eps0.5"])
