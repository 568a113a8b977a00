# Deciding whether regenerations are finite
#
# The number of regeneration times is finite exactly when the series of
# 1/D(n) converges. For the near-critical family this happens for B > 1,
# and also at B = 1, where D(n) grows like n log n.

# %%
from bpve import build_dtable, make_near_critical
from bpve.criterion import checkpoint_schedule, classify_near_critical, series_diagnostic

# %%
for B in (0.5, 0.9, 1.0, 1.5, 2.0):
    table = build_dtable(make_near_critical(B), 10**6)
    report = series_diagnostic(table, checkpoint_schedule(10**6))
    print(f"B={B}: {report.verdict:22s} classifier={classify_near_critical(B):8s} "
          f"product exponent={report.product_exponent:.3f} partial sum={report.partial_sums[-1]:.3f}")
