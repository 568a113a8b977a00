"""Regeneration times of geometric branching processes with one immigrant
per generation in a varying environment.

Modules
-------
environment
    offspring-parameter sequences (constant, near-critical, custom)
analytics
    closed forms built on the ``D(n)`` table
oracle
    brute-force dynamic programme for the law of ``Z_n``
simulator
    seeded Monte Carlo paths and replica statistics
criterion
    series diagnostic and the near-critical classifier
harness
    experiment runners emitting CSV, and the ``bpve`` command line
"""
__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    DTable,
    build_dtable,
    d_segment,
    expected_regen_count,
    extinction_tail,
    pgf_F,
    pgf_f_segment,
    prob_pair_regen_k,
    prob_regen_k,
    prob_zero,
    prob_zero_given,
)
from .criterion import (  # noqa: E402
    classify_near_critical,
    estimate_growth_constants,
    growth_check,
    series_diagnostic,
)
from .environment import (  # noqa: E402
    Environment,
    InvalidEnvironment,
    load_custom,
    make_constant,
    make_custom,
    make_near_critical,
    offspring_mean,
)
from .oracle import ExactDistribution, exact_distribution, exact_joint_zero  # noqa: E402
from .simulator import (  # noqa: E402
    PathSample,
    RegenStats,
    k_strong_times,
    regen_times,
    run_replicas,
    sample_geometric,
    sample_path,
)
