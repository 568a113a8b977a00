"""Monte Carlo trajectories of the branching process with one immigrant per generation.

Random numbers come from NumPy's ``PCG64`` bit generator.  A path sampled
with an integer ``seed`` uses ``Generator(PCG64(seed))``; replica ``r`` of
a batch with base seed ``b`` uses the integer seed
``SeedSequence(b, spawn_key=(r,)).generate_state(1, uint64)[0]`` (see
:func:`replica_seed`), so any single replica can be replayed in isolation
with :func:`sample_path`.

Two samplers draw ``Z_t`` given ``Z_{t-1} = z``:

``"geometric"``
    one inverse-transform geometric draw per individual (``1 + z`` of them),
    O(population) per generation;
``"negative_binomial"`` (default)
    a single negative-binomial(``1 + z``, ``p_t``) draw, which has the same
    law.  Needed for environments where the population grows polynomially
    faster than linearly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .environment import Environment

__all__ = [
    "PathSample",
    "RegenStats",
    "DEFAULT_POPULATION_CAP",
    "METHODS",
    "sample_geometric",
    "replica_seed",
    "sample_path",
    "regen_times",
    "k_strong_times",
    "run_replicas",
]

DEFAULT_POPULATION_CAP = 2**53
METHODS = ("negative_binomial", "geometric")


@numba.njit(cache=True)
def _geometric(p, u):
    if p >= 1.0:
        return 0
    return int(math.floor(math.log(u) / math.log1p(-p)))


def sample_geometric(p: float, u: float) -> int:
    """Inverse-transform draw from ``P(X = j) = p (1-p)^j`` given ``u`` in (0, 1].

    ``P(X >= j) = q^j`` so ``X = floor(log u / log q)``.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p = {p!r} outside (0, 1]")
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u = {u!r} outside (0, 1]")
    return int(_geometric(float(p), float(u)))


@numba.njit(nogil=True, cache=True)
def _fill_path(rng, probs, cap, use_nb, z):
    # Writes Z_0..Z_t into z; returns the number of generations completed
    # (len(probs) unless the population exceeded cap).
    z[0] = 0
    cur = 0
    for t in range(probs.shape[0]):
        p = probs[t]
        if use_nb:
            nxt = rng.negative_binomial(cur + 1.0, p)
        else:
            nxt = 0
            for _ in range(cur + 1):
                nxt += _geometric(p, 1.0 - rng.random())
        if nxt > cap:
            return t
        cur = nxt
        z[t + 1] = cur
    return probs.shape[0]


@numba.njit(nogil=True, cache=True)
def _accumulate(z, k, s_sum, s_sumsq, zero_count, strong_count):
    # Adds one completed path to the integer accumulators; returns its last zero.
    n = z.shape[0] - 1
    s = 0
    last = 0
    for t in range(n + 1):
        if z[t] == 0:
            s += 1
            last = t
            zero_count[t] += 1
        s_sum[t] += s
        s_sumsq[t] += s * s
    run = 0
    for t in range(n, -1, -1):
        if z[t] == 0:
            run += 1
        else:
            run = 0
        if run >= k:
            strong_count[t] += 1
    return last


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replica_seed(base_seed: int, replica: int) -> int:
    """64-bit seed of replica ``replica`` in a batch with ``base_seed``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(replica),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class PathSample:
    """One trajectory ``Z_0, ..., Z_n``.

    If the population exceeded the hard cap the path is cut at the last
    admissible generation and ``overflowed`` is set; ``len(z) - 1 < n``.
    """

    z: np.ndarray
    seed: int
    n: int
    overflowed: bool = False


def _check_method(method: str) -> bool:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return method == "negative_binomial"


def sample_path(
    env: Environment,
    n: int,
    seed: int,
    method: str = "negative_binomial",
    cap: int = DEFAULT_POPULATION_CAP,
) -> PathSample:
    """Simulate ``Z_0 = 0`` and ``Z_t | Z_{t-1} ~ sum of 1 + Z_{t-1} geometric(p_t)``."""
    if n < 0:
        raise ValueError(f"n = {n} must be nonnegative")
    use_nb = _check_method(method)
    probs = env.probs(1, n) if n > 0 else np.empty(0)
    z = np.zeros(n + 1, dtype=np.int64)
    done = _fill_path(_rng(seed), probs, int(cap), use_nb, z)
    if done < n:
        return PathSample(z[: done + 1].copy(), seed, n, overflowed=True)
    return PathSample(z, seed, n)


def regen_times(path: PathSample) -> np.ndarray:
    """Generations ``t`` with ``Z_t = 0``; always starts with 0."""
    return np.flatnonzero(path.z == 0)


def k_strong_times(path: PathSample, k: int) -> np.ndarray:
    """Generations ``t`` with ``Z_t = ... = Z_{t+k-1} = 0`` and ``t + k - 1 <= n``."""
    if k < 1:
        raise ValueError(f"k = {k} must be positive")
    x = (path.z == 0).astype(np.int64)
    if len(x) < k:
        return np.empty(0, dtype=np.int64)
    window = np.convolve(x, np.ones(k, dtype=np.int64), mode="valid")
    return np.flatnonzero(window == k)


@dataclass(eq=False)
class RegenStats:
    """Integer accumulators over replicas, plus derived estimates.

    All sums are exact integers, so :meth:`merge` is associative and
    commutative and the result does not depend on how replicas were split.
    ``last_regen[i]`` is the largest regeneration time of replica
    ``replica_ids[i]`` (``-1`` if the replica was excluded for overflow).
    """

    horizon: int
    k: int
    s_sum: np.ndarray
    s_sumsq: np.ndarray
    zero_count: np.ndarray
    strong_count: np.ndarray
    replica_ids: np.ndarray
    last_regen: np.ndarray
    excluded: int = 0
    overflowed_ids: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))

    @classmethod
    def empty(cls, horizon: int, k: int = 1) -> "RegenStats":
        zeros = lambda: np.zeros(horizon + 1, dtype=np.int64)  # noqa: E731
        return cls(
            horizon, k, zeros(), zeros(), zeros(), zeros(),
            np.empty(0, np.int64), np.empty(0, np.int64),
        )

    @property
    def replicas(self) -> int:
        """Number of replicas that contributed (overflowed ones excluded)."""
        return len(self.replica_ids) - self.excluded

    def merge(self, other: "RegenStats") -> "RegenStats":
        if (self.horizon, self.k) != (other.horizon, other.k):
            raise ValueError("cannot merge statistics with different horizon or k")
        ids = np.concatenate([self.replica_ids, other.replica_ids])
        last = np.concatenate([self.last_regen, other.last_regen])
        order = np.argsort(ids, kind="stable")
        return RegenStats(
            self.horizon,
            self.k,
            self.s_sum + other.s_sum,
            self.s_sumsq + other.s_sumsq,
            self.zero_count + other.zero_count,
            self.strong_count + other.strong_count,
            ids[order],
            last[order],
            self.excluded + other.excluded,
            np.sort(np.concatenate([self.overflowed_ids, other.overflowed_ids])),
        )

    @property
    def s_curve(self) -> np.ndarray:
        """Estimate of ``E S_t``, ``S_t = #{u <= t : Z_u = 0}``."""
        return self.s_sum / self.replicas

    @property
    def s_stderr(self) -> np.ndarray:
        r = self.replicas
        if r < 2:
            return np.zeros(self.horizon + 1)
        mean = self.s_sum / r
        var = (self.s_sumsq - r * mean * mean) / (r - 1)
        return np.sqrt(np.maximum(var, 0.0) / r)

    @property
    def zero_freq(self) -> np.ndarray:
        """Empirical ``P(Z_t = 0)``."""
        return self.zero_count / self.replicas

    @property
    def zero_stderr(self) -> np.ndarray:
        f = self.zero_freq
        return np.sqrt(f * (1.0 - f) / self.replicas)

    @property
    def strong_freq(self) -> np.ndarray:
        """Empirical ``P(t in C_k)``."""
        return self.strong_count / self.replicas

    @property
    def included_last_regen(self) -> np.ndarray:
        return self.last_regen[self.last_regen >= 0]


def _run_block(probs, n, k, ids, base_seed, cap, use_nb) -> RegenStats:
    stats = RegenStats.empty(n, k)
    last = np.empty(len(ids), dtype=np.int64)
    overflowed = []
    z = np.zeros(n + 1, dtype=np.int64)
    for i, r in enumerate(ids):
        rng = _rng(replica_seed(base_seed, r))
        if _fill_path(rng, probs, cap, use_nb, z) < n:
            last[i] = -1
            overflowed.append(r)
            continue
        last[i] = _accumulate(
            z, k, stats.s_sum, stats.s_sumsq, stats.zero_count, stats.strong_count
        )
    stats.replica_ids = np.asarray(ids, dtype=np.int64)
    stats.last_regen = last
    stats.excluded = len(overflowed)
    stats.overflowed_ids = np.asarray(overflowed, dtype=np.int64)
    return stats


def run_replicas(
    env: Environment,
    n: int,
    replicas: int,
    base_seed: int,
    parallelism: int = 1,
    k: int = 1,
    method: str = "negative_binomial",
    cap: int = DEFAULT_POPULATION_CAP,
) -> RegenStats:
    """Simulate ``replicas`` independent paths of length ``n`` and aggregate.

    The output is identical for every ``parallelism``: each replica's seed
    depends only on ``(base_seed, replica index)`` and the accumulators are
    integers.  Replicas whose population exceeds ``cap`` are excluded and
    counted in ``excluded``.
    """
    if replicas < 1:
        raise ValueError(f"replicas = {replicas} must be positive")
    if parallelism < 1:
        raise ValueError(f"parallelism = {parallelism} must be positive")
    if k < 1:
        raise ValueError(f"k = {k} must be positive")
    use_nb = _check_method(method)
    probs = env.probs(1, n) if n > 0 else np.empty(0)
    blocks = [b for b in np.array_split(np.arange(replicas), parallelism) if len(b)]
    args = [(probs, n, k, b, base_seed, int(cap), use_nb) for b in blocks]
    if len(blocks) == 1:
        parts = [_run_block(*args[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(lambda a: _run_block(*a), args))
    total = RegenStats.empty(n, k)
    for part in parts:
        total = total.merge(part)
    if total.replicas == 0:
        raise RuntimeError(f"all {replicas} replicas overflowed the population cap {cap}")
    return total
