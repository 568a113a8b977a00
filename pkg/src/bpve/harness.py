"""Experiment runners and the ``bpve`` command line.

Every runner takes an :class:`ExperimentConfig` and returns CSV text: a
``#`` comment preamble recording the tool version and every setting that
influences the numbers, one header row, then data rows.  Floats are written
with ``repr`` so reruns of the same configuration are byte-identical.
``parallelism`` and ``out`` change neither the numbers nor the text and are
therefore not recorded.

Config files hold one ``key = value`` per line (``#`` comments allowed),
keys as in the long flag names with dashes or underscores; flags given on
the command line override file values.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .analytics import build_dtable, prob_regen_k
from .criterion import (
    checkpoint_schedule,
    classify_near_critical,
    series_diagnostic,
    series_terms,
)
from .environment import Environment, InvalidEnvironment, load_custom, make_constant, make_custom, make_near_critical
from .simulator import replica_seed, run_replicas, sample_path

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_environment",
    "parse_checkpoints",
    "run_exact",
    "run_simulate",
    "run_classify",
    "run_theorem2",
    "run_theorem3",
    "main",
]

EXPERIMENTS = ("exact", "simulate", "classify", "theorem2", "theorem3")
ENV_KINDS = ("critical", "near-critical", "custom")
THEOREM3_EPSILONS = (0.25, 0.5, 1.0)
DIAGNOSTIC_HORIZON = 10**6


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    env: str = "critical"
    p: float | None = None
    B: float | None = None
    i0: int | None = None
    env_file: str | None = None
    n: int = 1000
    replicas: int = 1000
    seed: int = 0
    k: int | None = None
    out: str = "-"
    parallelism: int = 1
    checkpoints: str = "geometric"
    method: str = "negative_binomial"
    threshold: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: {self.experiment!r} not in {EXPERIMENTS}")
        if self.env not in ENV_KINDS:
            raise ConfigError(f"env: {self.env!r} not in {ENV_KINDS}")
        for name in ("n", "replicas", "parallelism", "threshold"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k: must be positive, got {self.k}")
        if self.seed < 0:
            raise ConfigError(f"seed: must be nonnegative, got {self.seed}")

    def recorded_items(self) -> list[tuple[str, object]]:
        skip = {"out", "parallelism"}
        return [
            (f.name, getattr(self, f.name))
            for f in dataclasses.fields(self)
            if f.name not in skip
        ]


def build_environment(config: ExperimentConfig) -> Environment:
    try:
        if config.env == "critical":
            return make_constant(0.5 if config.p is None else config.p)
        if config.env == "near-critical":
            if config.B is None:
                raise ConfigError("B: required for env = near-critical")
            return make_near_critical(config.B, config.i0)
        if config.env_file is None:
            raise ConfigError("env_file: required for env = custom")
        return load_custom(config.env_file)
    except InvalidEnvironment as exc:
        raise ConfigError(f"env: {exc}") from None


def _near_critical_drift(config: ExperimentConfig, env: Environment) -> float | None:
    if env.kind == "near_critical":
        return env.B
    if env.kind == "constant" and env.p == 0.5:
        return 0.0
    return None


def parse_checkpoints(schedule: str, n: int, n_min: int = 1) -> np.ndarray:
    """``geometric`` / ``geometric:<per_decade>`` or a comma list of integers."""
    schedule = schedule.strip()
    if schedule.startswith("geometric"):
        per_decade = 10
        if ":" in schedule:
            try:
                per_decade = int(schedule.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"checkpoints: bad schedule {schedule!r}") from None
            if per_decade < 1:
                raise ConfigError(f"checkpoints: per-decade count must be positive in {schedule!r}")
        return checkpoint_schedule(n, per_decade, n_min=max(1, min(n_min, n)))
    try:
        pts = sorted({int(s) for s in schedule.split(",") if s.strip()})
    except ValueError:
        raise ConfigError(f"checkpoints: bad schedule {schedule!r}") from None
    if not pts or pts[0] < n_min or pts[-1] > n:
        raise ConfigError(f"checkpoints: values must lie in [{n_min}, {n}], got {schedule!r}")
    return np.asarray(pts, dtype=np.int64)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _emit(config: ExperimentConfig, header: Sequence[str], rows, notes=()) -> str:
    buf = io.StringIO()
    buf.write(f"# bpve {__version__}\n")
    for key, value in config.recorded_items():
        buf.write(f"# {key} = {'' if value is None else _fmt(value)}\n")
    for key, value in notes:
        buf.write(f"# {key}: {_fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def run_exact(config: ExperimentConfig) -> str:
    """Closed-form table: ``n, D, log10_D, p_zero, expected_S, extinction_tail[, p_in_Ck]``."""
    env = build_environment(config)
    k = config.k
    horizon = config.n + (k - 1 if k else 0)
    try:
        table = build_dtable(env, horizon)
    except InvalidEnvironment as exc:
        raise ConfigError(f"n: {exc}") from None
    ck = parse_checkpoints(config.checkpoints, config.n, n_min=0)
    header = ["n", "D", "log10_D", "p_zero", "expected_S", "extinction_tail"]
    if k:
        header.append("p_in_Ck")
    rows = []
    for t in ck:
        row = [
            t,
            float(table.d[t]),
            float(table.log_d[t]) / math.log(10),
            float(table.inv_d[t]),
            float(table.inv_cumsum[t]),
            1.0 / float(table.surv_sum[t]),
        ]
        if k:
            row.append(prob_regen_k(env, table, int(t), k))
        rows.append(row)
    return _emit(config, header, rows)


def run_simulate(config: ExperimentConfig) -> str:
    """Monte Carlo against closed forms at each checkpoint."""
    env = build_environment(config)
    k = config.k or 1
    try:
        table = build_dtable(env, config.n)
    except InvalidEnvironment as exc:
        raise ConfigError(f"n: {exc}") from None
    stats = run_replicas(
        env, config.n, config.replicas, config.seed,
        parallelism=config.parallelism, k=k, method=config.method,
    )
    ck = parse_checkpoints(config.checkpoints, config.n, n_min=0)
    header = ["n", "mc_mean_S", "mc_stderr_S", "exact_expected_S", "zero_freq",
              "exact_p_zero", "excluded_replicas"]
    if k > 1:
        header += ["mc_p_in_Ck", "exact_p_in_Ck"]
    mean, se, freq = stats.s_curve, stats.s_stderr, stats.zero_freq
    rows = []
    for t in ck:
        row = [t, mean[t], se[t], table.inv_cumsum[t], freq[t], table.inv_d[t], stats.excluded]
        if k > 1:
            exact = prob_regen_k(env, table, int(t), k) if t + k - 1 <= config.n else math.nan
            row += [stats.strong_freq[t], exact]
        rows.append(row)
    return _emit(config, header, rows, [("replicas_used", stats.replicas)])


def run_classify(config: ExperimentConfig) -> str:
    """Series partial sums with the convergence diagnostic in the preamble."""
    env = build_environment(config)
    try:
        table = build_dtable(env, config.n)
    except InvalidEnvironment as exc:
        raise ConfigError(f"n: {exc}") from None
    if config.n < 2:
        raise ConfigError("n: must be at least 2 for the series diagnostic")
    ck = parse_checkpoints(config.checkpoints, config.n, n_min=2)
    report = series_diagnostic(table, ck)
    terms = series_terms(table)
    notes = [
        ("diagnostic", report.verdict),
        ("fitted_tail_exponent", report.fitted_tail_exponent),
        ("product_exponent", report.product_exponent),
        ("log_exponent", report.log_exponent),
        ("growth_ok", report.growth_ok),
        ("growth_delta", report.delta),
    ]
    B = _near_critical_drift(config, env)
    if B is not None:
        notes.insert(0, ("classifier", classify_near_critical(B)))
    rows = [[t, terms[t], s] for t, s in zip(report.checkpoints, report.partial_sums)]
    return _emit(config, ["n", "term", "partial_sum"], rows, notes)


def _decade_horizons(config: ExperimentConfig) -> np.ndarray:
    if config.checkpoints != "geometric":
        return parse_checkpoints(config.checkpoints, config.n)
    pts = {config.n}
    p = 1000
    while p < config.n:
        pts.add(p)
        p *= 10
    return np.asarray(sorted(pts), dtype=np.int64)


def run_theorem2(config: ExperimentConfig) -> str:
    """Finite versus infinite regeneration: verdicts plus last-regeneration spread."""
    env = build_environment(config)
    B = _near_critical_drift(config, env)
    if B is None:
        raise ConfigError(
            "env: theorem2 needs the near-critical family; use classify for "
            "other environments"
        )
    verdict = classify_near_critical(B)
    diag = series_diagnostic(build_dtable(env, max(config.n, DIAGNOSTIC_HORIZON)))
    header = ["n", "classifier", "diagnostic", "replicas", "excluded_replicas",
              "median_last_regen", "q99_last_regen", "max_last_regen",
              "frac_regen_in_window", "frac_last_regen_below_threshold"]
    rows = []
    prev = None
    for h in _decade_horizons(config):
        stats = run_replicas(env, int(h), config.replicas, config.seed,
                             parallelism=config.parallelism, method=config.method)
        last = stats.included_last_regen
        window = math.nan if prev is None else float(np.mean(last > prev))
        rows.append([
            h, verdict, diag.verdict, stats.replicas, stats.excluded,
            float(np.median(last)), float(np.quantile(last, 0.99)), int(last.max()),
            window, float(np.mean(last < config.threshold)),
        ])
        prev = int(h)
    return _emit(config, header, rows)


def run_theorem3(config: ExperimentConfig) -> str:
    """Logarithmic growth of the regeneration count for ``B < 1``."""
    env = build_environment(config)
    B = _near_critical_drift(config, env)
    if B is None:
        raise ConfigError("env: theorem3 needs the near-critical family (or critical p = 1/2)")
    if classify_near_critical(B) == "finite":
        raise ConfigError(
            f"B: theorem3 requires B < 1; B = {B} gives finitely many regeneration "
            "times (see the classify experiment)"
        )
    table = build_dtable(env, config.n)
    ck = parse_checkpoints(config.checkpoints, config.n, n_min=2)
    stats = run_replicas(env, config.n, config.replicas, config.seed,
                         parallelism=config.parallelism, method=config.method)
    path = sample_path(env, config.n, replica_seed(config.seed, 0), method=config.method)
    if path.overflowed:
        raise RuntimeError("long path exceeded the population cap")
    path_s = np.cumsum(path.z == 0)
    log_n = np.log(ck.astype(float))
    exact_ratio = table.inv_cumsum[ck] / log_n
    header = ["n", "exact_expected_S", "exact_ratio_log", "mc_mean_S", "mc_stderr_S",
              "path_S"] + [f"path_ratio_eps{e}" for e in THEOREM3_EPSILONS]
    rows = []
    for i, t in enumerate(ck):
        row = [t, table.inv_cumsum[t], exact_ratio[i], stats.s_curve[t],
               stats.s_stderr[t], int(path_s[t])]
        row += [path_s[t] / log_n[i] ** (1 + e) for e in THEOREM3_EPSILONS]
        rows.append(row)
    notes = [("limit_estimate_last_ratio", float(exact_ratio[-1])),
             ("excluded_replicas", stats.excluded)]
    return _emit(config, header, rows, notes)


RUNNERS: dict[str, Callable[[ExperimentConfig], str]] = {
    "exact": run_exact,
    "simulate": run_simulate,
    "classify": run_classify,
    "theorem2": run_theorem2,
    "theorem3": run_theorem3,
}

_FIELD_TYPES = {
    "env": str, "p": float, "B": float, "i0": int, "env_file": str, "n": int,
    "replicas": int, "seed": int, "k": int, "out": str, "parallelism": int,
    "checkpoints": str, "method": str, "threshold": int,
}


def read_config_file(path: str) -> dict[str, object]:
    values: dict[str, object] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _FIELD_TYPES[key](value)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return values


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--env", choices=ENV_KINDS)
    common.add_argument("--p", type=float, help="constant p (env critical; default 1/2)")
    common.add_argument("--B", type=float, help="near-critical drift")
    common.add_argument("--i0", type=int, help="near-critical threshold index")
    common.add_argument("--env-file", dest="env_file", help="custom environment file")
    common.add_argument("--n", type=int, help="horizon")
    common.add_argument("--replicas", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int, help="strong-regeneration order")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--checkpoints", help="'geometric[:per_decade]' or comma list")
    common.add_argument("--method", choices=("negative_binomial", "geometric"))
    common.add_argument("--threshold", type=int, help="theorem2 last-regeneration cutoff")
    parser = argparse.ArgumentParser(
        prog="bpve",
        description="Regeneration times of geometric branching processes with "
        "immigration in varying environments.",
    )
    parser.add_argument("--version", action="version", version=f"bpve {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=RUNNERS[name].__doc__.splitlines()[0])
    return parser


def config_from_args(argv: Sequence[str] | None = None) -> ExperimentConfig:
    parser = _parser()
    args = parser.parse_args(argv)
    values: dict[str, object] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in _FIELD_TYPES:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    return ExperimentConfig(experiment=args.experiment, **values)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = config_from_args(argv)
        text = RUNNERS[config.experiment](config)
    except ConfigError as exc:
        print(f"bpve: usage error: {exc}", file=sys.stderr)
        return 2
    if config.out == "-":
        sys.stdout.write(text)
        return 0
    try:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"bpve: cannot write {config.out}: {exc}", file=sys.stderr)
        return 1
    return 0
