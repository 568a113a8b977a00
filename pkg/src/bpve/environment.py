"""Offspring-parameter sequences for geometric branching with immigration.

An environment assigns to every generation ``k >= 1`` a success probability
``p_k`` of the geometric offspring law ``P(X = j) = p_k * q_k**j``, with
``q_k = 1 - p_k``.  Only the regime ``0 < p_k <= 1/2`` is supported, so the
offspring mean ``m_k = q_k / p_k`` is always at least one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np

__all__ = [
    "Environment",
    "InvalidEnvironment",
    "make_constant",
    "make_near_critical",
    "make_custom",
    "load_custom",
    "offspring_mean",
]


class InvalidEnvironment(ValueError):
    """Raised for invalid environment parameters or out-of-domain indices."""


def _check_probability(p: float, where: str) -> float:
    p = float(p)
    if not math.isfinite(p) or p <= 0.0:
        raise InvalidEnvironment(f"{where}: p = {p!r} violates p > 0")
    if p > 0.5:
        raise InvalidEnvironment(f"{where}: p = {p!r} violates p <= 1/2")
    return p


@dataclass(frozen=True)
class Environment:
    """Immutable description of the sequence ``p_1, p_2, ...``.

    ``kind`` is one of ``"constant"``, ``"near_critical"`` or ``"custom"``.
    Use the ``make_*`` constructors rather than building instances directly.
    """

    kind: str
    p: float | None = None
    B: float | None = None
    i0: int | None = None
    p_list: tuple[float, ...] = field(default=(), repr=False)

    @property
    def length(self) -> int | None:
        """Number of defined generations, or ``None`` if unbounded."""
        return len(self.p_list) if self.kind == "custom" else None

    def _check_range(self, lo: int, hi: int) -> None:
        if lo < 1:
            raise InvalidEnvironment(f"generation index {lo} < 1")
        if self.kind == "custom" and hi > len(self.p_list):
            raise InvalidEnvironment(
                f"generation index {hi} beyond custom environment of length "
                f"{len(self.p_list)}"
            )

    def probs(self, start: int, stop: int) -> np.ndarray:
        """Return ``p_k`` for ``k = start, ..., stop`` (inclusive)."""
        if stop < start:
            return np.empty(0)
        self._check_range(start, stop)
        if self.kind == "constant":
            return np.full(stop - start + 1, self.p)
        if self.kind == "custom":
            return np.asarray(self.p_list[start - 1:stop], dtype=float)
        k = np.arange(start, stop + 1, dtype=float)
        return np.where(k > self.i0, 0.5 - self.B / (4.0 * k), 0.5)

    def means(self, start: int, stop: int) -> np.ndarray:
        """Return ``m_k = q_k / p_k`` for ``k = start, ..., stop``."""
        if stop < start:
            return np.empty(0)
        if self.kind == "near_critical":
            # (2k + B) / (2k - B) avoids the cancellation in (1 - p) / p
            self._check_range(start, stop)
            k = np.arange(start, stop + 1, dtype=float)
            out = np.ones_like(k)
            tail = k > self.i0
            out[tail] = (2.0 * k[tail] + self.B) / (2.0 * k[tail] - self.B)
            return out
        p = self.probs(start, stop)
        return (1.0 - p) / p

    def log_means(self, start: int, stop: int) -> np.ndarray:
        """Return ``log m_k`` for ``k = start, ..., stop``."""
        if stop < start:
            return np.empty(0)
        if self.kind == "near_critical":
            self._check_range(start, stop)
            k = np.arange(start, stop + 1, dtype=float)
            x = np.where(k > self.i0, self.B / (2.0 * k), 0.0)
            # log((1 + x) / (1 - x)) = 2 artanh(x)
            return 2.0 * np.arctanh(x)
        p = self.probs(start, stop)
        return np.log1p(-p) - np.log(p)

    def prob(self, k: int) -> float:
        return float(self.probs(k, k)[0])

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant(p={self.p!r})"
        if self.kind == "near_critical":
            return f"near_critical(B={self.B!r}, i0={self.i0})"
        return f"custom(N={len(self.p_list)})"


def make_constant(p: float) -> Environment:
    """Environment with ``p_k = p`` for every generation."""
    return Environment("constant", p=_check_probability(p, "constant environment"))


def make_near_critical(B: float, i0: int | None = None) -> Environment:
    """Near-critical family ``p_i = 1/2 - B/(4i)`` for ``i > i0``, else ``1/2``.

    When ``i0`` is omitted the smallest admissible value ``floor(B/2) + 1`` is
    used, i.e. the least positive integer with ``B / (4 i0) < 1/2``.
    """
    B = float(B)
    if not math.isfinite(B) or B < 0:
        raise InvalidEnvironment(f"near-critical drift B = {B!r} violates B >= 0")
    if i0 is None:
        i0 = math.floor(B / 2) + 1
    if int(i0) != i0 or i0 < 1:
        raise InvalidEnvironment(f"threshold i0 = {i0!r} must be a positive integer")
    i0 = int(i0)
    if not B / (4 * i0) < 0.5:
        raise InvalidEnvironment(
            f"B/(4*i0) = {B / (4 * i0)!r} violates B/(4*i0) < 1/2 (B={B}, i0={i0})"
        )
    return Environment("near_critical", B=B, i0=i0)


def make_custom(p_list: Sequence[float]) -> Environment:
    """Finite environment ``p_1, ..., p_N`` taken from ``p_list``."""
    values = list(p_list)
    if not values:
        raise InvalidEnvironment("custom environment must be nonempty")
    checked = tuple(
        _check_probability(p, f"custom environment index {k}")
        for k, p in enumerate(values, start=1)
    )
    return Environment("custom", p_list=checked)


def load_custom(path: str | PathLike) -> Environment:
    """Read a custom environment file.

    One decimal ``p_k`` per line, line order giving ``k = 1, 2, ...``; blank
    lines and lines starting with ``#`` are skipped.
    """
    values = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise InvalidEnvironment(
                    f"{path}: cannot parse {line!r} as a probability"
                ) from None
    return make_custom(values)


def offspring_mean(env: Environment, k: int) -> float:
    """Mean ``m_k = q_k / p_k`` of the generation-``k`` offspring law."""
    return float(env.means(k, k)[0])
