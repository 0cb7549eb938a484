"""Training objective for a single candidate invariant.

The total loss combines three terms: mean absolute deviation from 1 on the
training rows, a hinge that demands at least a margin ``delta`` of deviation
on a uniform-noise background (killing globally constant solutions), and a
double-log complexity penalty weighted by ``gamma``.  Evaluation faults are
penalized but finite, so partially-defined expressions can survive early
search generations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import kernels

# Added to the total per unit fault fraction; keeps partially-faulting
# candidates alive but strictly dominated by clean ones of equal fit.
FAULT_PENALTY_SCALE = 10.0
# Sentinel total (and per-term deviation) when every row of a matrix faults.
ALL_FAULT_LOSS = 1e6


@dataclass(frozen=True)
class FeatureRanges:
    """Columnwise empirical (min, max) pairs, in raw dataset units."""

    lows: tuple
    highs: tuple

    def __post_init__(self):
        if len(self.lows) != len(self.highs):
            raise ValueError("lows and highs must have equal length")
        for lo, hi in zip(self.lows, self.highs):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"invalid range ({lo}, {hi})")

    def __len__(self):
        return len(self.lows)


@dataclass(frozen=True, eq=False)
class TrainingContext:
    """Restricted data, noise background, and loss hyperparameters.

    Immutable and shareable across evaluation workers; arrays are copied to
    contiguous float64 at construction.
    """

    train_rows: np.ndarray
    noise_rows: np.ndarray
    delta: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(
            self, "train_rows", np.ascontiguousarray(self.train_rows, dtype=np.float64)
        )
        object.__setattr__(
            self, "noise_rows", np.ascontiguousarray(self.noise_rows, dtype=np.float64)
        )
        if self.train_rows.ndim != 2 or self.train_rows.shape[0] == 0:
            raise ValueError("train_rows must be a nonempty 2-D matrix")
        if self.noise_rows.ndim != 2 or self.noise_rows.shape[0] == 0:
            raise ValueError("noise_rows must be a nonempty 2-D matrix")
        if self.train_rows.shape[1] != self.noise_rows.shape[1]:
            raise ValueError("train and noise column counts differ")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def dimension(self):
        return self.train_rows.shape[1]


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term decomposition of the training loss."""

    l1: float
    l_noise: float
    hinge: float
    l_c: float
    total: float
    fault_fraction: float = 0.0


def feature_ranges(rows):
    """Exact columnwise (min, max) over a nonempty matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("feature_ranges requires a nonempty 2-D matrix")
    return FeatureRanges(
        tuple(float(v) for v in rows.min(axis=0)),
        tuple(float(v) for v in rows.max(axis=0)),
    )


def sample_noise(ranges, count, rng):
    """Uniform background: each feature drawn independently over its range."""
    if count < 1:
        raise ValueError("noise sample count must be >= 1")
    rng = np.random.default_rng(rng)
    lows = np.asarray(ranges.lows, dtype=np.float64)
    highs = np.asarray(ranges.highs, dtype=np.float64)
    return rng.uniform(lows, highs, size=(count, len(ranges)))


def mean_abs_deviation(expression, rows):
    """Mean |f(x) - 1| over fault-free rows and the faulted fraction.

    When every row faults the deviation is the ALL_FAULT_LOSS sentinel.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if n == 0:
        raise ValueError("mean_abs_deviation requires at least one row")
    ops, args, consts = expression.program
    total, n_fault = kernels.deviation_stats(ops, args, consts, rows)
    if n_fault == n:
        return ALL_FAULT_LOSS, 1.0
    return total / (n - n_fault), n_fault / n


def complexity_penalty(c):
    """Saturating double-log penalty of a raw complexity value."""
    return math.log1p(math.log1p(c))


def total_loss(expression, ctx):
    """Full loss breakdown of one candidate against a training context."""
    if expression.dimension != ctx.dimension:
        raise ValueError(
            f"expression dimension {expression.dimension} != context dimension {ctx.dimension}"
        )
    l1, ff_train = mean_abs_deviation(expression, ctx.train_rows)
    l_noise, ff_noise = mean_abs_deviation(expression, ctx.noise_rows)
    hinge = max(0.0, ctx.delta - l_noise)
    l_c = complexity_penalty(ex.complexity(expression))
    n_train = ctx.train_rows.shape[0]
    n_noise = ctx.noise_rows.shape[0]
    fault_fraction = (ff_train * n_train + ff_noise * n_noise) / (n_train + n_noise)
    if ff_train == 1.0 or ff_noise == 1.0:
        total = ALL_FAULT_LOSS
    else:
        total = l1 + hinge + ctx.gamma * l_c + FAULT_PENALTY_SCALE * fault_fraction
    return LossBreakdown(
        l1=l1,
        l_noise=l_noise,
        hinge=hinge,
        l_c=l_c,
        total=total,
        fault_fraction=fault_fraction,
    )
