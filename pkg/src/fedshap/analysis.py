"""Distance metrics, the equal-payout analytic baseline, and cross-strategy
contribution instability statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .aggregation import StrategyKind
from .contribution import ContributionVector

Array = np.ndarray

DEFAULT_HIST_RANGE = (-0.6, 0.6)
DEFAULT_HIST_BINS = 60


@dataclass(frozen=True)
class DiffDistribution:
    """Per-client contribution differences plus a histogram for emission."""

    samples: Array
    bin_edges: Array
    counts: Array


# One experimental cell's contributions keyed by strategy.
StrategyContributions = Mapping[StrategyKind, ContributionVector]


def sq_euclid(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    return float(((a - b) ** 2).sum())


def chebyshev(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    if a.size == 0:
        return 0.0
    return float(np.abs(a - b).max())


def expected_equal_error(n: int, alpha: float) -> float:
    """Mean squared Euclidean gap between an equal payout and a size-based
    payout drawn from a symmetric Dirichlet(alpha): (n - 1) / (n^2 alpha + n)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return (n - 1) / (n * n * alpha + n)


def histogram(
    samples: Sequence[float],
    num_bins: int = DEFAULT_HIST_BINS,
    value_range: tuple[float, float] = DEFAULT_HIST_RANGE,
) -> DiffDistribution:
    """Uniform-bin histogram; out-of-range samples count in the edge bins."""
    lo, hi = value_range
    if not lo < hi:
        raise ValueError("range lower bound must be below upper bound")
    if num_bins < 1:
        raise ValueError("num_bins must be positive")
    samples = np.asarray(samples, dtype=np.float64)
    clipped = np.clip(samples, lo, hi)
    counts, edges = np.histogram(clipped, bins=num_bins, range=(lo, hi))
    return DiffDistribution(samples=samples, bin_edges=edges, counts=counts)


def pairwise_strategy_diffs(
    cells: Sequence[StrategyContributions],
    num_bins: int = DEFAULT_HIST_BINS,
    value_range: tuple[float, float] = DEFAULT_HIST_RANGE,
) -> dict[tuple[StrategyKind, StrategyKind], DiffDistribution]:
    """Per-client contribution differences for every unordered strategy pair.

    For the pair (s1, s2), samples are percentages_s1[k] - percentages_s2[k]
    over all clients of all cells; each cell's differences sum to zero.
    """
    if not cells:
        return {}
    kinds = sorted(cells[0].keys(), key=lambda k: k.value)
    for cell in cells:
        missing = set(kinds) - set(cell.keys())
        if missing:
            raise ValueError(f"cell missing strategies: {sorted(m.value for m in missing)}")
    out: dict[tuple[StrategyKind, StrategyKind], DiffDistribution] = {}
    for i, s1 in enumerate(kinds):
        for s2 in kinds[i + 1 :]:
            samples = np.concatenate(
                [cell[s1].percentages - cell[s2].percentages for cell in cells]
            )
            out[(s1, s2)] = histogram(samples, num_bins, value_range)
    return out
