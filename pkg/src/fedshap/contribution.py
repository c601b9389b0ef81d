"""From per-round Shapley logs to final percentage contributions.

Rounds are weighted by an inverse linear factor: with halting round R, the
internal round index t (starting at 0) receives weight (R - t) / R, so the
first round carries weight 1 and round index R carries weight 0. The weighted
sums are then normalized to percentages of the total.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .shapley import ShapleyVector

Array = np.ndarray


class NonNormalizableError(ValueError):
    """Raised when the raw contribution total is not positive."""

    def __init__(self, raw: Array):
        super().__init__(f"raw contributions sum to {raw.sum()!r}, cannot normalize")
        self.raw = raw


@dataclass(frozen=True)
class RoundShapleyLog:
    rounds: tuple[Array, ...]
    num_clients: int

    def __post_init__(self) -> None:
        rounds = tuple(
            np.asarray(r.values if isinstance(r, ShapleyVector) else r, dtype=np.float64)
            for r in self.rounds
        )
        object.__setattr__(self, "rounds", rounds)
        for r in rounds:
            if r.shape != (self.num_clients,):
                raise ValueError("every round vector must have num_clients entries")

    def __len__(self) -> int:
        return len(self.rounds)


@dataclass(frozen=True)
class ContributionVector:
    percentages: Array
    raw: Array

    @property
    def has_negative(self) -> bool:
        return bool(np.any(self.raw < 0.0))


@dataclass(frozen=True)
class GroundTruth:
    percentages: Array

    def __post_init__(self) -> None:
        pct = np.asarray(self.percentages, dtype=np.float64)
        object.__setattr__(self, "percentages", pct)
        if abs(pct.sum() - 1.0) > 1e-12:
            raise ValueError("ground truth must sum to 1")


def weighted_cumulative(log: RoundShapleyLog, halting_round: int) -> Array:
    """Inverse-linearly weighted sum of the per-round Shapley vectors up to R."""
    if halting_round < 1:
        raise ValueError("halting round must be >= 1")
    if halting_round > len(log):
        raise ValueError(
            f"halting round {halting_round} exceeds {len(log)} recorded rounds"
        )
    total = np.zeros(log.num_clients)
    # Index t = halting_round has weight 0, so iterating recorded rounds only
    # is exact even when R equals the number of recorded rounds.
    for t in range(min(halting_round + 1, len(log))):
        total += (halting_round - t) / halting_round * log.rounds[t]
    return total


def normalize(raw: Sequence[float]) -> ContributionVector:
    """Percentages raw[k] / sum(raw); fails loudly when the total is <= 0."""
    raw = np.asarray(raw, dtype=np.float64)
    total = raw.sum()
    if not total > 0.0:
        raise NonNormalizableError(raw)
    return ContributionVector(percentages=raw / total, raw=raw)


def ground_truth(sizes: Sequence[int]) -> GroundTruth:
    """Size-based payout n_k / sum(n)."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if sizes.size == 0:
        raise ValueError("sizes must be non-empty")
    if np.any(sizes < 1):
        raise ValueError("all sizes must be >= 1")
    return GroundTruth(sizes / sizes.sum())


def optimal_halting_round(
    log: RoundShapleyLog, truth: GroundTruth
) -> tuple[int, float]:
    """Halting round minimizing squared Euclidean distance to the ground truth.

    Non-normalizable candidates are skipped; ties break toward smaller R.
    """
    if len(log) == 0:
        raise ValueError("empty round log")
    best_r = None
    best_dist = np.inf
    for r in range(1, len(log) + 1):
        try:
            contrib = normalize(weighted_cumulative(log, r))
        except NonNormalizableError:
            continue
        dist = float(((contrib.percentages - truth.percentages) ** 2).sum())
        if dist < best_dist:
            best_r, best_dist = r, dist
    if best_r is None:
        raise NonNormalizableError(weighted_cumulative(log, len(log)))
    return best_r, best_dist
