"""Shapley values over an abstract characteristic function.

Coalitions are encoded as bitmasks over players {0, ..., K-1}. The exact
engine enumerates all 2^K coalitions; the Monte Carlo engine averages
marginal contributions over random player permutations. A per-round adapter
builds the characteristic function from frozen-state subset aggregation.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .aggregation import ClientUpdate, ServerState, subset_combine
from .model import Dataset, EvalResult, ModelSpec, evaluate

Array = np.ndarray

EXACT_ENUMERATION_CAP = 12


class CharacteristicFn:
    """Memoizing coalition-utility oracle.

    The underlying callable receives a sorted tuple of player indices and
    must be deterministic. The memo supports concurrent readers with
    exclusive insertion, so parallel subset evaluation cannot change results.
    """

    def __init__(self, fn: Callable[[tuple[int, ...]], float], num_players: int):
        if num_players < 1:
            raise ValueError("need at least one player")
        self._fn = fn
        self.num_players = num_players
        self._memo: dict[int, float] = {}
        self._lock = threading.Lock()

    def __call__(self, mask: int) -> float:
        if mask < 0 or mask >= (1 << self.num_players):
            raise ValueError(f"coalition mask {mask} out of range")
        cached = self._memo.get(mask)
        if cached is not None:
            return cached
        players = tuple(i for i in range(self.num_players) if mask & (1 << i))
        value = float(self._fn(players))
        with self._lock:
            self._memo.setdefault(mask, value)
        return self._memo[mask]

    @property
    def evaluations(self) -> int:
        return len(self._memo)


@dataclass(frozen=True)
class ShapleyVector:
    values: Array

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


def exact_shapley(
    v: CharacteristicFn, num_players: int, cap: int = EXACT_ENUMERATION_CAP
) -> ShapleyVector:
    """Full-enumeration Shapley values, at most 2^K oracle calls."""
    if num_players > cap:
        raise ValueError(
            f"{num_players} players exceeds the exact-enumeration cap {cap}; "
            "use monte_carlo_shapley"
        )
    fact = [math.factorial(s) for s in range(num_players + 1)]
    total = fact[num_players]
    weights = [
        fact[s] * fact[num_players - s - 1] / total for s in range(num_players)
    ]
    phi = np.zeros(num_players)
    full = 1 << num_players
    for i in range(num_players):
        bit = 1 << i
        for mask in range(full):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            phi[i] += weights[size] * (v(mask | bit) - v(mask))
    return ShapleyVector(phi)


def monte_carlo_shapley(
    v: CharacteristicFn, num_players: int, num_permutations: int, seed: int
) -> ShapleyVector:
    """Permutation-sampling estimator; efficiency holds exactly by telescoping."""
    if num_permutations < 1:
        raise ValueError("num_permutations must be >= 1")
    rng = np.random.default_rng(seed)
    phi = np.zeros(num_players)
    for _ in range(num_permutations):
        perm = rng.permutation(num_players)
        mask = 0
        prev = v(0)
        for player in perm:
            mask |= 1 << int(player)
            cur = v(mask)
            phi[player] += cur - prev
            prev = cur
    return ShapleyVector(phi / num_permutations)


def round_characteristic(
    state: ServerState,
    updates: Sequence[ClientUpdate],
    spec: ModelSpec,
    eval_data: Dataset,
    utility: Literal["accuracy", "neg_loss"] = "accuracy",
) -> CharacteristicFn:
    """v(S) = utility of the coalition's frozen-state aggregate on eval_data."""
    ordered = sorted(updates, key=lambda u: u.client_id)

    def fn(players: tuple[int, ...]) -> float:
        params = subset_combine(state, [ordered[i] for i in players])
        result: EvalResult = evaluate(params, spec, eval_data)
        if utility == "accuracy":
            return result.accuracy
        if utility == "neg_loss":
            return -result.loss
        raise ValueError(f"unknown utility {utility!r}")

    return CharacteristicFn(fn, len(ordered))


def round_shapley(
    state: ServerState,
    updates: Sequence[ClientUpdate],
    spec: ModelSpec,
    eval_data: Dataset,
    mode: Literal["exact", "monte_carlo"] = "exact",
    num_permutations: int | None = None,
    seed: int = 0,
    utility: Literal["accuracy", "neg_loss"] = "accuracy",
) -> ShapleyVector:
    """One-round Shapley reconstruction from the round's client updates.

    Clients are ordered by client_id; values[i] belongs to the i-th smallest
    client_id. The memo cache bounds the work at 2^K aggregate evaluations.
    """
    v = round_characteristic(state, updates, spec, eval_data, utility)
    if mode == "exact":
        return exact_shapley(v, len(updates))
    if mode == "monte_carlo":
        if num_permutations is None:
            raise ValueError("monte_carlo mode requires num_permutations")
        return monte_carlo_shapley(v, len(updates), num_permutations, seed)
    raise ValueError(f"unknown mode {mode!r}")
