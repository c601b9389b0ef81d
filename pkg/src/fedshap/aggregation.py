"""Server-side aggregation strategies behind one uniform interface.

Eight strategies: FedAvg, FedAvgM, the adaptive trio (FedAdagrad, FedAdam,
FedYogi), FedMedian, FedTrimAvg and Krum. ``combine`` advances the server
state; ``subset_combine`` applies the same rule to an arbitrary coalition of
updates against a *frozen* state (moment buffers are read but never written),
which is what the per-round Shapley reconstruction needs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

Array = np.ndarray


class StrategyKind(str, enum.Enum):
    FEDAVG = "fedavg"
    FEDAVGM = "fedavgm"
    FEDADAGRAD = "fedadagrad"
    FEDADAM = "fedadam"
    FEDYOGI = "fedyogi"
    FEDMEDIAN = "fedmedian"
    FEDTRIMAVG = "fedtrimavg"
    KRUM = "krum"


ADAPTIVE_KINDS = frozenset(
    {StrategyKind.FEDADAGRAD, StrategyKind.FEDADAM, StrategyKind.FEDYOGI}
)
MOMENT_KINDS = ADAPTIVE_KINDS | {StrategyKind.FEDAVGM}

# Out-of-the-box hyperparameters; sweeps may override any of them.
DEFAULT_HYPER: dict[str, float] = {
    "eta": 0.1,
    "beta1": 0.9,
    "beta2": 0.99,
    "tau": 1e-9,
    "server_momentum": 0.9,
    "trim_fraction": 0.2,
    "byzantine_f": 0.0,
}


@dataclass(frozen=True)
class ClientUpdate:
    client_id: int
    params: Array
    num_examples: int

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=np.float64)
        object.__setattr__(self, "params", params)
        if self.num_examples < 1:
            raise ValueError("num_examples must be >= 1")
        if not np.all(np.isfinite(params)):
            raise ValueError("client params contain non-finite values")


@dataclass(frozen=True)
class ServerState:
    kind: StrategyKind
    round: int
    global_params: Array
    momentum: Array | None = None
    second_moment: Array | None = None
    hyper: Mapping[str, float] = field(default_factory=dict)


def init_server_state(
    kind: StrategyKind | str,
    global_params: Array,
    hyper: Mapping[str, float] | None = None,
) -> ServerState:
    kind = StrategyKind(kind)
    global_params = np.asarray(global_params, dtype=np.float64)
    merged = dict(DEFAULT_HYPER)
    if hyper:
        merged.update(hyper)
    dim = global_params.shape[0]
    momentum = np.zeros(dim) if kind in MOMENT_KINDS and kind != StrategyKind.FEDADAGRAD else None
    second_moment = np.zeros(dim) if kind in ADAPTIVE_KINDS else None
    return ServerState(
        kind=kind,
        round=0,
        global_params=global_params,
        momentum=momentum,
        second_moment=second_moment,
        hyper=merged,
    )


def _check_updates(global_params: Array, updates: Sequence[ClientUpdate]) -> None:
    dim = global_params.shape[0]
    for upd in updates:
        if upd.params.shape != (dim,):
            raise ValueError(
                f"client {upd.client_id}: params shape {upd.params.shape} "
                f"does not match global ({dim},)"
            )


def _weighted_average(updates: Sequence[ClientUpdate]) -> Array:
    weights = np.array([u.num_examples for u in updates], dtype=np.float64)
    stacked = np.stack([u.params for u in updates])
    return np.average(stacked, axis=0, weights=weights)


def _coordinate_median(updates: Sequence[ClientUpdate]) -> Array:
    return np.median(np.stack([u.params for u in updates]), axis=0)


def _trimmed_mean(updates: Sequence[ClientUpdate], trim_fraction: float) -> Array:
    stacked = np.sort(np.stack([u.params for u in updates]), axis=0)
    k = int(np.floor(trim_fraction * len(updates)))
    if len(updates) - 2 * k < 1:
        raise ValueError("trim fraction leaves no updates to average")
    return stacked[k : len(updates) - k].mean(axis=0)


def krum_scores(updates: Sequence[ClientUpdate], f: int) -> Array:
    """Sum of squared distances from each update to its K - f - 2 nearest peers."""
    num = len(updates)
    neighbors = num - f - 2
    if neighbors < 1:
        raise ValueError(f"Krum undefined: {num} updates with f={f}")
    stacked = np.stack([u.params for u in updates])
    diffs = stacked[:, None, :] - stacked[None, :, :]
    dists = (diffs**2).sum(axis=2)
    scores = np.empty(num)
    for i in range(num):
        others = np.delete(dists[i], i)
        scores[i] = np.sort(others)[:neighbors].sum()
    return scores


def _krum_select(updates: Sequence[ClientUpdate], f: int) -> Array:
    scores = krum_scores(updates, f)
    best = None
    best_score = np.inf
    for upd, score in sorted(
        zip(updates, scores), key=lambda pair: pair[0].client_id
    ):
        if score < best_score:
            best, best_score = upd, score
    assert best is not None
    return best.params.copy()


def _apply(
    kind: StrategyKind,
    global_params: Array,
    momentum: Array | None,
    second_moment: Array | None,
    hyper: Mapping[str, float],
    updates: Sequence[ClientUpdate],
) -> tuple[Array, Array | None, Array | None]:
    """One aggregation step; returns (new params, new momentum, new 2nd moment)."""
    if kind == StrategyKind.FEDAVG:
        return _weighted_average(updates), momentum, second_moment

    if kind == StrategyKind.FEDMEDIAN:
        return _coordinate_median(updates), momentum, second_moment

    if kind == StrategyKind.FEDTRIMAVG:
        return _trimmed_mean(updates, hyper["trim_fraction"]), momentum, second_moment

    if kind == StrategyKind.KRUM:
        return _krum_select(updates, int(hyper["byzantine_f"])), momentum, second_moment

    if kind == StrategyKind.FEDAVGM:
        # delta = w - avg(omega), written in per-client delta form so a
        # consensus round is exactly a fixed point.
        assert momentum is not None
        weights = np.array([u.num_examples for u in updates], dtype=np.float64)
        deltas = np.stack([global_params - u.params for u in updates])
        delta = np.average(deltas, axis=0, weights=weights)
        new_m = hyper["server_momentum"] * momentum + delta
        return global_params - new_m, new_m, second_moment

    # Adaptive trio: clients' weighted parameter deltas form a pseudo-gradient.
    assert second_moment is not None
    weights = np.array([u.num_examples for u in updates], dtype=np.float64)
    deltas = np.stack([u.params - global_params for u in updates])
    delta = np.average(deltas, axis=0, weights=weights)
    beta1, beta2 = hyper["beta1"], hyper["beta2"]
    if kind == StrategyKind.FEDADAGRAD:
        new_m = delta
        new_v = second_moment + delta**2
    elif kind == StrategyKind.FEDADAM:
        assert momentum is not None
        new_m = beta1 * momentum + (1.0 - beta1) * delta
        new_v = beta2 * second_moment + (1.0 - beta2) * delta**2
    elif kind == StrategyKind.FEDYOGI:
        assert momentum is not None
        new_m = beta1 * momentum + (1.0 - beta1) * delta
        new_v = second_moment - (1.0 - beta2) * delta**2 * np.sign(second_moment - delta**2)
    else:
        raise ValueError(f"unknown strategy {kind}")
    new_w = global_params + hyper["eta"] * new_m / (np.sqrt(new_v) + hyper["tau"])
    return new_w, new_m, new_v


def combine(
    state: ServerState, updates: Sequence[ClientUpdate]
) -> tuple[Array, ServerState]:
    """Advance one round: aggregate all client updates and step the state."""
    if len(updates) == 0:
        raise ValueError("combine requires at least one update")
    _check_updates(state.global_params, updates)
    # Canonical client order makes reductions bitwise permutation-invariant.
    updates = sorted(updates, key=lambda u: u.client_id)
    new_w, new_m, new_v = _apply(
        state.kind, state.global_params, state.momentum, state.second_moment,
        state.hyper, updates,
    )
    new_state = replace(
        state,
        round=state.round + 1,
        global_params=new_w,
        momentum=new_m,
        second_moment=new_v,
    )
    return new_w, new_state


def subset_combine(state: ServerState, subset: Sequence[ClientUpdate]) -> Array:
    """Aggregate a coalition against the frozen round-start state.

    Pure: moment buffers are read but never advanced. The empty coalition maps
    to the round-start global model. Krum on coalitions too small for its score
    falls back to a weighted average of the coalition.
    """
    if len(subset) == 0:
        return state.global_params.copy()
    _check_updates(state.global_params, subset)
    subset = sorted(subset, key=lambda u: u.client_id)
    kind = state.kind
    if kind == StrategyKind.KRUM:
        f = int(state.hyper["byzantine_f"])
        if len(subset) - f - 2 < 1:
            return _weighted_average(subset)
    new_w, _, _ = _apply(
        kind, state.global_params, state.momentum, state.second_moment,
        state.hyper, subset,
    )
    return new_w
