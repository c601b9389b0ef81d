import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedshap.aggregation import (
    ClientUpdate,
    StrategyKind,
    combine,
    init_server_state,
    krum_scores,
    subset_combine,
)

ALL_KINDS = list(StrategyKind)


def upd(client_id, values, n=1):
    return ClientUpdate(client_id=client_id, params=np.asarray(values, dtype=float), num_examples=n)


def random_updates(rng, num_clients, dim):
    return [
        upd(k, rng.normal(size=dim), n=int(rng.integers(1, 50)))
        for k in range(num_clients)
    ]


def test_fedavg_weighted_mean():
    state = init_server_state("fedavg", np.zeros(2))
    new_w, _ = combine(state, [upd(0, [0.0, 2.0], n=1), upd(1, [2.0, 4.0], n=3)])
    assert new_w.tolist() == [1.5, 3.5]


def test_fedmedian_odd_count():
    state = init_server_state("fedmedian", np.zeros(1))
    new_w, _ = combine(state, [upd(0, [1.0]), upd(1, [2.0]), upd(2, [9.0])])
    assert new_w.tolist() == [2.0]


def test_fedmedian_even_count_averages_central():
    state = init_server_state("fedmedian", np.zeros(1))
    new_w, _ = combine(state, [upd(i, [v]) for i, v in enumerate([1.0, 2.0, 8.0, 9.0])])
    assert new_w.tolist() == [5.0]


def test_fedtrimavg_one_cut_each_side():
    state = init_server_state("fedtrimavg", np.zeros(1))
    new_w, _ = combine(state, [upd(i, [float(i + 1)]) for i in range(5)])
    assert new_w.tolist() == [3.0]


def test_fedavgm_zero_momentum_matches_fedavg():
    rng = np.random.default_rng(0)
    w = rng.normal(size=4)
    updates = random_updates(rng, 3, 4)
    avgm = init_server_state("fedavgm", w, hyper={"server_momentum": 0.0})
    avg = init_server_state("fedavg", w)
    out_m, _ = combine(avgm, updates)
    out_a, _ = combine(avg, updates)
    assert np.allclose(out_m, out_a, atol=1e-12)


def test_fedadam_zero_pseudo_gradient_is_identity():
    w = np.array([0.3, -0.7])
    state = init_server_state("fedadam", w)
    updates = [upd(0, w, n=2), upd(1, w, n=5)]
    new_w, new_state = combine(state, updates)
    assert np.array_equal(new_w, w)
    assert np.array_equal(new_state.momentum, np.zeros(2))
    assert np.array_equal(new_state.second_moment, np.zeros(2))


def test_krum_selects_central_update():
    state = init_server_state("krum", np.zeros(1))
    updates = [upd(0, [0.0]), upd(1, [0.1]), upd(2, [0.2]), upd(3, [10.0])]
    new_w, _ = combine(state, updates)
    assert new_w.tolist() == [0.1]
    scores = krum_scores(updates, f=0)
    assert scores[1] == pytest.approx(0.02)
    assert scores[0] == pytest.approx(0.05)


def test_krum_tie_breaks_to_lowest_client_id():
    state = init_server_state("krum", np.zeros(1))
    # Two symmetric central points tie on score.
    updates = [upd(3, [1.0]), upd(1, [-1.0]), upd(2, [0.0]), upd(0, [0.0])]
    new_w, _ = combine(state, updates)
    assert new_w.tolist() == [0.0]


def test_krum_rejects_too_few_updates():
    state = init_server_state("krum", np.zeros(1))
    with pytest.raises(ValueError):
        combine(state, [upd(0, [0.0]), upd(1, [1.0])])


def test_combine_rejects_empty_and_mismatched():
    state = init_server_state("fedavg", np.zeros(2))
    with pytest.raises(ValueError):
        combine(state, [])
    with pytest.raises(ValueError):
        combine(state, [upd(0, [1.0, 2.0, 3.0])])


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_permutation_invariance(kind):
    rng = np.random.default_rng(7)
    for trial in range(20):
        w = rng.normal(size=5)
        updates = random_updates(rng, 4, 5)
        state = init_server_state(kind, w)
        base, _ = combine(state, updates)
        shuffled = [updates[i] for i in rng.permutation(4)]
        out, _ = combine(init_server_state(kind, w), shuffled)
        assert np.array_equal(base, out)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_idempotence_on_consensus(kind):
    rng = np.random.default_rng(3)
    w = rng.normal(size=6)
    updates = [upd(k, w, n=k + 1) for k in range(4)]
    new_w, _ = combine(init_server_state(kind, w), updates)
    assert np.allclose(new_w, w, atol=1e-12)


@pytest.mark.parametrize("kind", ["fedmedian", "fedtrimavg"])
def test_robust_outputs_within_coordinate_range(kind):
    rng = np.random.default_rng(11)
    for _ in range(20):
        updates = random_updates(rng, 5, 3)
        stacked = np.stack([u.params for u in updates])
        out, _ = combine(init_server_state(kind, np.zeros(3)), updates)
        assert np.all(out >= stacked.min(axis=0) - 1e-12)
        assert np.all(out <= stacked.max(axis=0) + 1e-12)


# --- subset_combine ---------------------------------------------------------

def test_subset_empty_returns_round_start_model():
    w = np.array([1.0, -2.0])
    state = init_server_state("fedadam", w)
    assert np.array_equal(subset_combine(state, []), w)


def test_subset_singleton_fedavg_returns_client_params():
    state = init_server_state("fedavg", np.zeros(2))
    u = upd(0, [0.5, 0.7], n=9)
    assert np.array_equal(subset_combine(state, [u]), u.params)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_subset_full_set_matches_combine(kind):
    rng = np.random.default_rng(5)
    w = rng.normal(size=4)
    updates = random_updates(rng, 4, 4)
    state = init_server_state(kind, w)
    via_subset = subset_combine(state, updates)
    via_combine, _ = combine(state, updates)
    assert np.array_equal(via_subset, via_combine)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_subset_combine_never_mutates_state(kind):
    rng = np.random.default_rng(6)
    w = rng.normal(size=3)
    updates = random_updates(rng, 3, 3)
    state = init_server_state(kind, w)
    snapshot = (
        state.global_params.copy(),
        None if state.momentum is None else state.momentum.copy(),
        None if state.second_moment is None else state.second_moment.copy(),
    )
    # Probe every coalition, then the full combine must be unaffected.
    for mask in range(1 << 3):
        subset_combine(state, [updates[i] for i in range(3) if mask & (1 << i)])
    assert np.array_equal(state.global_params, snapshot[0])
    for buf, ref in zip((state.momentum, state.second_moment), snapshot[1:]):
        assert (buf is None) == (ref is None)
        if buf is not None:
            assert np.array_equal(buf, ref)
    after, _ = combine(state, updates)
    fresh, _ = combine(init_server_state(kind, w), updates)
    assert np.array_equal(after, fresh)


def test_subset_krum_small_coalition_falls_back_to_average():
    state = init_server_state("krum", np.zeros(1))
    out = subset_combine(state, [upd(0, [1.0], n=1), upd(1, [3.0], n=3)])
    assert out.tolist() == [2.5]


def test_subset_rejects_length_mismatch():
    state = init_server_state("fedavg", np.zeros(2))
    with pytest.raises(ValueError):
        subset_combine(state, [upd(0, [1.0])])


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from([k for k in ALL_KINDS if k != StrategyKind.KRUM]),
    seed=st.integers(0, 10_000),
    num_clients=st.integers(1, 6),
)
def test_combine_output_is_finite(kind, seed, num_clients):
    rng = np.random.default_rng(seed)
    if kind == StrategyKind.FEDTRIMAVG and num_clients < 3:
        num_clients = 3
    updates = random_updates(rng, num_clients, 4)
    out, _ = combine(init_server_state(kind, rng.normal(size=4)), updates)
    assert np.all(np.isfinite(out))
