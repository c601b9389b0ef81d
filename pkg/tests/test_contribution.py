import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedshap.contribution import (
    GroundTruth,
    NonNormalizableError,
    RoundShapleyLog,
    ground_truth,
    normalize,
    optimal_halting_round,
    weighted_cumulative,
)


def log_from(rows):
    rows = [np.asarray(r, dtype=float) for r in rows]
    return RoundShapleyLog(tuple(rows), rows[0].size)


def test_round_weights_follow_inverse_linear_schedule():
    # Probe each round's weight with a unit vector: at R=10 the first round
    # carries 10/10, the second 9/10, the last recorded round 1/10.
    num_rounds = 10
    for probe in range(num_rounds):
        rows = [[1.0] if t == probe else [0.0] for t in range(num_rounds)]
        out = weighted_cumulative(log_from(rows), 10)
        assert out[0] == pytest.approx((10 - probe) / 10, abs=0)


def test_halting_at_one_keeps_only_first_round():
    log = log_from([[1.0, 2.0], [5.0, 5.0], [9.0, 9.0]])
    assert weighted_cumulative(log, 1).tolist() == [1.0, 2.0]


def test_constant_rounds_closed_form():
    phi = np.array([0.2, 0.5, 0.3])
    for R in (1, 4, 7):
        log = log_from([phi] * (R + 1))
        expected = phi * (R + 1) / 2
        assert np.allclose(weighted_cumulative(log, R), expected, atol=1e-12)


def test_halting_round_bounds():
    log = log_from([[1.0]])
    with pytest.raises(ValueError):
        weighted_cumulative(log, 0)
    with pytest.raises(ValueError):
        weighted_cumulative(log, 2)


def test_weighted_cumulative_is_linear():
    rng = np.random.default_rng(0)
    a = [rng.normal(size=3) for _ in range(5)]
    b = [rng.normal(size=3) for _ in range(5)]
    lhs = weighted_cumulative(log_from([x + 2 * y for x, y in zip(a, b)]), 4)
    rhs = weighted_cumulative(log_from(a), 4) + 2 * weighted_cumulative(log_from(b), 4)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_normalize_basic():
    out = normalize([1.0, 1.0, 2.0])
    assert out.percentages.tolist() == [0.25, 0.25, 0.5]
    assert out.raw.tolist() == [1.0, 1.0, 2.0]
    assert not out.has_negative


def test_normalize_single_client():
    assert normalize([5.0]).percentages.tolist() == [1.0]


def test_normalize_allows_negative_entries_and_flags_them():
    out = normalize([-1.0, 3.0])
    assert out.percentages.tolist() == [-0.5, 1.5]
    assert out.percentages.sum() == pytest.approx(1.0, abs=1e-12)
    assert out.has_negative


def test_normalize_fails_loudly_on_nonpositive_total():
    with pytest.raises(NonNormalizableError) as err:
        normalize([-2.0, 1.0])
    assert err.value.raw.tolist() == [-2.0, 1.0]
    with pytest.raises(NonNormalizableError):
        normalize([0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8))
def test_normalize_sums_to_one_when_it_succeeds(raw):
    try:
        out = normalize(raw)
    except NonNormalizableError:
        return
    assert abs(out.percentages.sum() - 1.0) < 1e-9


def test_pipeline_scale_invariance():
    rng = np.random.default_rng(1)
    rows = [np.abs(rng.normal(size=4)) for _ in range(6)]
    base = normalize(weighted_cumulative(log_from(rows), 5)).percentages
    # Power-of-two scaling is exact in floating point.
    doubled = normalize(weighted_cumulative(log_from([4.0 * r for r in rows]), 5))
    assert np.array_equal(doubled.percentages, base)
    odd = normalize(weighted_cumulative(log_from([3.0 * r for r in rows]), 5))
    assert np.abs(odd.percentages - base).max() < 1e-12


def test_ground_truth_arithmetic():
    assert ground_truth([1, 3]).percentages.tolist() == [0.25, 0.75]
    assert np.allclose(ground_truth([7, 7, 7]).percentages, 1 / 3)
    split = ground_truth([10_000, 15_000, 25_000])
    assert split.percentages.tolist() == [0.2, 0.3, 0.5]


def test_ground_truth_rejects_bad_sizes():
    with pytest.raises(ValueError):
        ground_truth([])
    with pytest.raises(ValueError):
        ground_truth([3, 0])


def test_optimal_halting_single_round():
    log = log_from([[0.6, 0.4]])
    r, dist = optimal_halting_round(log, ground_truth([6, 4]))
    assert r == 1
    assert dist == pytest.approx(0.0, abs=1e-12)


def test_optimal_halting_prefers_matching_round():
    truth = GroundTruth(np.array([0.7, 0.2, 0.1]))
    # Round 0 exactly proportional to the truth; later rounds pull away.
    log = log_from([[0.7, 0.2, 0.1], [-0.5, 0.7, -0.2], [0.1, -0.4, 0.3]])
    r, dist = optimal_halting_round(log, truth)
    # Independent scan over all candidates.
    expected = {}
    for cand in (1, 2, 3):
        try:
            pct = normalize(weighted_cumulative(log, cand)).percentages
        except NonNormalizableError:
            continue
        expected[cand] = float(((pct - truth.percentages) ** 2).sum())
    assert r == min(expected, key=lambda c: (expected[c], c))
    assert r == 1
    assert dist == pytest.approx(expected[r], abs=0)


def test_optimal_halting_tie_breaks_to_smaller_round():
    # Identical per-round vectors: every R gives the same contribution.
    log = log_from([[0.5, 0.5]] * 4)
    r, _ = optimal_halting_round(log, ground_truth([1, 9]))
    assert r == 1


def test_optimal_halting_skips_non_normalizable_candidates():
    # R = 1 uses only round 0 whose sum is negative; R = 2 is fine.
    log = log_from([[-1.0, 0.5], [2.0, 1.0]])
    r, _ = optimal_halting_round(log, ground_truth([1, 1]))
    assert r == 2


def test_optimal_halting_errors_when_all_candidates_fail():
    log = log_from([[-1.0, 0.0], [-2.0, 0.0]])
    with pytest.raises(NonNormalizableError):
        optimal_halting_round(log, ground_truth([1, 1]))
