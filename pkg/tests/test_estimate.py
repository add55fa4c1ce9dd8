import math

import numpy as np
from frozendict import frozendict
from hypothesis import given
from hypothesis.strategies import floats, lists
from pytest import approx, raises

from bellphase.estimate import CorrelationEstimate, Tally, combine_strata, merge_strata

values = lists(floats(min_value=-100.0, max_value=100.0), min_size=2, max_size=60)


@given(values, values)
def test_tally_merge_matches_concatenation(left, right):
    merged = Tally.of(np.array(left)).merge(Tally.of(np.array(right)))
    whole = Tally.of(np.array(left + right))

    assert merged.n == whole.n
    assert merged.total == approx(whole.total, abs=1e-9)
    assert merged.total_sq == approx(whole.total_sq, rel=1e-12, abs=1e-9)


@given(values)
def test_tally_moments_match_numpy(sample):
    tally = Tally.of(np.array(sample))

    assert tally.mean == approx(np.mean(sample), abs=1e-9)
    assert tally.variance == approx(np.var(sample, ddof=1), rel=1e-6, abs=1e-6)


def test_tally_clicked_subset():
    tally = Tally.of(np.array((1.0, 0.0, 3.0, 0.0)), np.array((True, False, True, False)))

    assert (tally.n, tally.clicked, tally.total, tally.total_sq) == (4, 2, 4.0, 10.0)
    assert tally.mean == 1.0


def test_to_estimate_scales_mean_and_error():
    tally = Tally.of(np.array((1.0, 2.0, 3.0, 4.0)))
    estimate = tally.to_estimate(scale=-2.0)

    assert estimate.mean == -5.0
    assert estimate.std_error == approx(2.0 * math.sqrt(tally.variance / 4))
    assert estimate.total == -20.0
    assert estimate.n_total == estimate.n_clicked == 4


def test_empty_tally_is_harmless():
    estimate = Tally().to_estimate()

    assert (estimate.mean, estimate.std_error, estimate.n_total) == (0.0, 0.0, 0)
    assert estimate.click_fraction == 0.0


def test_correlation_estimate_fields():
    estimate = CorrelationEstimate(0.1, 0.01, 100, 25, 10.0)

    assert estimate.click_fraction == 0.25
    assert estimate.clicked_mean == 0.4
    assert estimate.within(0.13)
    assert not estimate.within(0.2)


def test_correlation_estimate_rejects_inconsistent_counts():
    with raises(AssertionError):
        CorrelationEstimate(0.0, 0.0, 10, 11)

    with raises(AssertionError):
        CorrelationEstimate(0.0, -1.0, 10, 10)


def test_strata_merge_per_key():
    left = frozendict({-1: Tally.of(np.array((1.0,))), 1: Tally.of(np.array((2.0, 4.0)))})
    right = frozendict({1: Tally.of(np.array((6.0,))), 3: Tally.of(np.array((5.0,)))})

    merged = merge_strata(left, right)

    assert sorted(merged) == [-1, 1, 3]
    assert merged[1] == Tally(3, 3, 12.0, 56.0)


def test_combine_strata_weights_means_and_variances():
    strata = {
        0: Tally.of(np.array((1.0, 3.0))),
        1: Tally.of(np.array((10.0, 14.0, 12.0))),
    }

    estimate = combine_strata(strata, {0: 0.25, 1: 0.75})

    assert estimate.mean == approx(0.25 * 2.0 + 0.75 * 12.0)
    assert estimate.std_error == approx(
        math.sqrt(0.25**2 * strata[0].variance / 2 + 0.75**2 * strata[1].variance / 3)
    )
    assert estimate.n_total == 5


@given(values, lists(floats(min_value=0.0, max_value=1.0), min_size=60, max_size=60))
def test_estimate_mean_is_click_fraction_times_clicked_mean(sample, draws):
    clicked = np.array(draws[: len(sample)]) < 0.3
    estimate = Tally.of(np.array(sample), clicked).to_estimate(scale=-0.75)

    if estimate.n_clicked:
        assert estimate.mean == estimate.click_fraction * estimate.clicked_mean
    else:
        assert estimate.mean == 0.0
