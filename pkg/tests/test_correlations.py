import math

import numpy as np
from hypothesis import given
from hypothesis.strategies import floats, sampled_from
from pytest import approx, mark, raises

from bellphase.correlations import (
    BELL_BOUND,
    ChshResult,
    ChshSettings,
    ConditionOn,
    RoundingResponse,
    StochasticResponse,
    analytic_E_dyn,
    analytic_E_ring,
    analytic_E_stat,
    analytic_source,
    bell_local_E,
    bell_local_source,
    chsh,
    chsh_scan,
    chsh_value,
    dyn_joint_table,
    joint_table_expectation,
    mc_E_dyn,
    mc_E_stat_ring,
    mc_E_stat_stratified,
    monte_carlo_source,
    ring_chsh,
    sum_k_squared,
)
from bellphase.detectors import Family, mixture_outcome_dist
from bellphase.ensembles import sample_singlet_pairs
from bellphase.errors import ConfigurationError, ContractViolation
from bellphase.geometry import Axis, RngStream
from conftest import GRID_SIGMAS, SIGMAS, STANDARD_AXES, axes_apart, dynamical, statistical

STANDARD = ChshSettings(*(Axis(theta) for theta in STANDARD_AXES))
DELTA_GRID = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)


@mark.parametrize(
    "twice_L delta expected".split(),
    ((1, 0.0, -0.5), (2, math.pi / 2, 0.0), (3, math.pi, 5 / 3), (1, math.pi / 4, -0.3535533905932738)),
)
def test_analytic_E_stat(twice_L, delta, expected):
    assert analytic_E_stat(statistical(twice_L), *axes_apart(delta)) == approx(expected, abs=1e-12)


@mark.parametrize(
    "twice_L delta expected".split(),
    ((1, 0.0, -0.25), (2, 0.0, -2 / 3), (2, math.pi, 2 / 3)),
)
def test_analytic_E_dyn(twice_L, delta, expected):
    assert analytic_E_dyn(dynamical(twice_L), *axes_apart(delta)) == approx(expected, abs=1e-12)


def test_analytic_models_check_mode():
    with raises(ConfigurationError):
        analytic_E_stat(dynamical(1), Axis(0.0), Axis(0.0))

    with raises(ConfigurationError):
        analytic_E_dyn(statistical(1), Axis(0.0), Axis(0.0))


@given(sampled_from((1, 2, 3, 4, 5)), floats(min_value=-7.0, max_value=7.0))
def test_E_depends_only_on_difference(twice_L, origin):
    config = statistical(twice_L)

    assert analytic_E_stat(config, *axes_apart(0.9, origin)) == approx(
        analytic_E_stat(config, *axes_apart(0.9)), abs=1e-9
    )


def test_sum_k_squared():
    assert sum_k_squared(statistical(1)) == 0.5
    assert sum_k_squared(statistical(2)) == 2.0
    assert sum_k_squared(statistical(3)) == approx(0.25 * 2 + 2.25 * 2)


@mark.parametrize(
    "twice_L delta".split(),
    ((1, math.pi / 4), (2, 0.0), (3, math.pi / 2)),
)
def test_stratified_examples(stream, twice_L, delta):
    config = statistical(twice_L)
    a, b = axes_apart(delta)

    estimate = mc_E_stat_stratified(stream, config, a, b, 10**6)

    assert estimate.within(analytic_E_stat(config, a, b), SIGMAS)
    assert estimate.n_total == 10**6 * config.outcome_count


@mark.parametrize("twice_L", (1, 2, 3))
def test_stratified_matches_closed_form_over_grid(twice_L):
    """Sixteen differences at 10^5 samples per stratum, within GRID_SIGMAS rather than SIGMAS."""
    config = statistical(twice_L)

    for index, delta in enumerate(DELTA_GRID):
        a, b = axes_apart(float(delta), 0.3)
        estimate = mc_E_stat_stratified(RngStream(17, index), config, a, b, 10**5)

        assert estimate.within(analytic_E_stat(config, a, b), GRID_SIGMAS)


def test_stratified_is_deterministic_per_substream_split():
    config, (a, b) = statistical(2), axes_apart(1.0)

    first = mc_E_stat_stratified(RngStream(3), config, a, b, 20_000, substreams=4)
    second = mc_E_stat_stratified(RngStream(3), config, a, b, 20_000, substreams=4)
    serial = mc_E_stat_stratified(RngStream(3), config, a, b, 20_000, substreams=1)

    assert first == second
    assert serial.within(analytic_E_stat(config, a, b), SIGMAS)
    assert first.within(analytic_E_stat(config, a, b), SIGMAS)


def test_stratified_rejects_empty_strata():
    with raises(ConfigurationError):
        mc_E_stat_stratified(RngStream(1), statistical(1), Axis(0.0), Axis(0.0), 0)


@mark.parametrize("twice_L", (1, 2, 3))
@mark.parametrize("eps", (0.05, 0.25))
def test_ring_closed_forms(twice_L, eps):
    config, (a, b) = statistical(twice_L), axes_apart(0.8)

    conditional, full = analytic_E_ring(config, a, b, eps)

    assert conditional == approx(analytic_E_stat(config, a, b) + eps * math.cos(0.8) / 2)
    if twice_L == 1:
        assert full == approx(-eps * (1 - eps) * math.cos(0.8) / 2)


def test_ring_conditional_example(stream):
    config, (a, b) = statistical(1), axes_apart(0.0)

    conditional, full = mc_E_stat_ring(stream, config, a, b, 0.01, 2 * 10**6)

    assert conditional.within(-0.5 * (1 - 0.01), SIGMAS)
    assert full.within(-0.01 * (1 - 0.01) / 2, SIGMAS)
    assert full.click_fraction == approx(0.02, abs=GRID_SIGMAS * math.sqrt(0.02 * 0.98 / (2 * 10**6)))


@mark.parametrize("twice_L", (1, 2, 3))
def test_ring_estimates_match_closed_forms(stream, twice_L):
    config, (a, b), eps = statistical(twice_L), axes_apart(0.5), 0.1

    conditional, full = mc_E_stat_ring(stream, config, a, b, eps, 10**6, substreams=3)
    expected_conditional, expected_full = analytic_E_ring(config, a, b, eps)

    assert conditional.within(expected_conditional, SIGMAS)
    assert full.within(expected_full, SIGMAS)


@mark.parametrize("twice_L", (1, 2))
def test_full_is_click_fraction_times_postselected_mean(stream, twice_L):
    config, (a, b) = statistical(twice_L), axes_apart(0.7)

    conditional, full = mc_E_stat_ring(stream, config, a, b, 0.05, 10**5, substreams=2)

    assert full.n_total == conditional.n_total
    assert full.n_clicked == conditional.n_clicked
    assert full.mean == full.click_fraction * full.clicked_mean


def test_ring_bias_is_linear_in_eps():
    config, (a, b) = statistical(1), axes_apart(0.0)
    exact = analytic_E_stat(config, a, b)

    def _mean_bias(eps: float) -> float:
        return float(
            np.mean(
                [
                    abs(mc_E_stat_ring(RngStream(seed), config, a, b, eps, 2 * 10**6)[0].mean - exact)
                    for seed in range(20)
                ]
            )
        )

    assert 0.3 <= _mean_bias(0.01) / _mean_bias(0.02) <= 0.7


@mark.parametrize("twice_L", (1, 2))
@mark.parametrize("eps", (0.02, 0.05, 0.1, 0.25, 0.5))
def test_full_ensemble_chsh_respects_bound(twice_L, eps):
    config = statistical(twice_L)

    conditional, full = ring_chsh(RngStream(23, twice_L), config, STANDARD, eps, 2 * 10**5)

    assert full.C <= BELL_BOUND + SIGMAS * full.std_error
    assert conditional.C > full.C


@mark.parametrize(
    "twice_L delta family".split(),
    ((1, 0.0, Family.FORCED), (1, 0.0, Family.MIXTURE), (2, math.pi / 4, Family.MIXTURE)),
)
def test_dynamical_examples(stream, twice_L, delta, family):
    config = dynamical(twice_L)
    a, b = axes_apart(delta)

    estimate = mc_E_dyn(stream, config, a, b, 10**6, family)

    assert estimate.within(analytic_E_dyn(config, a, b), SIGMAS)


@mark.parametrize(
    "twice_L family".split(),
    ((1, Family.FORCED), (1, Family.MIXTURE), (2, Family.MIXTURE)),
)
def test_dynamical_matches_closed_form_over_grid(twice_L, family):
    """Sixteen differences at 10^5 pairs each, within GRID_SIGMAS rather than SIGMAS."""
    config = dynamical(twice_L)

    for index, delta in enumerate(DELTA_GRID):
        a, b = axes_apart(float(delta), -0.4)
        estimate = mc_E_dyn(RngStream(29, index), config, a, b, 10**5, family)

        assert estimate.within(analytic_E_dyn(config, a, b), GRID_SIGMAS)


def test_families_agree_over_grid():
    """Forced against mixture at 10^5 pairs per difference, within GRID_SIGMAS combined errors."""
    config = dynamical(1)

    for index, delta in enumerate(DELTA_GRID):
        a, b = axes_apart(float(delta))
        forced = mc_E_dyn(RngStream(31, index), config, a, b, 10**5, Family.FORCED)
        mixture = mc_E_dyn(RngStream(37, index), config, a, b, 10**5, Family.MIXTURE)

        combined = math.hypot(forced.std_error, mixture.std_error)

        assert abs(forced.mean - mixture.mean) <= GRID_SIGMAS * combined + 1e-12


def test_conditioning_on_either_particle_agrees(stream):
    config, (a, b) = dynamical(2), axes_apart(1.1)

    on_a = mc_E_dyn(stream.substream(0), config, a, b, 10**6, condition_on=ConditionOn.A)
    on_b = mc_E_dyn(stream.substream(1), config, a, b, 10**6, condition_on=ConditionOn.B)

    assert on_a.within(analytic_E_dyn(config, a, b), SIGMAS)
    assert on_b.within(analytic_E_dyn(config, a, b), SIGMAS)


def test_forced_family_needs_half():
    with raises(ConfigurationError):
        mc_E_dyn(RngStream(1), dynamical(2), Axis(0.0), Axis(0.0), 10, Family.FORCED)


@mark.parametrize("twice_L", (1, 2, 3))
@mark.parametrize("delta", (0.0, 0.6, 2.5))
def test_joint_table_reproduces_closed_form(twice_L, delta):
    config = dynamical(twice_L)
    a, b = axes_apart(delta)

    joint = dyn_joint_table(config, a, b)

    assert joint.sum() == approx(1.0, abs=1e-12)
    assert joint.sum(axis=1) == approx(np.full(config.outcome_count, 1 / config.outcome_count))
    assert joint_table_expectation(config, joint) == approx(analytic_E_dyn(config, a, b), abs=1e-12)


def test_chsh_value_formula():
    assert chsh_value((-0.5, 0.5, -0.5, -0.5), 0.5) == 8.0


@mark.parametrize(
    "mode twice_L expected".split(),
    (
        ("statistical", 1, 4 * math.sqrt(2)),
        ("statistical", 2, 2 * math.sqrt(2)),
        ("dynamical", 1, 2 * math.sqrt(2)),
    ),
)
def test_chsh_maxima(mode, twice_L, expected):
    config = statistical(twice_L) if mode == "statistical" else dynamical(twice_L)

    result = chsh(analytic_source(config), STANDARD, config)

    assert result.C == approx(expected, abs=1e-12)
    assert result.violates_bound
    assert result.std_error == 0.0


def test_chsh_result_checks_value():
    with raises(AssertionError):
        ChshResult(1.0, (0.0, 0.0, 0.0, 0.0), STANDARD, 0.5)


def test_violation_needs_margin_when_estimated():
    expectations = (-0.5, 0.0, 0.0025, 0.0)
    C = chsh_value(expectations, 0.5)

    assert C == approx(2.01)
    assert ChshResult(C, expectations, STANDARD, 0.5).violates_bound
    assert ChshResult(C, expectations, STANDARD, 0.5, std_error=0.001).violates_bound
    assert not ChshResult(C, expectations, STANDARD, 0.5, std_error=0.01).violates_bound


def test_monte_carlo_chsh_agrees_with_analytic(stream):
    config = statistical(1)

    result = chsh(monte_carlo_source(mc_E_stat_stratified, stream, config, 10**5), STANDARD, config)

    assert abs(result.C - 4 * math.sqrt(2)) <= SIGMAS * result.std_error
    assert result.violates_bound


def test_monte_carlo_source_is_reproducible(stream):
    config = dynamical(1)

    first = chsh(monte_carlo_source(mc_E_dyn, stream, config, 10**4, family=Family.FORCED), STANDARD, config)
    second = chsh(monte_carlo_source(mc_E_dyn, stream, config, 10**4, family=Family.FORCED), STANDARD, config)

    assert first == second


@mark.parametrize(
    "mode twice_L expected violates".split(),
    (
        ("statistical", 1, 4 * math.sqrt(2), True),
        ("statistical", 3, 2 * math.sqrt(2) * 10 / 13.5, True),
        ("dynamical", 2, 2 * math.sqrt(2) * 2 / 3, False),
    ),
)
def test_chsh_scan_maxima(mode, twice_L, expected, violates):
    config = statistical(twice_L) if mode == "statistical" else dynamical(twice_L)

    scan = chsh_scan(analytic_source(config), config, 64)

    assert scan.best.C == approx(expected, abs=1e-12)
    assert scan.best.violates_bound is violates
    assert scan.values.max() == approx(scan.best.C, abs=1e-12)
    assert chsh(analytic_source(config), scan.best.settings, config).C == approx(scan.best.C, abs=1e-12)


def test_chsh_scan_rows_cover_grid():
    config = statistical(1)

    scan = chsh_scan(analytic_source(config), config, 8)
    rows = list(scan.rows())

    assert len(rows) == 8**3
    assert max(value for *_, value in rows) == approx(scan.best.C, abs=1e-12)


def test_chsh_scan_rejects_coarse_grid():
    with raises(ConfigurationError):
        chsh_scan(analytic_source(statistical(1)), statistical(1), 4)


@mark.parametrize("twice_L", (1, 2, 3))
def test_bell_local_aligned_axes_anticorrelate(stream, twice_L):
    config = dynamical(twice_L)
    a = Axis(0.3)

    estimate = bell_local_E(stream, None, a, a, 10**5, config)

    # same draws as the estimator: chunk 0 of the stream
    j1, _ = sample_singlet_pairs(stream.substream(0).generator(), config, 10**5)
    readouts = RoundingResponse(config)(None, j1, a)

    assert estimate.mean < 0.0
    assert estimate.mean == approx(-np.mean(readouts**2), rel=1e-12)


def test_bell_local_orthogonal_axes(stream):
    estimate = bell_local_E(stream, None, *axes_apart(math.pi / 2), 10**6, dynamical(1))

    assert estimate.within(0.0, SIGMAS)


def test_bell_local_chsh_standard_axes(stream):
    config = dynamical(1)

    result = chsh(bell_local_source(stream, config, 10**6), STANDARD, config)

    assert result.C <= BELL_BOUND + SIGMAS * result.std_error
    assert result.violates_bound is False


def test_bell_local_chsh_never_violates_on_random_quadruples():
    config = dynamical(1)
    angles = RngStream(41, 1).generator().uniform(0.0, 2 * math.pi, (100, 4))

    for index, quadruple in enumerate(angles):
        axes = ChshSettings(*(Axis(float(theta)) for theta in quadruple))
        result = chsh(bell_local_source(RngStream(41, 2 + index), config, 10**5), axes, config)

        # the sign model reaches C = 2 on open sets of settings
        assert result.C <= BELL_BOUND + SIGMAS * result.std_error
        assert not result.violates_bound


def test_stochastic_response_is_bounded_and_mean_preserving(stream):
    config, a = dynamical(2), Axis(0.2)
    vectors = np.tile(np.array(((0.0, 0.0, 0.9),)), (10**5, 1))

    readouts = StochasticResponse(config)(stream.generator(), vectors, a)

    assert set(np.unique(readouts)) <= set(config.readouts)
    expected = 0.9 * math.cos(0.2) * config.L / config.J
    assert abs(readouts.mean() - expected) <= SIGMAS * readouts.std(ddof=1) / math.sqrt(10**5)


def test_stochastic_response_draws_from_the_mixture_family(stream):
    config, n = dynamical(2), 10**5
    vectors = np.tile(np.array(((0.0, 0.0, 0.9),)), (n, 1))

    readouts = StochasticResponse(config, lambda0=0.1)(stream.generator(), vectors, Axis(0.0))
    expected = mixture_outcome_dist(0.9 * config.L / config.J, config, 0.1)

    for k, p in zip(config.readouts, expected.probabilities):
        assert p > 0.0
        assert abs((readouts == k).mean() - p) <= GRID_SIGMAS * math.sqrt(p * (1 - p) / n)


def test_stochastic_response_is_sharp_on_the_axis(generator):
    config = dynamical(2)
    vectors = np.array(((0.0, 0.0, config.J), (0.0, 0.0, -config.J)))

    assert list(StochasticResponse(config)(generator, vectors, Axis(0.0))) == [config.L, -config.L]


def test_stochastic_responses_keep_the_bound(stream):
    config = dynamical(1)
    responses = (StochasticResponse(config),) * 2

    stochastic = chsh(
        lambda a, b: bell_local_E(stream.substream(9), responses, a, b, 10**5, config), STANDARD, config
    )

    assert stochastic.C <= BELL_BOUND + SIGMAS * stochastic.std_error


def test_rounding_response_grid(generator):
    config = dynamical(2)
    vectors = np.array(((0.0, 0.0, 1.49), (0.0, 0.0, -0.3), (0.0, 0.0, 0.6)))

    assert list(RoundingResponse(config)(generator, vectors, Axis(0.0))) == [1.0, 0.0, 1.0]


def test_unbounded_response_is_a_contract_violation(stream):
    def _runaway(generator, vectors, axis):
        return vectors[:, 2] * 10.0

    with raises(ContractViolation):
        bell_local_E(stream, (_runaway, _runaway), Axis(0.0), Axis(0.0), 100, dynamical(1))
