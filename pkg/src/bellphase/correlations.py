"""Pair expectations E(a, b), the CHSH function and the Bell-local baseline.

The S-detector estimators normalize a delta-function sum over readouts by
the axis length 2L: every readout stratum carries weight 1/(2L), including
the extremal ones that the sphere only grants a half-width ring. The
finite-ring estimator reproduces that with a 1/(2 eps) factor and doubled
weight on extremal-ring clicks. This convention is what makes the maximal
statistical CHSH value 4*sqrt(2) at L = 1/2.
"""

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import numpy as np
import structlog
from frozendict import frozendict
from structlog.stdlib import BoundLogger
from toolz.functoolz import curry

from bellphase.detectors import (
    DEFAULT_LAMBDA0,
    Family,
    check_ring_width,
    mixture_brackets,
    outcome_table,
    sample_T_batch,
    sharp_readings,
)
from bellphase.ensembles import GaugeConfig, Mode, sample_singlet_pairs, zone_rows
from bellphase.errors import ConfigurationError, ContractViolation
from bellphase.estimate import (
    CorrelationEstimate,
    Strata,
    Tally,
    combine_strata,
    merge_strata,
)
from bellphase.geometry import (
    TAU,
    Axis,
    Rng,
    RngStream,
    generators_for,
    project_batch,
    sample_about_axis,
)
from framework.core import run_chunks

BELL_BOUND = 2.0
VIOLATION_SIGMAS = 3.0
DEFAULT_SCAN_RESOLUTION = 64
RESPONSE_TOLERANCE = 1e-12

logger: BoundLogger = structlog.get_logger(module=__name__)


class ConditionOn(Enum):
    A = "a"
    B = "b"


def _require(config: GaugeConfig, mode: Mode) -> None:
    if config.mode is not mode:
        raise ConfigurationError(f"{mode.value} model expected, got {config.mode.value}")


def sum_k_squared(config: GaugeConfig) -> float:
    L = config.L

    return L * (L + 1) * (2 * L + 1) / 3


def analytic_E_stat(config: GaugeConfig, a: Axis, b: Axis) -> float:
    _require(config, Mode.STATISTICAL)
    L = config.L

    return -(L + 1) * (2 * L + 1) / 6 * math.cos(b.theta - a.theta)


def analytic_E_dyn(config: GaugeConfig, a: Axis, b: Axis) -> float:
    _require(config, Mode.DYNAMICAL)
    L = config.L

    return -L * (L + 1) / 3 * math.cos(b.theta - a.theta)


def analytic_E_ring(
    config: GaugeConfig, a: Axis, b: Axis, eps: float
) -> tuple[float, float]:
    """Expected (conditional, full) finite-ring estimates.

    Under the singlet ensemble J_1a is uniform on [-L, L] and the mean of
    D given J_1a = u is -u cos(b - a); integrating over each ring gives both
    closed forms. The conditional bias is +eps cos(b - a)/2 for every L.
    """
    _require(config, Mode.STATISTICAL)
    check_ring_width(eps)

    L, cosine = config.L, math.cos(b.theta - a.theta)

    conditional = analytic_E_stat(config, a, b) + eps * cosine / 2
    full = -cosine * eps / (2 * L) * (2 * sum_k_squared(config) - 2 * L * L - eps * L)

    return conditional, full


def _stratified_worker(
    config: GaugeConfig, a: Axis, b: Axis, generator: np.random.Generator, count: int
) -> Strata:
    strata = {}

    for twice_k in range(-config.twice_L, config.twice_L + 1, 2):
        k = twice_k / 2

        # J_1a = k exactly: polar angle about a with cos = k/L
        j1 = sample_about_axis(generator, a, config.J, k / config.L, count)
        direct = project_batch(-j1, b)

        strata[twice_k] = Tally.of(k * direct)

    return frozendict(strata)


def mc_E_stat_stratified(
    rng: Rng,
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    n: int,
    substreams: int = 1,
) -> CorrelationEstimate:
    """Stratified estimate of the S-D expectation; n samples per readout stratum."""
    _require(config, Mode.STATISTICAL)

    if n < 1:
        raise ConfigurationError("need at least one sample per stratum")

    strata = run_chunks(
        curry(_stratified_worker)(config, a, b),
        generators_for(rng, substreams),
        n,
        merge_strata,
        logger,
    )

    estimate = combine_strata(strata, {key: 1 / config.twice_L for key in strata})

    logger.debug(
        "Stratified estimate",
        L=config.label(),
        delta=b.theta - a.theta,
        mean=estimate.mean,
        std_error=estimate.std_error,
    )

    return estimate


def _ring_worker(
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    eps: float,
    generator: np.random.Generator,
    count: int,
) -> tuple[Tally, Tally]:
    j1, j2 = sample_singlet_pairs(generator, config, count)

    sharp, clicked, extremal = sharp_readings(project_batch(j1, a), config, eps)
    products = sharp * project_batch(j2, b)

    normalized = products * np.where(extremal, 2.0, 1.0) / (2.0 * eps)

    return Tally.of(normalized, clicked), Tally.of(products, clicked)


def _merge_pair(left: tuple[Tally, Tally], right: tuple[Tally, Tally]) -> tuple[Tally, Tally]:
    return left[0].merge(right[0]), left[1].merge(right[1])


def mc_E_stat_ring(
    rng: Rng,
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    eps: float,
    n: int,
    substreams: int = 1,
) -> tuple[CorrelationEstimate, CorrelationEstimate]:
    """(conditional, full) finite-ring estimates from one shared sample set.

    conditional: delta-normalized postselected estimate, O(eps) bias.
    full: plain mean of S*D over all samples, no-clicks counting as 0.
    """
    _require(config, Mode.STATISTICAL)
    check_ring_width(eps)

    conditional, full = run_chunks(
        curry(_ring_worker)(config, a, b, eps),
        generators_for(rng, substreams),
        n,
        _merge_pair,
        logger,
    )

    return conditional.to_estimate(), full.to_estimate()


def _dyn_worker(
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    family: Family,
    lambda0: float,
    condition_on: ConditionOn,
    generator: np.random.Generator,
    count: int,
) -> Tally:
    j1, j2 = sample_singlet_pairs(generator, config, count)
    readouts = config.readouts

    match condition_on:
        case ConditionOn.A:
            # T1 fixes the zone of particle 1; particle 2 sits in the opposite zone
            t1 = readouts[zone_rows(project_batch(j1, a), config)]
            table = outcome_table(config, a, b, family, lambda0)
            t2 = sample_T_batch(generator, table, zone_rows(project_batch(j2, a), config))

        case ConditionOn.B:
            t2 = readouts[zone_rows(project_batch(j2, b), config)]
            table = outcome_table(config, b, a, family, lambda0)
            t1 = sample_T_batch(generator, table, zone_rows(project_batch(j1, b), config))

    return Tally.of(t1 * t2)


def mc_E_dyn(
    rng: Rng,
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    n: int,
    family: Family = Family.MIXTURE,
    lambda0: float = DEFAULT_LAMBDA0,
    condition_on: ConditionOn = ConditionOn.A,
    substreams: int = 1,
) -> CorrelationEstimate:
    _require(config, Mode.DYNAMICAL)

    if family is Family.FORCED and config.twice_L != 1:
        raise ConfigurationError("forced probabilities exist only for L = 1/2")

    tally = run_chunks(
        curry(_dyn_worker)(config, a, b, family, lambda0, condition_on),
        generators_for(rng, substreams),
        n,
        Tally.merge,
        logger,
    )

    return tally.to_estimate()


def dyn_joint_table(
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    family: Family = Family.MIXTURE,
    lambda0: float = DEFAULT_LAMBDA0,
) -> np.ndarray:
    """P(T_1a = k and T_2b = k'), rows k and columns k' ordered from -L."""
    _require(config, Mode.DYNAMICAL)

    table = outcome_table(config, a, b, family, lambda0)

    # particle 1 in zone k leaves particle 2 in zone -k, i.e. the mirrored row
    return table[::-1] / config.outcome_count


def joint_table_expectation(config: GaugeConfig, joint: np.ndarray) -> float:
    readouts = config.readouts

    return float(readouts @ joint @ readouts)


@dataclass(frozen=True)
class ChshSettings:
    a: Axis
    b: Axis
    a_prime: Axis
    b_prime: Axis

    def pairs(self) -> tuple[tuple[Axis, Axis], ...]:
        return (
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        )

    def angles(self) -> tuple[float, float, float, float]:
        return (self.a.theta, self.b.theta, self.a_prime.theta, self.b_prime.theta)


def chsh_value(expectations: tuple[float, float, float, float], L: float) -> float:
    ab, ab_prime, a_prime_b, a_prime_b_prime = expectations

    return (abs(ab - ab_prime) + abs(a_prime_b + a_prime_b_prime)) / L**2


@dataclass(frozen=True)
class ChshResult:
    C: float
    expectations: tuple[float, float, float, float]
    settings: ChshSettings
    L: float
    std_error: float = 0.0
    violates_bound: bool = field(init=False)

    def __post_init__(self) -> None:
        assert math.isclose(self.C, chsh_value(self.expectations, self.L), abs_tol=1e-12)

        # estimated values must clear the bound by VIOLATION_SIGMAS standard errors
        threshold = BELL_BOUND + VIOLATION_SIGMAS * self.std_error

        object.__setattr__(self, "violates_bound", bool(self.C > threshold))


type ExpectationSource = Callable[[Axis, Axis], float | CorrelationEstimate]


def _split(value: float | CorrelationEstimate) -> tuple[float, float]:
    match value:
        case CorrelationEstimate():
            return value.mean, value.std_error

        case _:
            return float(value), 0.0


def _result(
    pairs: list[tuple[float, float]], settings: ChshSettings, config: GaugeConfig
) -> ChshResult:
    expectations = tuple(float(mean) for mean, _ in pairs)
    std_error = math.sqrt(math.fsum(float(se) ** 2 for _, se in pairs)) / config.L**2

    return ChshResult(
        chsh_value(expectations, config.L),  # type: ignore[arg-type]
        expectations,  # type: ignore[arg-type]
        settings,
        config.L,
        std_error,
    )


def chsh(source: ExpectationSource, settings: ChshSettings, config: GaugeConfig) -> ChshResult:
    return _result([_split(source(a, b)) for a, b in settings.pairs()], settings, config)


def analytic_source(config: GaugeConfig) -> ExpectationSource:
    match config.mode:
        case Mode.STATISTICAL:
            return curry(analytic_E_stat)(config)

        case Mode.DYNAMICAL:
            return curry(analytic_E_dyn)(config)


def monte_carlo_source(
    estimator: Callable[..., CorrelationEstimate],
    stream: RngStream,
    config: GaugeConfig,
    n: int,
    **options,
) -> ExpectationSource:
    """Each call draws from the next substream of `stream`, in call order."""
    counter = itertools.count()

    def _source(a: Axis, b: Axis) -> CorrelationEstimate:
        return estimator(stream.substream(next(counter)), config, a, b, n, **options)

    return _source


@dataclass(frozen=True)
class ScanResult:
    differences: np.ndarray
    values: np.ndarray
    best: ChshResult

    def rows(self):
        """(b - a, a' - b, b' - a', C) for every grid point."""
        grid = self.differences
        res = len(grid)

        for i, j, l in itertools.product(range(res), repeat=3):
            yield grid[i], grid[j], grid[l], float(self.values[i, j, l])


def chsh_scan(
    source: ExpectationSource,
    config: GaugeConfig,
    resolution: int = DEFAULT_SCAN_RESOLUTION,
) -> ScanResult:
    """Maximize C over the grid of successive differences (b-a, a'-b, b'-a').

    E depends on the axes only through their difference, so E is evaluated
    once per grid difference and C is assembled by index arithmetic mod 2pi.
    """
    if resolution < 8:
        raise ConfigurationError(f"scan resolution must be at least 8, got {resolution}")

    differences = np.arange(resolution) * TAU / resolution
    origin = Axis(0.0)

    evaluated = [_split(source(origin, Axis(float(delta)))) for delta in differences]
    e = np.array([mean for mean, _ in evaluated])
    se = np.array([error for _, error in evaluated])

    i, j, l = np.meshgrid(*(np.arange(resolution),) * 3, indexing="ij")
    ab_prime = (i + j + l) % resolution
    a_prime_b = (-j) % resolution

    values = (np.abs(e[i] - e[ab_prime]) + np.abs(e[a_prime_b] + e[l])) / config.L**2

    bi, bj, bl = np.unravel_index(int(np.argmax(values)), values.shape)
    settings = ChshSettings(
        origin,
        Axis(float(differences[bi])),
        Axis(float(differences[bi] + differences[bj])),
        Axis(float(differences[bi] + differences[bj] + differences[bl])),
    )

    best = _result(
        [
            (e[index], se[index])
            for index in (bi, (bi + bj + bl) % resolution, (-bj) % resolution, bl)
        ],
        settings,
        config,
    )

    logger.info("Scanned CHSH grid", resolution=resolution, best=best.C, L=config.label())

    return ScanResult(differences, values, best)


def ring_chsh(
    stream: RngStream,
    config: GaugeConfig,
    settings: ChshSettings,
    eps: float,
    n: int,
    substreams: int = 1,
) -> tuple[ChshResult, ChshResult]:
    """(conditional, full) CHSH values, each pair estimated once from substream i."""
    estimates = [
        mc_E_stat_ring(stream.substream(index), config, a, b, eps, n, substreams)
        for index, (a, b) in enumerate(settings.pairs())
    ]

    conditional = _result([_split(pair[0]) for pair in estimates], settings, config)
    full = _result([_split(pair[1]) for pair in estimates], settings, config)

    return conditional, full


class ResponseFunction(Protocol):
    def __call__(
        self, generator: np.random.Generator, vectors: np.ndarray, axis: Axis
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class RoundingResponse:
    """Deterministic readout: the projection rounded to the nearest grid value."""

    config: GaugeConfig

    def __call__(
        self, generator: np.random.Generator, vectors: np.ndarray, axis: Axis
    ) -> np.ndarray:
        L = self.config.L
        rows = np.clip(np.rint(project_batch(vectors, axis) + L), 0, self.config.twice_L)

        return rows - L


@dataclass(frozen=True)
class StochasticResponse:
    """Random readout whose probabilities depend on the particle's own vector.

    Draws from the mixture family with target mean proj * L / J: a uniform
    readout with the mixture weight, otherwise one of the two grid values
    bracketing the rescaled target.
    """

    config: GaugeConfig
    lambda0: float = DEFAULT_LAMBDA0

    def __call__(
        self, generator: np.random.Generator, vectors: np.ndarray, axis: Axis
    ) -> np.ndarray:
        targets = project_batch(vectors, axis) * self.config.L / self.config.J
        weight, lower, upper_share = mixture_brackets(targets, self.config, self.lambda0)

        u = generator.random((2, len(targets)))
        uniform = generator.integers(0, self.config.outcome_count, len(targets))

        rows = np.where(u[1] < weight, uniform, lower + (u[0] < upper_share))

        return rows - self.config.L


def rounding_response(config: GaugeConfig) -> RoundingResponse:
    return RoundingResponse(config)


def _bounded(readouts: np.ndarray, L: float) -> np.ndarray:
    if np.any(np.abs(readouts) > L + RESPONSE_TOLERANCE):
        raise ContractViolation(f"response outside [-{L}, {L}]")

    return readouts


def _local_worker(
    config: GaugeConfig,
    responses: tuple[ResponseFunction, ResponseFunction],
    a: Axis,
    b: Axis,
    generator: np.random.Generator,
    count: int,
) -> Tally:
    j1, j2 = sample_singlet_pairs(generator, config, count)
    first, second = responses

    return Tally.of(
        _bounded(first(generator, j1, a), config.L) * _bounded(second(generator, j2, b), config.L)
    )


def bell_local_E(
    rng: Rng,
    responses: tuple[ResponseFunction, ResponseFunction] | None,
    a: Axis,
    b: Axis,
    n: int,
    config: GaugeConfig,
    substreams: int = 1,
) -> CorrelationEstimate:
    """Expectation of A(J1) B(J2) for per-particle response functions."""
    responses = responses or (rounding_response(config),) * 2

    tally = run_chunks(
        curry(_local_worker)(config, responses, a, b),
        generators_for(rng, substreams),
        n,
        Tally.merge,
        logger,
    )

    return tally.to_estimate()


def bell_local_source(
    stream: RngStream,
    config: GaugeConfig,
    n: int,
    responses: tuple[ResponseFunction, ResponseFunction] | None = None,
    substreams: int = 1,
) -> ExpectationSource:
    counter = itertools.count()

    def _source(a: Axis, b: Axis) -> CorrelationEstimate:
        return bell_local_E(stream.substream(next(counter)), responses, a, b, n, config, substreams)

    return _source


