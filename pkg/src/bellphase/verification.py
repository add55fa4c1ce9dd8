"""Numerical checks: the fixed-Jz density against its sampler, and the
hemisphere-overlap argument against ensemble-independent probabilities."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import structlog
from scipy import integrate
from structlog.stdlib import BoundLogger
from toolz.functoolz import curry

from bellphase.ensembles import (
    GaugeConfig,
    Mode,
    ZoneSpec,
    sample_fixed_jz_orbits,
    sample_zones,
    support_edge,
    theta_marginal,
)
from bellphase.errors import ConfigurationError
from bellphase.estimate import CorrelationEstimate, Tally
from bellphase.geometry import Axis, Rng, generators_for, project_batch, sample_uniform_sphere_batch
from framework.core import run_chunks

MIN_DENSITY_SAMPLES = 10**6
DEFAULT_EDGE_EXCLUSION_BINS = 2
QUADRATURE_LIMIT = 200

# unit sphere split into two hemispheres about the preparation axis (L = 1/2)
HALF_CONFIG = GaugeConfig(1, Mode.DYNAMICAL)

logger: BoundLogger = structlog.get_logger(module=__name__)


@dataclass(frozen=True)
class DensityCheckReport:
    edges: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    included: np.ndarray
    l1: float
    edge_exclusion: float
    observed_range: tuple[float, float]

    def rows(self):
        """(bin low, bin high, empirical, predicted) for included bins."""
        for index in np.flatnonzero(self.included):
            yield (
                float(self.edges[index]),
                float(self.edges[index + 1]),
                float(self.empirical[index]),
                float(self.predicted[index]),
            )


def _histogram_worker(
    J0: float, Jz0: float, edges: np.ndarray, generator: np.random.Generator, count: int
) -> tuple[np.ndarray, float, float]:
    theta = sample_fixed_jz_orbits(generator, J0, Jz0, count).theta

    counts, _ = np.histogram(theta, bins=edges)

    return counts, float(theta.min(initial=math.inf)), float(theta.max(initial=-math.inf))


def _merge_histograms(
    left: tuple[np.ndarray, float, float], right: tuple[np.ndarray, float, float]
) -> tuple[np.ndarray, float, float]:
    return left[0] + right[0], min(left[1], right[1]), max(left[2], right[2])


def _bin_probability(low: float, high: float, J0: float, Jz0: float) -> float:
    value, _ = integrate.quad(theta_marginal, low, high, args=(J0, Jz0), limit=QUADRATURE_LIMIT)

    return value


def density_histogram_check(
    rng: Rng,
    J0: float,
    Jz0: float,
    n: int,
    bins: int = 100,
    edge_exclusion: float | None = None,
    substreams: int = 1,
) -> DensityCheckReport:
    """Histogram theta from the orbit sampler against the fixed-Jz marginal.

    Predicted bin frequencies are quadratures of the marginal over each bin.
    Bins within `edge_exclusion` radians of the support edges are dropped
    (the marginal diverges there) and both columns are renormalized over the
    remaining bins.
    """
    theta_min = support_edge(J0, Jz0)

    if n < MIN_DENSITY_SAMPLES:
        raise ConfigurationError(f"density check needs n >= {MIN_DENSITY_SAMPLES}, got {n}")

    if bins < 2 * DEFAULT_EDGE_EXCLUSION_BINS + 1:
        raise ConfigurationError(f"too few bins: {bins}")

    edges = np.linspace(theta_min, math.pi - theta_min, bins + 1)
    width = edges[1] - edges[0]
    exclusion = DEFAULT_EDGE_EXCLUSION_BINS * width if edge_exclusion is None else edge_exclusion

    counts, lowest, highest = run_chunks(
        curry(_histogram_worker)(J0, Jz0, edges),
        generators_for(rng, substreams),
        n,
        _merge_histograms,
        logger,
    )

    tolerance = 1e-9 * width
    included = (edges[:-1] >= theta_min + exclusion - tolerance) & (
        edges[1:] <= math.pi - theta_min - exclusion + tolerance
    )

    if not included.any():
        raise ConfigurationError("edge exclusion leaves no bins to compare")

    empirical = np.where(included, counts, 0).astype(float)
    empirical /= empirical.sum()

    predicted = np.array(
        [
            _bin_probability(low, high, J0, Jz0) if keep else 0.0
            for low, high, keep in zip(edges[:-1], edges[1:], included)
        ]
    )
    predicted /= predicted.sum()

    l1 = float(np.abs(empirical - predicted).sum())

    logger.info("Density check", J0=J0, Jz0=Jz0, n=n, bins=bins, l1=l1)

    return DensityCheckReport(
        edges, empirical, predicted, included, l1, float(exclusion), (lowest, highest)
    )


def _check_delta(delta: float | np.ndarray) -> None:
    if np.any(np.asarray(delta) < 0.0) or np.any(np.asarray(delta) > math.pi):
        raise ConfigurationError("axis difference must lie in [0, pi]")


def hemisphere_overlap(delta: float) -> float:
    _check_delta(delta)

    return 1.0 - delta / math.pi


def _upper_hemisphere(generator: np.random.Generator, n: int) -> np.ndarray:
    return sample_zones(generator, ZoneSpec(Axis(0.0), 1, HALF_CONFIG), n)


def hemisphere_overlap_mc(rng: Rng, delta: float, n: int, substreams: int = 1) -> CorrelationEstimate:
    """Fraction of the positive hemisphere about a lying in the one about b."""
    _check_delta(delta)

    def _worker(generator: np.random.Generator, count: int) -> Tally:
        inside = project_batch(_upper_hemisphere(generator, count), Axis(delta)) > 0.0

        return Tally.of(inside.astype(float))

    return run_chunks(_worker, generators_for(rng, substreams), n, Tally.merge, logger).to_estimate()


def indicator_gap_sigmas(estimate: CorrelationEstimate, delta: float) -> float:
    """Distance of the indicator candidate's estimate from cos^2(delta/2), in std errors."""
    gap = abs(math.cos(delta / 2) ** 2 - estimate.mean)

    return gap / estimate.std_error if estimate.std_error > 0 else math.inf


def indicator_candidate_check(rng: Rng, delta: float, n: int) -> tuple[CorrelationEstimate, float]:
    """The ensemble-independent candidate p+ = 1 on the b hemisphere, over rho_a^+."""
    estimate = hemisphere_overlap_mc(rng, delta, n)

    return estimate, indicator_gap_sigmas(estimate, delta)


@dataclass(frozen=True)
class ContradictionReport:
    deltas: np.ndarray
    overlap: np.ndarray
    model: np.ndarray
    gap: np.ndarray
    argmax: float
    max_gap: float

    def rows(self):
        for row in zip(self.deltas, self.overlap, self.model, self.gap):
            yield tuple(float(value) for value in row)


def contradiction_gap(deltas: np.ndarray) -> ContradictionReport:
    deltas = np.asarray(deltas, dtype=float)
    _check_delta(deltas)

    overlap = 1.0 - deltas / math.pi
    model = np.cos(deltas / 2) ** 2
    gap = model - overlap

    index = int(np.argmax(gap))

    return ContradictionReport(deltas, overlap, model, gap, float(deltas[index]), float(gap[index]))


class Witness(Enum):
    SHIFTED = "shifted"  # J_b + 1/2
    RAMP = "ramp"  # 2 J_b step(J_b), step(0) = 0

    def __call__(self, j_b: np.ndarray) -> np.ndarray:
        match self:
            case Witness.SHIFTED:
                return j_b + 0.5

            case Witness.RAMP:
                return 2.0 * j_b * (j_b > 0.0)


@dataclass(frozen=True)
class WitnessResult:
    estimate: CorrelationEstimate
    target: float
    out_of_range_fraction: float
    domain_out_of_range_fraction: float


def _outside_unit_interval(values: np.ndarray) -> np.ndarray:
    return (values < 0.0) | (values > 1.0)


def witness_check(
    rng: Rng, witness: Witness, delta: float, n: int, substreams: int = 1
) -> WitnessResult:
    """Integrate a witness function over rho_a^+ and count where it leaves [0, 1].

    The out-of-range fraction is reported both over rho_a^+ and over the
    whole unit sphere, the function's own domain.
    """
    _check_delta(delta)
    b = Axis(delta)

    def _worker(generator: np.random.Generator, count: int) -> tuple[Tally, int, int]:
        values = witness(project_batch(_upper_hemisphere(generator, count), b))
        anywhere = witness(project_batch(sample_uniform_sphere_batch(generator, 1.0, count), b))

        return (
            Tally.of(values),
            int(_outside_unit_interval(values).sum()),
            int(_outside_unit_interval(anywhere).sum()),
        )

    def _merge(
        left: tuple[Tally, int, int], right: tuple[Tally, int, int]
    ) -> tuple[Tally, int, int]:
        return left[0].merge(right[0]), left[1] + right[1], left[2] + right[2]

    tally, outside, outside_anywhere = run_chunks(
        _worker, generators_for(rng, substreams), n, _merge, logger
    )

    return WitnessResult(
        tally.to_estimate(),
        math.cos(delta / 2) ** 2,
        outside / tally.n,
        outside_anywhere / tally.n,
    )
