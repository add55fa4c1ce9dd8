"""Sharp (S), direct (D) and interacting quantized (T) detector models."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from bellphase.ensembles import GaugeConfig, Mode, zone_mean_projection
from bellphase.errors import ConfigurationError, ContractViolation
from bellphase.geometry import Axis, MomentumVector, Rng, as_generator, project

DEFAULT_LAMBDA0 = 0.05
MIXTURE_EPSILON = 1e-9
NORMALIZATION_TOLERANCE = 1e-12


class Family(Enum):
    FORCED = "forced"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class DetectorReading:
    # None is the no-click outcome, distinct from a true 0 readout
    value: float | None
    extremal: bool = False

    @property
    def clicked(self) -> bool:
        return self.value is not None

    @property
    def numeric(self) -> float:
        return 0.0 if self.value is None else self.value


@dataclass(frozen=True)
class OutcomeDistribution:
    probabilities: tuple[float, ...]
    twice_L: int

    def __post_init__(self) -> None:
        if len(self.probabilities) != self.twice_L + 1:
            raise ContractViolation(
                f"{len(self.probabilities)} probabilities for {self.twice_L + 1} readouts"
            )

        if min(self.probabilities) < 0.0:
            raise ContractViolation(f"negative probability in {self.probabilities}")

        if abs(math.fsum(self.probabilities) - 1.0) > NORMALIZATION_TOLERANCE:
            raise ContractViolation(f"probabilities sum to {math.fsum(self.probabilities)}")

    @property
    def readouts(self) -> np.ndarray:
        return (np.arange(self.twice_L + 1) * 2 - self.twice_L) / 2

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in zip(self.readouts, self.probabilities))

    def as_array(self) -> np.ndarray:
        return np.array(self.probabilities)

    def probability(self, k: float) -> float:
        return self.probabilities[round(2 * k + self.twice_L) // 2]


def check_ring_width(eps: float) -> None:
    if not 0.0 < eps <= 0.5:
        raise ConfigurationError(f"ring half-width eps must lie in (0, 1/2], got {eps}")


def sharp_readings(
    projections: np.ndarray, config: GaugeConfig, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized S detector: (readout or 0, clicked, extremal) per projection."""
    if config.mode is not Mode.STATISTICAL:
        raise ConfigurationError("the sharp detector belongs to the statistical model")

    check_ring_width(eps)

    rows = np.clip(np.rint(projections + config.L), 0, config.twice_L)
    nearest = rows - config.L

    clicked = np.abs(projections - nearest) < eps
    extremal = clicked & ((rows == 0) | (rows == config.twice_L))

    return np.where(clicked, nearest, 0.0), clicked, extremal


def detect_sharp(
    j1: MomentumVector, a: Axis, eps: float, config: GaugeConfig
) -> DetectorReading:
    values, clicked, extremal = sharp_readings(np.array([project(j1, a)]), config, eps)

    if not clicked[0]:
        return DetectorReading(None)

    return DetectorReading(float(values[0]), bool(extremal[0]))


def detect_direct(j2: MomentumVector, b: Axis) -> DetectorReading:
    return DetectorReading(project(j2, b))


def forced_outcome_dist_half(k: float, a: Axis, b: Axis) -> OutcomeDistribution:
    if abs(k) != 0.5:
        raise ConfigurationError(f"forced probabilities need k = +-1/2, got {k}")

    shift = zone_mean_projection(k, a, b)

    # ordered k = -1/2, +1/2
    return OutcomeDistribution((0.5 - shift, 0.5 + shift), 1)


def check_mixing_weight(lambda0: float) -> None:
    if not 0.0 < lambda0 < 1.0:
        raise ConfigurationError(f"lambda0 must lie in (0, 1), got {lambda0}")


def mixture_brackets(
    targets: np.ndarray, config: GaugeConfig, lambda0: float = DEFAULT_LAMBDA0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(uniform weight, lower bracket row, upper share) for each target mean.

    The uniform weight shrinks near |m| = L so the bracketing mean stays
    feasible and vanishes at |m| = L, leaving the extremal readout alone.
    """
    check_mixing_weight(lambda0)
    L = config.L

    m = np.clip(np.asarray(targets, dtype=float), -L, L)
    weight = np.minimum(lambda0, (L - np.abs(m)) / (L + MIXTURE_EPSILON))
    position = m / (1.0 - weight) + L

    lower = np.clip(np.floor(position), 0, config.twice_L - 1).astype(np.int64)
    upper_share = np.clip(position - lower, 0.0, 1.0)

    return weight, lower, upper_share


def mixture_outcome_dist(
    target_mean: float, config: GaugeConfig, lambda0: float = DEFAULT_LAMBDA0
) -> OutcomeDistribution:
    """Two-point distribution bracketing the target, mixed with the uniform one.

    Every readout has positive probability while |m| < L; at |m| = L the
    result is a point mass on the extremal readout.
    """
    if abs(target_mean) > config.L * (1.0 + 1e-12):
        raise ConfigurationError(f"infeasible mean {target_mean} for L = {config.label()}")

    weight, lower, upper_share = mixture_brackets(np.array(target_mean), config, lambda0)
    row = int(lower)

    two_point = np.zeros(config.outcome_count)
    two_point[row] = 1.0 - float(upper_share)
    two_point[row + 1] = float(upper_share)

    probabilities = (1.0 - weight) * two_point + weight / config.outcome_count

    return OutcomeDistribution(tuple(float(p) for p in probabilities), config.twice_L)


def outcome_table(
    config: GaugeConfig,
    a: Axis,
    b: Axis,
    family: Family,
    lambda0: float = DEFAULT_LAMBDA0,
) -> np.ndarray:
    """Row r: T_b outcome probabilities for a particle in zone k = -L + r of axis a."""
    if family is Family.FORCED and config.twice_L != 1:
        raise ConfigurationError("forced probabilities exist only for L = 1/2")

    def _row(k: float) -> OutcomeDistribution:
        match family:
            case Family.FORCED:
                return forced_outcome_dist_half(k, a, b)

            case Family.MIXTURE:
                return mixture_outcome_dist(zone_mean_projection(k, a, b), config, lambda0)

        raise ConfigurationError(f"unknown family {family}")

    return np.array([_row(k).as_array() for k in config.readouts])


def _cumulative(table: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(table, axis=-1)
    cdf[..., -1] = 1.0

    return cdf


def sample_T_batch(
    generator: np.random.Generator, table: np.ndarray, rows: np.ndarray
) -> np.ndarray:
    """Inverse-CDF draws: one readout per entry of `rows` from table[rows]."""
    cdf = _cumulative(table)[rows]
    u = generator.random(len(rows))

    index = np.minimum((cdf <= u[:, None]).sum(axis=1), table.shape[1] - 1)
    twice_L = table.shape[1] - 1

    return (2 * index - twice_L) / 2


def sample_T(rng: Rng, dist: OutcomeDistribution) -> float:
    return float(
        sample_T_batch(as_generator(rng), dist.as_array()[None, :], np.zeros(1, dtype=np.int64))[0]
    )
