"""Classical single- and two-particle angular-momentum ensembles.

Half-integers (L, readouts k) are carried doubled so zone arithmetic stays
in the integers; they become floats only where a projection is formed.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from bellphase.errors import ConfigurationError
from bellphase.geometry import (
    TAU,
    Axis,
    MomentumVector,
    Rng,
    as_generator,
    rotate_to_axis,
    sample_about_axis,
    sample_uniform_sphere_batch,
)


class Mode(Enum):
    STATISTICAL = "statistical"
    DYNAMICAL = "dynamical"


def parse_half_integer(value: str | float | Fraction) -> int:
    """Return 2L for a scale written as "p/2", a decimal, or a number."""
    try:
        doubled = 2 * Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot read L from {value!r}") from exc

    if doubled.denominator != 1:
        raise ConfigurationError(f"2L must be an integer, got L = {value}")

    return int(doubled)


@dataclass(frozen=True)
class GaugeConfig:
    twice_L: int
    mode: Mode = Mode.STATISTICAL

    def __post_init__(self) -> None:
        if self.twice_L < 1:
            raise ConfigurationError(f"L must be at least 1/2, got 2L = {self.twice_L}")

    @classmethod
    def of(cls, L: str | float | Fraction, mode: Mode | str) -> "GaugeConfig":
        return cls(parse_half_integer(L), Mode(mode))

    @property
    def L(self) -> float:
        return self.twice_L / 2

    @property
    def twice_J(self) -> int:
        # statistical: J = L; dynamical: J = L + 1/2
        return self.twice_L + (1 if self.mode is Mode.DYNAMICAL else 0)

    @property
    def J(self) -> float:
        return self.twice_J / 2

    @property
    def outcome_count(self) -> int:
        return self.twice_L + 1

    @property
    def readouts(self) -> np.ndarray:
        return (np.arange(self.outcome_count) * 2 - self.twice_L) / 2

    def label(self) -> str:
        return f"{self.twice_L}/2" if self.twice_L % 2 else str(self.twice_L // 2)


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    phi: float
    p_theta: float
    p_phi: float

    @property
    def jz(self) -> float:
        return self.p_phi

    @property
    def j_squared(self) -> float:
        return self.p_theta**2 + self.p_phi**2 / math.sin(self.theta) ** 2

    def angular_momentum(self) -> MomentumVector:
        # J = p_theta * phi_hat - (p_phi / sin theta) * theta_hat
        st, ct = math.sin(self.theta), math.cos(self.theta)
        sp, cp = math.sin(self.phi), math.cos(self.phi)
        along_theta = -self.p_phi / st

        return MomentumVector.of(
            np.array(
                (
                    -self.p_theta * sp + along_theta * ct * cp,
                    self.p_theta * cp + along_theta * ct * sp,
                    -along_theta * st,
                )
            )
        )


@dataclass(frozen=True)
class PhaseSample:
    theta: np.ndarray
    phi: np.ndarray
    p_theta: np.ndarray
    p_phi: np.ndarray
    momenta: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.theta)

    def __getitem__(self, index: int) -> PhasePoint:
        return PhasePoint(
            float(self.theta[index]),
            float(self.phi[index]),
            float(self.p_theta[index]),
            float(self.p_phi[index]),
        )

    @property
    def j_squared(self) -> np.ndarray:
        return self.p_theta**2 + self.p_phi**2 / np.sin(self.theta) ** 2


@dataclass(frozen=True)
class ZoneSpec:
    axis: Axis
    twice_k: int
    config: GaugeConfig

    def __post_init__(self) -> None:
        if self.config.mode is not Mode.DYNAMICAL:
            raise ConfigurationError("zones are defined for the dynamical model only")

        if abs(self.twice_k) > self.config.twice_L or (self.twice_k - self.config.twice_L) % 2:
            raise ConfigurationError(
                f"k = {self.twice_k}/2 is not a readout for L = {self.config.label()}"
            )

    @property
    def k(self) -> float:
        return self.twice_k / 2

    @property
    def bounds(self) -> tuple[float, float]:
        return self.k - 0.5, self.k + 0.5


def _check_orbit(J0: float, Jz0: float) -> None:
    if not (J0 > 0 and abs(Jz0) < J0):
        raise ConfigurationError(
            f"need |Jz0| < J0 for a non-degenerate orbit, got J0={J0}, Jz0={Jz0}"
        )


def sample_singlet_pairs(
    generator: np.random.Generator, config: GaugeConfig, n: int
) -> tuple[np.ndarray, np.ndarray]:
    j1 = sample_uniform_sphere_batch(generator, config.J, n)

    return j1, -j1


def sample_singlet_pair(
    rng: Rng, config: GaugeConfig
) -> tuple[MomentumVector, MomentumVector]:
    j1, j2 = sample_singlet_pairs(as_generator(rng), config, 1)

    return MomentumVector.of(j1[0]), MomentumVector.of(j2[0])


def _orbits(
    generator: np.random.Generator, J0: float, Jp0: float, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Positions and angular momenta of orbits with projection Jp0 on local z."""
    c = Jp0 / J0
    s = math.sqrt(1.0 - c * c)

    ring = generator.uniform(0.0, TAU, n)
    phase = generator.uniform(0.0, TAU, n)
    cos_ring, sin_ring = np.cos(ring), np.sin(ring)

    direction = np.column_stack((s * cos_ring, s * sin_ring, np.full(n, c)))

    # u, v span the orbital plane orthogonal to J; v = J_hat x u
    u = np.column_stack((-sin_ring, cos_ring, np.zeros(n)))
    v = np.column_stack((-c * cos_ring, -c * sin_ring, np.full(n, s)))

    positions = np.cos(phase)[:, None] * u + np.sin(phase)[:, None] * v

    return positions, J0 * direction


def _phase_coordinates(
    positions: np.ndarray, momenta: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta = np.arccos(np.clip(positions[:, 2], -1.0, 1.0))
    phi = np.arctan2(positions[:, 1], positions[:, 0]) % TAU

    phi_hat = np.column_stack((-np.sin(phi), np.cos(phi), np.zeros(len(phi))))

    return theta, phi, np.einsum("ij,ij->i", momenta, phi_hat)


def sample_fixed_jz_orbits(
    generator: np.random.Generator, J0: float, Jz0: float, n: int
) -> PhaseSample:
    _check_orbit(J0, Jz0)

    positions, momenta = _orbits(generator, J0, Jz0, n)
    theta, phi, p_theta = _phase_coordinates(positions, momenta)

    return PhaseSample(theta, phi, p_theta, np.full(n, float(Jz0)), momenta)


def sample_fixed_jz_orbit(rng: Rng, J0: float, Jz0: float) -> PhasePoint:
    return sample_fixed_jz_orbits(as_generator(rng), J0, Jz0, 1)[0]


def sample_fixed_axis_orbits(
    generator: np.random.Generator, J0: float, Ja0: float, a: Axis, n: int
) -> PhaseSample:
    _check_orbit(J0, Ja0)

    positions, momenta = (
        rotate_to_axis(arr, a) for arr in _orbits(generator, J0, Ja0, n)
    )
    theta, phi, p_theta = _phase_coordinates(positions, momenta)

    return PhaseSample(theta, phi, p_theta, momenta[:, 2].copy(), momenta)


def sample_fixed_axis_orbit(rng: Rng, J0: float, Ja0: float, a: Axis) -> PhasePoint:
    return sample_fixed_axis_orbits(as_generator(rng), J0, Ja0, a, 1)[0]


def support_edge(J0: float, Jz0: float) -> float:
    _check_orbit(J0, Jz0)

    return math.asin(abs(Jz0) / J0)


def density_normalization(J0: float) -> float:
    return J0 / (2.0 * math.pi**2)


def config_density(
    theta: float | np.ndarray, J0: float, Jz0: float
) -> float | np.ndarray:
    """Configuration-space density of the fixed-Jz ensemble.

    Zero outside the classically allowed band sin^2(theta) > Jz0^2/J0^2;
    integrable divergence at the band edges.
    """
    _check_orbit(J0, Jz0)

    sin_theta = np.abs(np.sin(np.asarray(theta, dtype=float)))
    inside = J0 * sin_theta > abs(Jz0)

    safe_sin = np.where(inside, sin_theta, 1.0)
    radicand = np.where(inside, J0**2 - Jz0**2 / safe_sin**2, 1.0)

    density = np.where(
        inside & (radicand > 0.0),
        density_normalization(J0) / (safe_sin * np.sqrt(np.abs(radicand))),
        0.0,
    )

    return float(density) if np.ndim(density) == 0 else density


def theta_marginal(
    theta: float | np.ndarray, J0: float, Jz0: float
) -> float | np.ndarray:
    return TAU * np.sin(theta) * config_density(theta, J0, Jz0)


def theta_cdf(theta: float | np.ndarray, J0: float, Jz0: float) -> float | np.ndarray:
    _check_orbit(J0, Jz0)

    spread = math.sqrt(1.0 - (Jz0 / J0) ** 2)

    return np.arccos(np.clip(np.cos(theta) / spread, -1.0, 1.0)) / math.pi


def mean_projection_jz(Jz0: float, a: Axis) -> float:
    return Jz0 * math.cos(a.theta)


def _check_zone_range(j_a: np.ndarray, config: GaugeConfig) -> None:
    if config.mode is not Mode.DYNAMICAL:
        raise ConfigurationError("zones are defined for the dynamical model only")

    if np.any(np.abs(j_a) > config.J * (1.0 + 1e-12)):
        raise ConfigurationError(f"projection outside the sphere of radius J = {config.J}")


def zone_rows(j_a: np.ndarray, config: GaugeConfig) -> np.ndarray:
    """Zone of each projection as a row index 0..2L counted from k = -L."""
    j_a = np.asarray(j_a, dtype=float)
    _check_zone_range(j_a, config)

    # ties at k + 1/2 go to the upper zone; j_a = J closes the top zone
    return np.clip(np.floor(j_a + config.J), 0, config.twice_L).astype(np.int64)


def zone_index(j_a: float, config: GaugeConfig) -> float:
    return (2 * int(zone_rows(np.array([j_a]), config)[0]) - config.twice_L) / 2


def zone_probabilities(config: GaugeConfig) -> np.ndarray:
    return np.full(config.outcome_count, 1.0 / config.outcome_count)


def sample_zones(
    generator: np.random.Generator, zone: ZoneSpec, n: int
) -> np.ndarray:
    low, high = zone.bounds
    j_a = generator.uniform(max(low, -zone.config.J), min(high, zone.config.J), n)

    return sample_about_axis(generator, zone.axis, zone.config.J, j_a / zone.config.J, n)


def sample_zone(rng: Rng, zone: ZoneSpec) -> MomentumVector:
    return MomentumVector.of(sample_zones(as_generator(rng), zone, 1)[0])


def zone_mean_projection(k: float, a: Axis, b: Axis) -> float:
    return k * math.cos(b.theta - a.theta)
