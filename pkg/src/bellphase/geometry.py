"""Axes in the zy plane, angular-momentum vectors and seeded sphere sampling.

Every axis lies in the zy plane and is given by its angle from the z axis.
The frame is right-handed with z up and y in-plane.
"""

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi
MAGNITUDE_RTOL = 1e-9


@dataclass(frozen=True)
class Axis:
    theta: float

    def __post_init__(self) -> None:
        assert math.isfinite(self.theta), "axis angle must be finite"

    def normalized(self) -> "Axis":
        return Axis(self.theta % TAU)

    def shifted(self, offset: float) -> "Axis":
        return Axis(self.theta + offset)

    @property
    def direction(self) -> np.ndarray:
        return np.array((0.0, math.sin(self.theta), math.cos(self.theta)))


@dataclass(frozen=True)
class MomentumVector:
    x: float
    y: float
    z: float
    magnitude: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.x**2 + self.y**2 + self.z**2)

        assert math.isclose(norm, self.magnitude, rel_tol=MAGNITUDE_RTOL, abs_tol=1e-12), (
            f"|v| = {norm} does not match magnitude {self.magnitude}"
        )

    @classmethod
    def of(cls, components: np.ndarray) -> "MomentumVector":
        x, y, z = (float(c) for c in components)

        return cls(x, y, z, math.sqrt(x * x + y * y + z * z))

    def __neg__(self) -> "MomentumVector":
        return MomentumVector(-self.x, -self.y, -self.z, self.magnitude)

    def as_array(self) -> np.ndarray:
        return np.array((self.x, self.y, self.z))


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream) pair naming a reproducible PCG64 sequence.

    Substreams extend the spawn key, so chunk i of stream s is independent
    of chunk j and of every other stream, and never depends on how many
    chunks ran before it.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        assert 0 <= self.seed < 2**64, "seed must fit in 64 bits"
        assert self.stream >= 0

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.path + (index,))

    def substreams(self, count: int) -> tuple["RngStream", ...]:
        return tuple(self.substream(i) for i in range(count))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
            )
        )


type Rng = RngStream | np.random.Generator


def as_generator(rng: Rng) -> np.random.Generator:
    match rng:
        case RngStream():
            return rng.generator()

        case np.random.Generator():
            return rng

        case _:
            raise TypeError(f"not a random source: {rng!r}")


def generators_for(rng: Rng, count: int) -> tuple[np.random.Generator, ...]:
    """One independent generator per chunk of a `count`-way split."""
    assert count >= 1

    match rng:
        case RngStream():
            return tuple(stream.generator() for stream in rng.substreams(count))

        case np.random.Generator() if count == 1:
            return (rng,)

        case np.random.Generator():
            return tuple(rng.spawn(count))

        case _:
            raise TypeError(f"not a random source: {rng!r}")


def axis_direction(a: Axis) -> MomentumVector:
    return MomentumVector(0.0, math.sin(a.theta), math.cos(a.theta), 1.0)


def angle_between(a: Axis, b: Axis) -> float:
    delta = abs(b.theta - a.theta) % TAU

    return TAU - delta if delta > math.pi else delta


def project(v: MomentumVector, a: Axis) -> float:
    return v.y * math.sin(a.theta) + v.z * math.cos(a.theta)


def project_batch(vectors: np.ndarray, a: Axis) -> np.ndarray:
    return vectors @ a.direction


def rotate_to_axis(vectors: np.ndarray, a: Axis) -> np.ndarray:
    """Carry vectors from the frame whose z axis is `a` into the global frame."""
    s, c = math.sin(a.theta), math.cos(a.theta)

    # rotation about x: z -> a, y -> (0, cos, -sin), x fixed
    rotation = np.array(((1.0, 0.0, 0.0), (0.0, c, -s), (0.0, s, c)))

    return vectors @ rotation


def sample_about_axis(
    generator: np.random.Generator,
    a: Axis,
    J: float,
    cos_polar: float | np.ndarray,
    n: int,
) -> np.ndarray:
    cos_polar = np.broadcast_to(np.asarray(cos_polar, dtype=float), (n,))
    sin_polar = np.sqrt(np.clip(1.0 - cos_polar**2, 0.0, None))
    azimuth = generator.uniform(0.0, TAU, n)

    local = np.column_stack(
        (sin_polar * np.cos(azimuth), sin_polar * np.sin(azimuth), cos_polar)
    )

    return J * rotate_to_axis(local, a)


def sample_uniform_sphere_batch(
    generator: np.random.Generator, J: float, n: int
) -> np.ndarray:
    assert J > 0

    cos_polar = generator.uniform(-1.0, 1.0, n)
    azimuth = generator.uniform(0.0, TAU, n)
    sin_polar = np.sqrt(1.0 - cos_polar**2)

    return J * np.column_stack(
        (sin_polar * np.cos(azimuth), sin_polar * np.sin(azimuth), cos_polar)
    )


def sample_uniform_sphere(rng: Rng, J: float) -> MomentumVector:
    return MomentumVector.of(sample_uniform_sphere_batch(as_generator(rng), J, 1)[0])
