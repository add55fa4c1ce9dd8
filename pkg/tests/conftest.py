import math

import numpy as np
import structlog
from pytest import fixture

from bellphase.ensembles import GaugeConfig, Mode
from bellphase.geometry import Axis, RngStream

SEED = 20240601

# one check against a closed form
SIGMAS = 3.0
# checks repeated over a grid of settings
GRID_SIGMAS = 4.0

STANDARD_AXES = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)


@fixture(autouse=True)
def reset_logging():
    yield

    structlog.reset_defaults()


@fixture
def stream() -> RngStream:
    return RngStream(SEED)


@fixture
def generator() -> np.random.Generator:
    return RngStream(SEED, 99).generator()


def statistical(twice_L: int) -> GaugeConfig:
    return GaugeConfig(twice_L, Mode.STATISTICAL)


def dynamical(twice_L: int) -> GaugeConfig:
    return GaugeConfig(twice_L, Mode.DYNAMICAL)


def axes_apart(delta: float, origin: float = 0.0) -> tuple[Axis, Axis]:
    return Axis(origin), Axis(origin + delta)
