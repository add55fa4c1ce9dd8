import math

import numpy as np
from hypothesis import given
from hypothesis.strategies import floats
from pytest import approx, mark, raises
from scipy import stats

from bellphase.geometry import (
    Axis,
    MomentumVector,
    RngStream,
    angle_between,
    as_generator,
    axis_direction,
    generators_for,
    project,
    project_batch,
    rotate_to_axis,
    sample_about_axis,
    sample_uniform_sphere,
    sample_uniform_sphere_batch,
)
from conftest import SIGMAS

angles = floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@mark.parametrize(
    "theta expected".split(),
    (
        (0.0, (0.0, 0.0, 1.0)),
        (math.pi / 2, (0.0, 1.0, 0.0)),
        (math.pi / 4, (0.0, math.sqrt(2) / 2, math.sqrt(2) / 2)),
    ),
)
def test_axis_direction(theta, expected):
    assert axis_direction(Axis(theta)).as_array() == approx(np.array(expected), abs=1e-15)


@mark.parametrize(
    "vector theta expected".split(),
    (
        ((0.0, 0.0, 2.0), 0.0, 2.0),
        ((0.0, 0.0, 2.0), math.pi / 2, 0.0),
        ((0.0, 2.0 * math.sin(math.pi / 3), 2.0 * math.cos(math.pi / 3)), math.pi / 3, 2.0),
    ),
)
def test_project(vector, theta, expected):
    assert project(MomentumVector.of(np.array(vector)), Axis(theta)) == approx(expected, abs=1e-12)


@given(angles)
def test_project_batch_agrees_with_project(theta):
    vectors = np.array(((0.3, -0.2, 0.9), (1.0, 2.0, -3.0)))

    batch = project_batch(vectors, Axis(theta))

    for row, value in zip(vectors, batch):
        assert value == approx(project(MomentumVector.of(row), Axis(theta)), abs=1e-12)


@given(angles)
def test_rotate_to_axis_carries_z_onto_axis(theta):
    rotated = rotate_to_axis(np.array(((0.0, 0.0, 1.0), (1.0, 0.0, 0.0))), Axis(theta))

    assert rotated[0] == approx(Axis(theta).direction, abs=1e-12)
    assert rotated[1] == approx(np.array((1.0, 0.0, 0.0)), abs=1e-12)


@given(angles, angles)
def test_angle_between_is_symmetric_and_bounded(first, second):
    delta = angle_between(Axis(first), Axis(second))

    assert 0.0 <= delta <= math.pi
    assert delta == approx(angle_between(Axis(second), Axis(first)), abs=1e-12)
    assert math.cos(delta) == approx(math.cos(second - first), abs=1e-9)


def test_axis_normalized_and_shifted():
    assert Axis(-math.pi / 2).normalized().theta == approx(3 * math.pi / 2)
    assert Axis(0.5).shifted(0.25) == Axis(0.75)


def test_momentum_vector_checks_magnitude():
    with raises(AssertionError):
        MomentumVector(1.0, 0.0, 0.0, 2.0)

    v = MomentumVector.of(np.array((0.0, 3.0, 4.0)))

    assert v.magnitude == 5.0
    assert (-v).as_array() == approx(np.array((0.0, -3.0, -4.0)))


def test_uniform_sphere_projection_moments(stream):
    J, n = 1.5, 10**6
    projections = project_batch(sample_uniform_sphere_batch(stream.generator(), J, n), Axis(0.7))

    assert abs(projections.mean()) <= SIGMAS * J / math.sqrt(3 * n)

    squares = projections**2
    assert abs(squares.mean() - J**2 / 3) <= SIGMAS * squares.std(ddof=1) / math.sqrt(n)


def test_uniform_sphere_projection_is_uniform(stream):
    # Archimedes: the projection on any axis is uniform on [-J, J]
    projections = project_batch(sample_uniform_sphere_batch(stream.generator(), 2.0, 20_000), Axis(1.1))

    assert stats.kstest(projections, stats.uniform(loc=-2.0, scale=4.0).cdf).pvalue > 1e-3


def test_uniform_sphere_magnitude(stream):
    vectors = sample_uniform_sphere_batch(stream.generator(), 3.0, 1000)

    assert np.linalg.norm(vectors, axis=1) == approx(np.full(1000, 3.0), rel=1e-12)


def test_sample_uniform_sphere_is_deterministic():
    first = sample_uniform_sphere(RngStream(42), 1.0)
    second = sample_uniform_sphere(RngStream(42), 1.0)

    assert first == second
    assert sample_uniform_sphere(RngStream(42, 1), 1.0) != first


def test_substreams_are_independent_and_stable():
    stream = RngStream(5)

    draws = [generator.random(4) for generator in generators_for(stream, 3)]

    assert not np.array_equal(draws[0], draws[1])
    # chunk 1 does not depend on how many chunks there are
    assert np.array_equal(generators_for(stream, 5)[1].random(4), draws[1])
    assert np.array_equal(stream.substream(2).generator().random(4), draws[2])


def test_rng_stream_rejects_bad_seed():
    with raises(AssertionError):
        RngStream(-1)

    with raises(AssertionError):
        RngStream(2**64)


def test_as_generator_rejects_other_sources():
    with raises(TypeError):
        as_generator(42)


def test_sample_about_axis_fixes_projection(generator):
    a = Axis(0.9)
    vectors = sample_about_axis(generator, a, 2.0, 0.25, 500)

    assert project_batch(vectors, a) == approx(np.full(500, 0.5), abs=1e-12)
    assert np.linalg.norm(vectors, axis=1) == approx(np.full(500, 2.0), rel=1e-12)
