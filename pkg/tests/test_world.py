import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usvmec.world import (AreaConfig, MobilityConfig, UavKinematics, UsvKinematics, apply_uav_action,
                          distance, gauss_markov_step, move_uavs)

AREA = AreaConfig(x_max=1000.0, y_max=1000.0, uav_altitude=100.0, k_max=30.0, slot_duration=1.0)


def test_memory_one_keeps_velocity():
    cfg = MobilityConfig(memory_level=1.0, asymptotic_mean=(5.0, 5.0), asymptotic_std=0.0)
    usv = UsvKinematics([500.0, 500.0, 0.0], [1.5, -2.0])
    out = gauss_markov_step(usv, cfg, AREA, np.random.default_rng(0))
    np.testing.assert_array_equal(out.velocity, [1.5, -2.0])


def test_memoryless_velocity_is_asymptotic_mean():
    cfg = MobilityConfig(memory_level=0.0, asymptotic_mean=(3.0, -1.0), asymptotic_std=0.0)
    usv = UsvKinematics([500.0, 500.0, 0.0], [10.0, 10.0])
    out = gauss_markov_step(usv, cfg, AREA, np.random.default_rng(0))
    np.testing.assert_array_equal(out.velocity, [3.0, -1.0])


def test_half_memory_example():
    cfg = MobilityConfig(memory_level=0.5, asymptotic_mean=(4.0, 0.0), asymptotic_std=0.0)
    area = AreaConfig(slot_duration=2.0)
    usv = UsvKinematics([100.0, 100.0, 0.0], [2.0, 0.0])
    out = gauss_markov_step(usv, cfg, area, np.random.default_rng(0))
    np.testing.assert_allclose(out.velocity, [3.0, 0.0])
    # position moves with the old velocity: 2 m/s * 2 s
    np.testing.assert_allclose(out.position, [104.0, 100.0, 0.0])


def test_boundary_clamps_and_reflects():
    cfg = MobilityConfig(memory_level=1.0, asymptotic_std=0.0)
    usv = UsvKinematics([999.0, 1.0, 0.0], [5.0, -5.0])
    out = gauss_markov_step(usv, cfg, AREA, np.random.default_rng(0))
    np.testing.assert_array_equal(out.position, [1000.0, 0.0, 0.0])
    np.testing.assert_array_equal(out.velocity, [-5.0, 5.0])


def test_two_normals_per_step():
    rng = np.random.default_rng(7)
    gauss_markov_step(UsvKinematics([1.0, 1.0, 0.0], [0.0, 0.0]), MobilityConfig(), AREA, rng)
    ref = np.random.default_rng(7)
    ref.standard_normal(2)
    assert rng.standard_normal() == ref.standard_normal()


def test_batched_draws_match_sequential_draws():
    a = np.random.default_rng(3).standard_normal((6, 2))
    rng = np.random.default_rng(3)
    b = np.stack([rng.standard_normal(2) for _ in range(6)])
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("start,theta,k,expected", [
    ((0.0, 0.0), 0.0, 10.0, (10.0, 0.0)),
    ((0.0, 0.0), math.pi / 2, 30.0, (0.0, 30.0)),
    ((995.0, 0.0), 0.0, 30.0, (1000.0, 0.0)),
])
def test_uav_moves(start, theta, k, expected):
    uav = UavKinematics([start[0], start[1], 100.0])
    out = apply_uav_action(uav, theta, k, AREA)
    np.testing.assert_allclose(out.position, [expected[0], expected[1], 100.0], atol=1e-12)
    assert out.position[2] == 100.0


@pytest.mark.parametrize("theta,k", [(-0.1, 1.0), (7.0, 1.0), (0.0, -1.0), (0.0, 31.0), (float("nan"), 1.0)])
def test_uav_rejects_out_of_range(theta, k):
    with pytest.raises(ValueError):
        apply_uav_action(UavKinematics([0.0, 0.0, 100.0]), theta, k, AREA)


def test_distance_examples():
    assert distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert distance([0.0, 0.0, 0.0], [3.0, 4.0, 0.0]) == 5.0
    assert distance([0.0, 0.0, 100.0], [0.0, 0.0, 0.0]) == 100.0


coords = st.floats(-1e4, 1e4, allow_nan=False)
points = st.tuples(coords, coords, coords)


@given(points, points, points)
def test_distance_triangle_inequality_and_symmetry(a, b, c):
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_positions_stay_in_area(seed):
    rng = np.random.default_rng(seed)
    cfg = MobilityConfig(memory_level=0.3, asymptotic_mean=(20.0, -15.0), asymptotic_std=10.0, noise_std=3.0)
    usv = UsvKinematics([rng.uniform(0, 1000), rng.uniform(0, 1000), 0.0], [0.0, 0.0])
    uav = np.array([rng.uniform(0, 1000), rng.uniform(0, 1000), 100.0])
    for _ in range(100):
        usv = gauss_markov_step(usv, cfg, AREA, rng)
        uav = move_uavs(uav, rng.uniform(0, 2 * math.pi), rng.uniform(0, 30.0), AREA)
        assert 0 <= usv.position[0] <= 1000 and 0 <= usv.position[1] <= 1000
        assert 0 <= uav[0] <= 1000 and 0 <= uav[1] <= 1000 and uav[2] == 100.0


def test_seeded_trajectories_bit_identical():
    def run():
        rng = np.random.default_rng(11)
        usv = UsvKinematics([500.0, 500.0, 0.0], [0.0, 0.0])
        out = []
        for _ in range(50):
            usv = gauss_markov_step(usv, MobilityConfig(), AREA, rng)
            out.append(usv.position.copy())
        return np.array(out)

    assert run().tobytes() == run().tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        MobilityConfig(memory_level=1.5)
    with pytest.raises(ValueError):
        AreaConfig(k_max=0.0)
