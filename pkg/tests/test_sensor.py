import numpy as np
import pytest

from stiffnav.env import make_scenario, reaction_wrench
from stiffnav.screw import InvalidInputError, Pose, Wrench
from stiffnav.sensor import SensedChannel, SensorModel, sense


def test_noiseless_sensor_passes_signal_through():
    sc = make_scenario("line_spring")
    z = Pose.planar(0.01, 0.0, 0.0)
    assert np.array_equal(SensedChannel(sc)(z), reaction_wrench(sc, z).as_array())


def test_filter_reduces_noise_by_root_window():
    m = SensorModel(noise_std=1.0, filter_window=100, rng_seed=3)
    outs = np.array([m.feed(np.zeros(6), 100) for _ in range(400)])
    assert outs.std() == pytest.approx(0.1, rel=0.1)


def test_same_seed_same_readings():
    a = SensorModel(noise_std=0.05, rng_seed=9)
    b = SensorModel(noise_std=0.05, rng_seed=9)
    x = np.arange(6.0)
    assert np.array_equal(a.feed(x, 50), b.feed(x, 50))
    a.reset()
    b2 = SensorModel(noise_std=0.05, rng_seed=9)
    assert np.array_equal(a.feed(x, 50), b2.feed(x, 50))


def test_moving_average_warm_up_and_step_response():
    m = SensorModel(filter_window=4)
    assert np.allclose(m.push(np.full(6, 4.0)), 4.0)
    for _ in range(3):
        m.push(np.zeros(6))
    assert np.allclose(m.push(np.zeros(6)), 0.0)
    out = sense(SensorModel(filter_window=2), [Wrench.from_array(np.full(6, v)) for v in (1.0, 3.0, 5.0)])
    assert np.allclose(out.as_array(), 4.0)


def test_bad_window():
    with pytest.raises(InvalidInputError):
        SensorModel(filter_window=0)


def test_window_200_mean_within_three_sigma():
    m = SensorModel(noise_std=0.05, filter_window=200, rng_seed=11)
    x = np.array([1.0, -2.0, 0.5, 0.0, 0.1, 0.2])
    out = m.feed(x, 200)
    assert np.all(np.abs(out - x) < 3 * 0.05 / np.sqrt(200))
