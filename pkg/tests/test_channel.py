import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usvmec.channel import (ChannelConfig, channel_gain_u2g, db_to_linear_gain, dbm_to_watts,
                            elevation_angle, linear_gain_to_db, path_loss_u2u, rate_u2g, rate_u2u)

mpmath.mp.dps = 40

CFG = ChannelConfig(carrier_freq=2e9, zeta_los=2.3, zeta_nlos=34.0, sigmoid_a=10.0, sigmoid_b=0.6,
                    ref_gain=1e-4, noise_power_dbm=-114.0, bandwidth_u2u=1e6, bandwidth_u2g=1e6,
                    usv_tx_power=1.0)


def mp_path_loss(horizontal, height, cfg):
    """High-precision path loss, elevation via atan2 rather than arcsin."""
    h, z = mpmath.mpf(horizontal), mpmath.mpf(height)
    d = mpmath.sqrt(h * h + z * z)
    angle = mpmath.degrees(mpmath.atan2(z, h))
    a, b = mpmath.mpf(cfg.sigmoid_a), mpmath.mpf(cfg.sigmoid_b)
    zl, zn = mpmath.mpf(cfg.zeta_los), mpmath.mpf(cfg.zeta_nlos)
    fspl = 20 * mpmath.log10(4 * mpmath.pi * mpmath.mpf(cfg.carrier_freq) * d / mpmath.mpf(cfg.light_speed))
    return (zl - zn) / (1 + a * mpmath.exp(-b * (angle - a))) + fspl + zn


def mp_rate(bandwidth, gain, cfg):
    noise = mpmath.power(10, (mpmath.mpf(cfg.noise_power_dbm) - 30) / 10)
    return mpmath.mpf(bandwidth) * mpmath.log(1 + mpmath.mpf(cfg.usv_tx_power) * gain / noise, 2)


def test_elevation_examples():
    assert elevation_angle([0, 0, 0], [0, 0, 100]) == pytest.approx(90.0)
    assert elevation_angle([0, 0, 0], [100, 0, 100]) == pytest.approx(45.0)
    expected = float(mpmath.degrees(mpmath.atan2(100, 100 * mpmath.sqrt(3))))
    assert elevation_angle([0, 0, 0], [100 * math.sqrt(3), 0, 100]) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(30.0, rel=1e-12)


def test_coincident_points_rejected():
    with pytest.raises(ValueError):
        elevation_angle([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        path_loss_u2u([1, 2, 0], [1, 2, 0], CFG)
    with pytest.raises(ValueError):
        rate_u2g([5, 5, 0], [5, 5, 0], CFG)


def test_path_loss_large_angle_limit():
    # with a steep sigmoid the excess term saturates at zeta_los - zeta_nlos
    cfg = ChannelConfig(sigmoid_a=1.0, sigmoid_b=5.0)
    usv, uav = np.array([0.0, 0.0, 0.0]), np.array([0.0, 0.0, 100.0])
    fspl = 20 * math.log10(4 * math.pi * cfg.carrier_freq * 100.0 / cfg.light_speed)
    assert path_loss_u2u(usv, uav, cfg) == pytest.approx(fspl + cfg.zeta_los, abs=1e-9)


def test_path_loss_at_angle_equal_a():
    # elevation 45 deg and a = 45 -> excess = (zl - zn) / (1 + a)
    cfg = ChannelConfig(sigmoid_a=45.0, sigmoid_b=0.1)
    usv, uav = [0.0, 0.0, 0.0], [100.0, 0.0, 100.0]
    d = 100 * math.sqrt(2)
    fspl = 20 * math.log10(4 * math.pi * cfg.carrier_freq * d / cfg.light_speed)
    expected = (cfg.zeta_los - cfg.zeta_nlos) / 46.0 + fspl + cfg.zeta_nlos
    assert path_loss_u2u(usv, uav, cfg) == pytest.approx(expected, rel=1e-12)


def test_path_loss_reference_geometry_matches_mp_oracle():
    oracle = float(mp_path_loss(100, 100, CFG))
    assert path_loss_u2u([0, 0, 0], [100, 0, 100], CFG) == pytest.approx(oracle, rel=1e-12)


def test_rate_u2u_reference_geometry_matches_mp_oracle():
    xi = mp_path_loss(300, 100, CFG)
    oracle = float(mp_rate(CFG.bandwidth_u2u, mpmath.power(10, -xi / 10), CFG))
    assert rate_u2u([200, 50, 0], [500, 50, 100], CFG) == pytest.approx(oracle, rel=1e-10)


def test_rate_snr_identities():
    # choose ref gain so that P*G/N = 1 at 1 m, then 3 at 1/sqrt(3) m
    noise = dbm_to_watts(-114.0)
    cfg = ChannelConfig(ref_gain=noise, usv_tx_power=1.0, bandwidth_u2g=2e6)
    assert rate_u2g([0, 0, 0], [1, 0, 0], cfg) == pytest.approx(2e6, rel=1e-12)
    assert rate_u2g([0, 0, 0], [1 / math.sqrt(3), 0, 0], cfg) == pytest.approx(4e6, rel=1e-12)


def test_u2u_snr_identities():
    usv, uav = [0, 0, 0], [0, 0, 100]
    loss = path_loss_u2u(usv, uav, CFG)
    gain = 10 ** (-loss / 10)
    cfg = ChannelConfig(usv_tx_power=dbm_to_watts(-114.0) / gain, bandwidth_u2u=3e6)
    assert rate_u2u(usv, uav, cfg) == pytest.approx(3e6, rel=1e-9)
    cfg3 = ChannelConfig(usv_tx_power=3 * dbm_to_watts(-114.0) / gain, bandwidth_u2u=3e6)
    assert rate_u2u(usv, uav, cfg3) == pytest.approx(6e6, rel=1e-9)


def test_channel_gain_examples():
    assert channel_gain_u2g([0, 0, 0], [1, 0, 0], CFG) == pytest.approx(CFG.ref_gain)
    assert channel_gain_u2g([0, 0, 0], [10, 0, 0], CFG) == pytest.approx(CFG.ref_gain / 100)
    assert channel_gain_u2g([0, 0, 0], [300, 400, 0], CFG) == pytest.approx(4e-10, rel=1e-12)


def test_rate_u2g_reference_matches_mp_oracle():
    gain = mpmath.mpf(CFG.ref_gain) / mpmath.mpf(300) ** 2
    oracle = float(mp_rate(CFG.bandwidth_u2g, gain, CFG))
    assert rate_u2g([0, 0, 0], [300, 0, 0], CFG) == pytest.approx(oracle, rel=1e-12)


def test_noise_conversion():
    assert CFG.noise_power == pytest.approx(10 ** (-14.4) / 1000, rel=1e-12)


def test_doubling_distance_lowers_rate():
    assert rate_u2g([0, 0, 0], [200, 0, 0], CFG) < rate_u2g([0, 0, 0], [100, 0, 0], CFG)


@given(st.floats(1.0, 5000.0), st.floats(1.0, 5000.0))
def test_rate_u2g_strictly_decreasing(d1, d2):
    if abs(d1 - d2) < 1e-6:
        return
    near, far = min(d1, d2), max(d1, d2)
    assert rate_u2g([0, 0, 0], [far, 0, 0], CFG) < rate_u2g([0, 0, 0], [near, 0, 0], CFG)


@given(st.floats(0.05, 1.5), st.floats(10.0, 5000.0), st.floats(1.01, 3.0))
def test_path_loss_increasing_at_fixed_elevation(angle, d, factor):
    direction = np.array([math.cos(angle), 0.0, math.sin(angle)])
    near = path_loss_u2u([0, 0, 0], d * direction, CFG)
    far = path_loss_u2u([0, 0, 0], d * factor * direction, CFG)
    assert far > near


@given(st.floats(0.5, 10_000.0), st.floats(0.0, 1000.0))
def test_rates_finite_positive(horizontal, dy):
    r1 = rate_u2u([0, 0, 0], [horizontal, dy, 100.0], CFG)
    r2 = rate_u2g([0, 0, 0], [horizontal, dy, 0.0], CFG)
    assert np.isfinite(r1) and r1 > 0 and np.isfinite(r2) and r2 > 0


@given(st.floats(1e-30, 1.0))
def test_db_round_trip(g):
    back = db_to_linear_gain(linear_gain_to_db(g))
    assert abs(back - g) <= 1e-12 * g
