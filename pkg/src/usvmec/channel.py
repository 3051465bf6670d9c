"""Link models: probabilistic-LoS path loss for USV->UAV, inverse-square gain for USV->GS.

All functions broadcast over leading axes of the ``(..., 3)`` position arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import distance


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear_gain(loss_db):
    """Path loss in dB -> linear power gain."""
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def linear_gain_to_db(gain):
    return -10.0 * np.log10(np.asarray(gain, dtype=float))


@dataclass(frozen=True)
class ChannelConfig:
    carrier_freq: float = 2.0e9
    light_speed: float = 3.0e8
    zeta_los: float = 2.3
    zeta_nlos: float = 34.0
    sigmoid_a: float = 10.0
    sigmoid_b: float = 0.6
    ref_gain: float = 1.0e-4
    noise_power_dbm: float = -114.0
    bandwidth_u2u: float = 1.0e6
    bandwidth_u2g: float = 1.0e6
    usv_tx_power: float = 1.0
    noise_power: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("carrier_freq", "light_speed", "sigmoid_a", "sigmoid_b", "ref_gain",
                     "bandwidth_u2u", "bandwidth_u2g", "usv_tx_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        object.__setattr__(self, "noise_power", dbm_to_watts(self.noise_power_dbm))


def _link_distance(a, b, min_distance: float = 0.0):
    d = distance(a, b)
    if min_distance > 0.0:
        return np.maximum(d, min_distance)
    if np.any(d <= 0.0):
        raise ValueError("coincident endpoints: link distance is zero")
    return d


def _elevation(usv, uav, d):
    dz = np.abs(np.asarray(uav, dtype=float)[..., 2] - np.asarray(usv, dtype=float)[..., 2])
    return np.degrees(np.arcsin(np.minimum(dz / d, 1.0)))


def elevation_angle(usv, uav, min_distance: float = 0.0):
    """Elevation of the UAV as seen from the USV, in degrees within [0, 90]."""
    return _elevation(usv, uav, _link_distance(usv, uav, min_distance))


def path_loss_u2u(usv, uav, cfg: ChannelConfig, min_distance: float = 0.0):
    """Mean path loss (dB): LoS-probability sigmoid blend plus free-space loss."""
    d = _link_distance(usv, uav, min_distance)
    angle = _elevation(usv, uav, d)
    a, b = cfg.sigmoid_a, cfg.sigmoid_b
    excess = (cfg.zeta_los - cfg.zeta_nlos) / (1.0 + a * np.exp(-b * (angle - a)))
    fspl = 20.0 * np.log10(4.0 * math.pi * cfg.carrier_freq * d / cfg.light_speed)
    return excess + fspl + cfg.zeta_nlos


def rate_u2u(usv, uav, cfg: ChannelConfig, min_distance: float = 0.0):
    gain = db_to_linear_gain(path_loss_u2u(usv, uav, cfg, min_distance))
    return cfg.bandwidth_u2u * np.log2(1.0 + cfg.usv_tx_power * gain / cfg.noise_power)


def channel_gain_u2g(usv, gs, cfg: ChannelConfig, min_distance: float = 0.0):
    d = _link_distance(usv, gs, min_distance)
    return cfg.ref_gain / (d * d)


def rate_u2g(usv, gs, cfg: ChannelConfig, min_distance: float = 0.0):
    gain = channel_gain_u2g(usv, gs, cfg, min_distance)
    return cfg.bandwidth_u2g * np.log2(1.0 + cfg.usv_tx_power * gain / cfg.noise_power)
