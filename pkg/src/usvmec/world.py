"""Geometry and kinematics: Gauss-Markov USV drift and azimuth/distance UAV moves.

Positions are ``(..., 3)`` float arrays in meters. Functions accept a single
vehicle or a stacked batch; the environment uses the batched form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MobilityConfig:
    """Gauss-Markov velocity process parameters.

    ``noise_std`` is the std of the per-axis white-noise draw; it is kept
    separate from ``asymptotic_std`` which scales the innovation term.
    """

    memory_level: float = 0.8
    asymptotic_mean: tuple[float, float] = (1.0, 0.5)
    asymptotic_std: float = 1.0
    noise_std: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.memory_level <= 1.0:
            raise ValueError(f"memory_level must be in [0, 1], got {self.memory_level}")
        if self.asymptotic_std < 0 or self.noise_std < 0:
            raise ValueError("asymptotic_std and noise_std must be >= 0")
        if len(self.asymptotic_mean) != 2:
            raise ValueError("asymptotic_mean must have two components (vx, vy)")
        object.__setattr__(self, "asymptotic_mean", tuple(float(v) for v in self.asymptotic_mean))


@dataclass(frozen=True)
class AreaConfig:
    x_max: float = 1000.0
    y_max: float = 1000.0
    uav_altitude: float = 100.0
    k_max: float = 30.0
    slot_duration: float = 1.0

    def __post_init__(self):
        for name in ("x_max", "y_max", "uav_altitude", "k_max", "slot_duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass
class UsvKinematics:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


@dataclass
class UavKinematics:
    position: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


def distance(a, b) -> float | np.ndarray:
    """Euclidean distance over the last axis."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def gauss_markov_positions(position, velocity, cfg: MobilityConfig, area: AreaConfig, noise):
    """Deterministic core of the USV update given pre-drawn standard normals.

    ``noise`` has shape ``(..., 2)`` and holds N(0, 1) draws; it is scaled by
    ``cfg.noise_std`` here. Returns ``(new_position, new_velocity)``.
    """
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    mu = cfg.memory_level
    w = cfg.noise_std * np.asarray(noise, dtype=float)
    new_vel = (
        mu * velocity
        + (1.0 - mu) * np.asarray(cfg.asymptotic_mean)
        + cfg.asymptotic_std * math.sqrt(1.0 - mu * mu) * w
    )
    new_pos = position.copy()
    # position advances with the slot-t velocity
    new_pos[..., :2] = position[..., :2] + velocity * area.slot_duration

    bounds = np.array([area.x_max, area.y_max])
    xy = new_pos[..., :2]
    out_of_bounds = (xy < 0.0) | (xy > bounds)
    new_pos[..., :2] = np.minimum(np.maximum(xy, 0.0), bounds)
    new_vel = np.where(out_of_bounds, -new_vel, new_vel)
    return new_pos, new_vel


def gauss_markov_step(usv: UsvKinematics, cfg: MobilityConfig, area: AreaConfig,
                      rng: np.random.Generator) -> UsvKinematics:
    """Advance one USV by one slot; consumes exactly two normal variates."""
    noise = rng.standard_normal(2)
    pos, vel = gauss_markov_positions(usv.position, usv.velocity, cfg, area, noise)
    return UsvKinematics(position=pos, velocity=vel)


def check_uav_action(theta, k, area: AreaConfig) -> None:
    theta = np.asarray(theta, dtype=float)
    k = np.asarray(k, dtype=float)
    # NaN fails every comparison, so one range test per array covers the common valid case
    if theta.size and k.size and 0.0 <= theta.min() and theta.max() <= TWO_PI \
            and 0.0 <= k.min() and k.max() <= area.k_max:
        return
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(k))):
        raise ValueError("UAV action contains non-finite values")
    if np.any(theta < 0.0) or np.any(theta > TWO_PI):
        raise ValueError(f"azimuth out of [0, 2pi]: {theta}")
    if np.any(k < 0.0) or np.any(k > area.k_max):
        raise ValueError(f"flying distance out of [0, {area.k_max}]: {k}")


def move_uavs(positions, theta, k, area: AreaConfig, check: bool = True) -> np.ndarray:
    """Batched UAV move: ``positions`` (..., 3), ``theta``/``k`` broadcastable to (...)."""
    if check:
        check_uav_action(theta, k, area)
    new = np.array(positions, dtype=float, copy=True)
    new[..., 0] = np.minimum(np.maximum(new[..., 0] + k * np.cos(theta), 0.0), area.x_max)
    new[..., 1] = np.minimum(np.maximum(new[..., 1] + k * np.sin(theta), 0.0), area.y_max)
    return new


def apply_uav_action(uav: UavKinematics, theta: float, k: float, area: AreaConfig) -> UavKinematics:
    return UavKinematics(position=move_uavs(uav.position, theta, k, area))
