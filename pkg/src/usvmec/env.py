"""USV-UAV-GS edge-computing Markov game with reset/step semantics.

Agents ``0..I-1`` are USVs (offloading decisions), agents ``I..I+J-1`` are
UAVs (azimuth/distance moves). Every agent receives the shared slot reward.

Observation layout (length ``(I+J+K) * ENTITY_FEATURES + (I+J)``): one row
per entity in the order USVs, UAVs, GSs, each row being::

    [x / x_max, y / y_max, z / uav_altitude,
     log1p(backlog / queue_scale), task_bits / task_scale,
     is_usv, is_uav, is_gs]

followed by a one-hot of the observing agent's id. The critic's global
state vector is the same entity block without the one-hot.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel, workload, world
from .channel import ChannelConfig
from .config import ConfigError
from .workload import ComputeConfig, QueueState, Task
from .world import AreaConfig, MobilityConfig

ENTITY_FEATURES = 8
# the reference gain is defined at 1 m; closer links are floored there
MIN_LINK_DISTANCE = 1.0


@dataclass(frozen=True)
class ObservationConfig:
    queue_scale: float = 1.0e8
    task_scale: float = 1.0e7

    def __post_init__(self):
        if not (self.queue_scale > 0 and self.task_scale > 0):
            raise ValueError("observation scales must be > 0")


@dataclass(frozen=True)
class EnvConfig:
    n_usvs: int = 6
    n_uavs: int = 4
    n_gss: int = 2
    horizon: int = 50
    seed: int = 0
    area: AreaConfig = field(default_factory=AreaConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    uav_spawn: list | None = None
    gs_positions: list | None = None

    def __post_init__(self):
        for name in ("n_usvs", "n_uavs", "n_gss", "horizon"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {value!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit non-negative integer, got {self.seed!r}")
        if self.compute.slot_duration != self.area.slot_duration:
            raise ConfigError("compute.slot_duration: must equal area.slot_duration")
        if self.uav_spawn is not None:
            self._check_points("uav_spawn", self.uav_spawn, self.n_uavs)
        if self.gs_positions is not None:
            self._check_points("gs_positions", self.gs_positions, self.n_gss)
        try:
            self.compute.capacities(self.n_usvs, self.n_uavs, self.n_gss)
            self.compute.arrivals(self.n_usvs)
        except ValueError as exc:
            raise ConfigError(f"compute: {exc}") from exc

    def _check_points(self, name, points, n):
        if len(points) != n:
            raise ConfigError(f"{name}: expected {n} [x, y] points, got {len(points)}")
        for p in points:
            if len(p) != 2 or not (0 <= p[0] <= self.area.x_max and 0 <= p[1] <= self.area.y_max):
                raise ConfigError(f"{name}: point {p} is not an in-area [x, y] pair")

    @property
    def n_agents(self) -> int:
        return self.n_usvs + self.n_uavs

    @property
    def n_entities(self) -> int:
        return self.n_usvs + self.n_uavs + self.n_gss

    @property
    def state_dim(self) -> int:
        return self.n_entities * ENTITY_FEATURES

    @property
    def obs_dim(self) -> int:
        return self.state_dim + self.n_agents

    def with_counts(self, n_usvs=None, n_uavs=None, n_gss=None, horizon=None) -> "EnvConfig":
        changes = {k: v for k, v in dict(n_usvs=n_usvs, n_uavs=n_uavs, n_gss=n_gss,
                                         horizon=horizon).items() if v is not None}
        if "n_uavs" in changes:
            changes["uav_spawn"] = None
        if "n_gss" in changes:
            changes["gs_positions"] = None
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class UsvAction:
    uav: int | None
    gs: int | None
    split: tuple[float, float, float]


@dataclass(frozen=True)
class UavAction:
    theta: float
    k: float


AgentAction = UsvAction | UavAction


@dataclass
class GlobalState:
    usv_pos: np.ndarray
    usv_vel: np.ndarray
    uav_pos: np.ndarray
    gs_pos: np.ndarray
    queues: QueueState
    tasks: np.ndarray
    slot: int

    def copy(self) -> "GlobalState":
        return GlobalState(self.usv_pos.copy(), self.usv_vel.copy(), self.uav_pos.copy(),
                           self.gs_pos.copy(), self.queues.copy(), self.tasks.copy(), self.slot)


@dataclass
class StepOutcome:
    observations: np.ndarray
    reward: float
    done: bool
    info: dict


def default_uav_spawn(cfg: EnvConfig) -> np.ndarray:
    j = np.arange(cfg.n_uavs)
    return np.stack([(j + 1) / (cfg.n_uavs + 1) * cfg.area.x_max,
                     np.full(cfg.n_uavs, cfg.area.y_max / 2.0)], axis=1)


def default_gs_positions(cfg: EnvConfig) -> np.ndarray:
    k = np.arange(cfg.n_gss)
    return np.stack([(k + 1) / (cfg.n_gss + 1) * cfg.area.x_max, np.zeros(cfg.n_gss)], axis=1)


def link_rates(usv_pos, uav_pos, gs_pos, cfg: ChannelConfig):
    """All-pairs rates: ``(I, J)`` USV->UAV and ``(I, K)`` USV->GS, in bits/s."""
    u2u = channel.rate_u2u(usv_pos[:, None, :], uav_pos[None, :, :], cfg, MIN_LINK_DISTANCE)
    u2g = channel.rate_u2g(usv_pos[:, None, :], gs_pos[None, :, :], cfg, MIN_LINK_DISTANCE)
    return u2u, u2g


class UsvMecEnv:
    """Seeded environment; one instance owns one random stream."""

    def __init__(self, cfg: EnvConfig, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        I, J, K = cfg.n_usvs, cfg.n_uavs, cfg.n_gss
        self.f_usv, self.f_uav, self.f_gs = cfg.compute.capacities(I, J, K)
        self.arrivals = np.array(cfg.compute.arrivals(I))
        spawn = np.asarray(cfg.uav_spawn, dtype=float) if cfg.uav_spawn is not None else default_uav_spawn(cfg)
        self._uav_spawn = np.column_stack([spawn, np.full(J, cfg.area.uav_altitude)])
        gs = np.asarray(cfg.gs_positions, dtype=float) if cfg.gs_positions is not None else default_gs_positions(cfg)
        self._gs_pos = np.column_stack([gs, np.zeros(K)])
        self._type_block = np.zeros((cfg.n_entities, 3))
        self._type_block[:I, 0] = 1.0
        self._type_block[I:I + J, 1] = 1.0
        self._type_block[I + J:, 2] = 1.0
        self._id_block = np.eye(cfg.n_agents)
        self.state: GlobalState | None = None
        self.phi = 0.0

    @property
    def n_agents(self) -> int:
        return self.cfg.n_agents

    def agent_kind(self, agent: int) -> str:
        if not 0 <= agent < self.n_agents:
            raise ValueError(f"unknown agent id {agent}")
        return "usv" if agent < self.cfg.n_usvs else "uav"

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        cfg = self.cfg
        I = cfg.n_usvs
        xy = self.rng.uniform(0.0, 1.0, size=(I, 2)) * np.array([cfg.area.x_max, cfg.area.y_max])
        usv_pos = np.column_stack([xy, np.zeros(I)])
        usv_vel = np.tile(np.asarray(cfg.mobility.asymptotic_mean, dtype=float), (I, 1))
        self.state = GlobalState(
            usv_pos=usv_pos,
            usv_vel=usv_vel,
            uav_pos=self._uav_spawn.copy(),
            gs_pos=self._gs_pos.copy(),
            queues=QueueState.zeros(I, cfg.n_uavs, cfg.n_gss),
            tasks=workload.sample_task_sizes(self.arrivals, self.rng),
            slot=0,
        )
        self.phi = 0.0
        return self.state.copy(), self.observations()

    # observations -------------------------------------------------------

    def entity_features(self, state: GlobalState | None = None) -> np.ndarray:
        s = self.state if state is None else state
        cfg = self.cfg
        oc = cfg.observation
        pos = np.concatenate([s.usv_pos, s.uav_pos, s.gs_pos], axis=0)
        backlog = np.concatenate([s.queues.usv, s.queues.uav, s.queues.gs])
        tasks = np.zeros(cfg.n_entities)
        tasks[:cfg.n_usvs] = s.tasks
        feats = np.empty((cfg.n_entities, ENTITY_FEATURES))
        feats[:, 0] = pos[:, 0] / cfg.area.x_max
        feats[:, 1] = pos[:, 1] / cfg.area.y_max
        feats[:, 2] = pos[:, 2] / cfg.area.uav_altitude
        feats[:, 3] = np.log1p(backlog / oc.queue_scale)
        feats[:, 4] = tasks / oc.task_scale
        feats[:, 5:] = self._type_block
        return feats

    def state_vector(self, state: GlobalState | None = None) -> np.ndarray:
        return self.entity_features(state).reshape(-1)

    def observations(self, state: GlobalState | None = None) -> np.ndarray:
        body = self.state_vector(state)
        n = self.n_agents
        return np.concatenate([np.broadcast_to(body, (n, body.size)), self._id_block], axis=1)

    def observe(self, agent: int, state: GlobalState | None = None) -> np.ndarray:
        self.agent_kind(agent)
        return np.concatenate([self.state_vector(state), self._id_block[agent]])

    # dynamics -----------------------------------------------------------

    def _check_actions(self, actions: Sequence[AgentAction]):
        cfg = self.cfg
        if len(actions) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(actions)}")
        for a, act in enumerate(actions):
            if a < cfg.n_usvs:
                if not isinstance(act, UsvAction):
                    raise ValueError(f"agent {a} is a USV and needs a UsvAction")
                if len(act.split) != 3 or not all(math.isfinite(v) for v in act.split):
                    raise ValueError(f"agent {a}: split must be three finite numbers")
            else:
                if not isinstance(act, UavAction):
                    raise ValueError(f"agent {a} is a UAV and needs a UavAction")
                if not (math.isfinite(act.theta) and math.isfinite(act.k)):
                    raise ValueError(f"agent {a}: NaN/inf in UAV action")

    def step(self, actions: Sequence[AgentAction]) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        s = self.state
        cfg = self.cfg
        if s.slot >= cfg.horizon:
            raise RuntimeError("episode is over; call reset()")
        self._check_actions(actions)
        I, J = cfg.n_usvs, cfg.n_uavs

        decisions = []
        for a in range(I):
            act = actions[a]
            dec = workload.project_decision(act.uav, act.gs, act.split)
            dec.validate(cfg.n_uavs, cfg.n_gss)
            decisions.append(dec)
        theta = np.array([actions[I + j].theta for j in range(J)])
        dist = np.array([actions[I + j].k for j in range(J)])
        world.check_uav_action(theta, dist, cfg.area)

        c = cfg.compute.cycles_per_bit
        tasks = [Task(float(d), c) for d in s.tasks]
        u2u, u2g = link_rates(s.usv_pos, s.uav_pos, s.gs_pos, cfg.channel)

        local = np.zeros(I)
        uav_d = np.zeros(I)
        gs_d = np.zeros(I)
        for i, (dec, task) in enumerate(zip(decisions, tasks)):
            local[i] = workload.delay_local(s.queues.usv[i], dec, task, self.f_usv[i])
            if dec.uav is not None:
                uav_d[i] = workload.delay_uav(s.queues.uav[dec.uav], dec, task, u2u[i, dec.uav],
                                              self.f_uav[dec.uav])
            if dec.gs is not None:
                gs_d[i] = workload.delay_gs(s.queues.gs[dec.gs], dec, task, u2g[i, dec.gs],
                                            self.f_gs[dec.gs])
        delays = local + uav_d + gs_d
        reward = workload.slot_reward(s.tasks, delays)

        queues = workload.update_queues(s.queues, decisions, tasks, cfg.compute,
                                        (self.f_usv, self.f_uav, self.f_gs))

        noise = self.rng.standard_normal((I, 2))
        usv_pos, usv_vel = world.gauss_markov_positions(s.usv_pos, s.usv_vel, cfg.mobility, cfg.area, noise)
        uav_pos = world.move_uavs(s.uav_pos, theta, dist, cfg.area, check=False)  # checked above

        info = {
            "slot": s.slot,
            "data_sizes": s.tasks.copy(),
            "delay_local": local,
            "delay_uav": uav_d,
            "delay_gs": gs_d,
            "delays": delays,
            "decisions": decisions,
        }
        self.phi += float(np.sum(delays))
        info["phi"] = self.phi

        self.state = GlobalState(
            usv_pos=usv_pos,
            usv_vel=usv_vel,
            uav_pos=uav_pos,
            gs_pos=s.gs_pos,
            queues=queues,
            tasks=workload.sample_task_sizes(self.arrivals, self.rng),
            slot=s.slot + 1,
        )
        done = self.state.slot == cfg.horizon
        return StepOutcome(self.observations(), float(reward), done, info)
