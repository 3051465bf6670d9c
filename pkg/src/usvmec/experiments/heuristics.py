"""Non-learning reference policies."""

from __future__ import annotations

import math

import numpy as np

from ..env import EnvConfig, GlobalState, UavAction, UsvAction
from ..world import distance

KINDS = ("random", "all-local", "greedy-nearest")


class HeuristicPolicy:
    def __init__(self, kind: str, env_cfg: EnvConfig, rng: np.random.Generator | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown heuristic {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.cfg = env_cfg
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def act(self, state: GlobalState) -> list:
        return heuristic_action(self, state)


def _random(policy: HeuristicPolicy, state: GlobalState) -> list:
    cfg, rng = policy.cfg, policy.rng
    actions = []
    for _ in range(cfg.n_usvs):
        uav = int(rng.integers(cfg.n_uavs + 1))
        gs = int(rng.integers(cfg.n_gss + 1))
        split = rng.dirichlet(np.ones(3))
        actions.append(UsvAction(None if uav == 0 else uav - 1, None if gs == 0 else gs - 1,
                                 tuple(float(v) for v in split)))
    for _ in range(cfg.n_uavs):
        actions.append(UavAction(float(rng.uniform(0.0, 2.0 * math.pi)),
                                 float(rng.uniform(0.0, cfg.area.k_max))))
    return actions


def _all_local(policy: HeuristicPolicy, state: GlobalState) -> list:
    cfg = policy.cfg
    return [UsvAction(None, None, (1.0, 0.0, 0.0)) for _ in range(cfg.n_usvs)] + \
           [UavAction(0.0, 0.0) for _ in range(cfg.n_uavs)]


def _greedy_nearest(policy: HeuristicPolicy, state: GlobalState) -> list:
    cfg = policy.cfg
    actions = []
    for i in range(cfg.n_usvs):
        p = state.usv_pos[i]
        uav = int(np.argmin(distance(p, state.uav_pos)))
        gs = int(np.argmin(distance(p, state.gs_pos)))
        actions.append(UsvAction(uav, gs, (0.2, 0.5, 0.3)))
    centroid = state.usv_pos[:, :2].mean(axis=0)
    for j in range(cfg.n_uavs):
        delta = centroid - state.uav_pos[j, :2]
        gap = float(np.hypot(*delta))
        theta = math.atan2(delta[1], delta[0]) % (2.0 * math.pi)
        actions.append(UavAction(theta, min(cfg.area.k_max, gap)))
    return actions


_DISPATCH = {"random": _random, "all-local": _all_local, "greedy-nearest": _greedy_nearest}


def heuristic_action(policy: HeuristicPolicy, state: GlobalState) -> list:
    return _DISPATCH[policy.kind](policy, state)
