from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import EnvConfig, UsvMecEnv
from ..trainer import JointPolicy, Trainer, collect_rollouts
from .heuristics import HeuristicPolicy

_EVAL_TAG = 9


@dataclass
class EvalResult:
    mean_reward: float
    mean_delay: float
    episode_rewards: np.ndarray
    phi: float
    n_tasks: int


def eval_episode_seeds(seed: int, episodes: int) -> list[int]:
    ss = np.random.SeedSequence([seed, _EVAL_TAG])
    return [int(s) for s in ss.generate_state(episodes, np.uint64)]


def _run_heuristic(policy: HeuristicPolicy, env_cfg: EnvConfig, seeds: list[int]):
    rewards, phi, n_tasks = [], 0.0, 0
    for s in seeds:
        env = UsvMecEnv(env_cfg, seed=s)
        env.reset()
        total, done = 0.0, False
        while not done:
            n_tasks += int(np.count_nonzero(env.state.tasks > 0))
            out = env.step(policy.act(env.state))
            total += out.reward
            done = out.done
        rewards.append(total)
        phi += out.info["phi"]
    return np.array(rewards), phi, n_tasks


def evaluate(policy, env_cfg: EnvConfig, episodes: int, seed: int) -> EvalResult:
    """Mean episode reward and mean per-task delay over fresh seeded episodes.

    Learned policies act greedily (argmax / Gaussian mean). The per-task delay
    is the accumulated slot delay divided by the number of non-empty tasks.
    """
    if isinstance(policy, Trainer):
        policy = policy.policy
    seeds = eval_episode_seeds(seed, episodes)
    if isinstance(policy, HeuristicPolicy):
        if policy.cfg.n_usvs != env_cfg.n_usvs or policy.cfg.n_uavs != env_cfg.n_uavs \
                or policy.cfg.n_gss != env_cfg.n_gss:
            raise ValueError("heuristic policy was built for a different scenario")
        rewards, phi, n_tasks = _run_heuristic(policy, env_cfg, seeds)
    elif isinstance(policy, JointPolicy):
        pc = policy.env_cfg
        if (pc.n_usvs, pc.n_uavs, pc.n_gss) != (env_cfg.n_usvs, env_cfg.n_uavs, env_cfg.n_gss):
            raise ValueError(
                f"checkpoint scenario ({pc.n_usvs}, {pc.n_uavs}, {pc.n_gss}) does not match "
                f"({env_cfg.n_usvs}, {env_cfg.n_uavs}, {env_cfg.n_gss})")
        buf = collect_rollouts(env_cfg, policy, seeds, rng=None, deterministic=True)
        rewards = buf.episode_rewards()
        phi = float(buf.delays.sum())
        n_tasks = int(np.count_nonzero(buf.data_sizes > 0))
    else:
        raise TypeError(f"cannot evaluate {type(policy).__name__}")
    return EvalResult(float(np.mean(rewards)), phi / max(n_tasks, 1), rewards, phi, n_tasks)
