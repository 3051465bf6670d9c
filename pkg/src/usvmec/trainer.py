"""Heterogeneous-agent PPO training loop with a GAN-regularised critic.

One iteration: collect ``batch_episodes`` episodes with the joint policy,
estimate advantages with GAE on generator values, update the actors one by
one in a random order (each weighting its surrogate by the running M-factor
of the agents updated before it), then update the critic.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .config import ConfigError, from_dict, to_dict
from .env import EnvConfig, UsvMecEnv
from .nets import (ActorNet, DiscriminatorNet, GeneratorNet, NetConfig, d_loss, g_adv_loss,
                   g_value_loss, to_env_action)

log = logging.getLogger(__name__)

# variant -> (actor encoder, critic, policy objective)
VARIANTS = {
    "GAI-HAPPO": ("attention", "gan", "clip"),
    "HAPPO": ("mlp", "plain", "clip"),
    "GAN-HAPPO": ("mlp", "gan", "clip"),
    "Transformer-HAPPO": ("attention", "plain", "clip"),
    "HAA2C": ("mlp", "plain", "a2c"),
}

# stream tags for np.random.SeedSequence([seed, tag, ...])
_ACTOR_INIT, _G_INIT, _D_INIT, _ENV, _SAMPLING, _PERMUTE, _ACTOR_MB, _CRITIC_MB = range(1, 9)


@dataclass(frozen=True)
class HappoConfig:
    variant: str = "GAI-HAPPO"
    iterations: int = 100
    batch_episodes: int = 2
    clip_eps: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    actor_lr: float = 5e-5
    critic_lr: float = 1e-4
    disc_lr: float = 1e-4
    epochs: int = 5
    minibatches: int = 4
    max_grad_norm: float = 0.5
    entropy_coef: float = 0.01
    lambda_adv: float = 0.1
    reward_scale: float = 1e-7
    normalize_advantages: bool = True
    actor_kind: str | None = None
    critic_kind: str | None = None
    net: NetConfig = field(default_factory=NetConfig)
    checkpoint_every: int = 0
    record_wall_clock: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")
        if not self.clip_eps > 0:
            raise ValueError("clip_eps must be > 0")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.actor_lr < 0 or self.critic_lr < 0 or self.disc_lr < 0:
            raise ValueError("learning rates must be >= 0")
        for name in ("iterations", "batch_episodes", "epochs", "minibatches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.actor_kind not in (None, "attention", "mlp"):
            raise ValueError(f"actor_kind must be 'attention' or 'mlp', got {self.actor_kind!r}")
        if self.critic_kind not in (None, "gan", "plain"):
            raise ValueError(f"critic_kind must be 'gan' or 'plain', got {self.critic_kind!r}")

    @property
    def wiring(self) -> tuple[str, str, str]:
        actor, critic, objective = VARIANTS[self.variant]
        return self.actor_kind or actor, self.critic_kind or critic, objective


@dataclass(frozen=True)
class RunConfig:
    """Everything a ``train`` run needs; the JSON layout of ``--config`` files."""

    env: EnvConfig = field(default_factory=EnvConfig)
    train: HappoConfig = field(default_factory=HappoConfig)


def _stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


def _derived_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint64)[0])


# policies ------------------------------------------------------------------

class JointPolicy:
    """One actor per agent; parameters are never shared between agents."""

    def __init__(self, env_cfg: EnvConfig, actor_kind: str, net_cfg: NetConfig, seed: int):
        self.env_cfg = env_cfg
        self.actor_kind = actor_kind
        self.actors = [ActorNet(env_cfg, a, actor_kind, net_cfg, _stream(seed, _ACTOR_INIT, a))
                       for a in range(env_cfg.n_agents)]

    def act(self, obs: np.ndarray, rng: np.random.Generator | None, deterministic: bool = False):
        """``obs`` is (B, N, obs_dim). Returns raw actions per agent and (B, N) log-probs."""
        raws, logps = [], []
        with ad.no_grad():
            for a, actor in enumerate(self.actors):
                dist = actor(obs[:, a])
                raw = dist.mode() if deterministic else dist.sample(rng)
                raws.append(raw)
                logps.append(dist.log_prob(raw).data)
        return raws, np.stack(logps, axis=1)

    def env_actions(self, raws: list[np.ndarray], row: int) -> list:
        k_max = self.env_cfg.area.k_max
        return [to_env_action(raws[a][row], actor.role, k_max) for a, actor in enumerate(self.actors)]

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for a, actor in enumerate(self.actors):
            out.update({f"actor{a}/{k}": v for k, v in actor.state_dict().items()})
        return out

    def load_state_dict(self, arrays: dict[str, np.ndarray]):
        for a, actor in enumerate(self.actors):
            prefix = f"actor{a}/"
            actor.load_state_dict({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})


# rollouts ------------------------------------------------------------------

@dataclass
class RolloutBuffer:
    """Rectangular (T, B, ...) storage for B lock-stepped episodes of length T."""

    states: np.ndarray          # (T + 1, B, S), last row is the post-terminal state
    obs: np.ndarray             # (T, B, N, O)
    raw_actions: list           # per agent: (T, B, raw_dim)
    logp: np.ndarray            # (T, B, N)
    rewards: np.ndarray         # (T, B), environment reward
    dones: np.ndarray           # (T, B)
    delays: np.ndarray          # (T, B, I) per-USV slot delay
    data_sizes: np.ndarray      # (T, B, I)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_episodes(self) -> int:
        return self.rewards.shape[1]

    def episode_rewards(self) -> np.ndarray:
        return self.rewards.sum(axis=0)

    def mean_task_delay(self) -> float:
        mask = self.data_sizes > 0
        return float(self.delays[mask].sum() / max(mask.sum(), 1))


def collect_rollouts(env_cfg: EnvConfig, policy: JointPolicy, episode_seeds: list[int],
                     rng: np.random.Generator | None, deterministic: bool = False) -> RolloutBuffer:
    envs = [UsvMecEnv(env_cfg, seed=s) for s in episode_seeds]
    B, T, N, I = len(envs), env_cfg.horizon, env_cfg.n_agents, env_cfg.n_usvs
    S, O = env_cfg.state_dim, env_cfg.obs_dim
    states = np.zeros((T + 1, B, S))
    obs = np.zeros((T, B, N, O))
    raw_actions = [np.zeros((T, B, actor.raw_dim)) for actor in policy.actors]
    logp = np.zeros((T, B, N))
    rewards = np.zeros((T, B))
    dones = np.zeros((T, B))
    delays = np.zeros((T, B, I))
    sizes = np.zeros((T, B, I))

    current = np.zeros((B, N, O))
    for b, env in enumerate(envs):
        _, o = env.reset()
        current[b] = o
        states[0, b] = env.state_vector()
    for t in range(T):
        obs[t] = current
        raws, lp = policy.act(current, rng, deterministic)
        logp[t] = lp
        for a in range(N):
            raw_actions[a][t] = raws[a]
        for b, env in enumerate(envs):
            out = env.step(policy.env_actions(raws, b))
            rewards[t, b] = out.reward
            dones[t, b] = out.done
            delays[t, b] = out.info["delays"]
            sizes[t, b] = out.info["data_sizes"]
            current[b] = out.observations
            states[t + 1, b] = env.state_vector()
    return RolloutBuffer(states, obs, raw_actions, logp, rewards, dones, delays, sizes)


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, discount: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """GAE over the leading time axis; ``values`` has one more row than ``rewards``.

    A step with ``done`` set does not bootstrap from the next value.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    last = np.zeros_like(rewards[0])
    for t in reversed(range(T)):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + discount * values[t + 1] * nonterminal - values[t]
        last = delta + discount * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values[:T]


def normalize(x: np.ndarray) -> np.ndarray:
    std = x.std()
    return (x - x.mean()) / (std + 1e-8) if std > 0 else x - x.mean()


def permute_agents(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n)


# objectives ----------------------------------------------------------------

def happo_clip_objective(ratio, m_factor, eps: float) -> Tensor:
    """mean(min(ratio * M, clip(ratio, 1 - eps, 1 + eps) * M)), to be maximised."""
    ratio = ad.as_tensor(ratio)
    m = Tensor(np.asarray(m_factor, dtype=float))
    unclipped = ad.mul(ratio, m)
    clipped = ad.mul(ad.clip(ratio, 1.0 - eps, 1.0 + eps), m)
    return ad.mean(ad.minimum(unclipped, clipped))


def a2c_objective(logp, m_factor) -> Tensor:
    return ad.mean(ad.mul(ad.as_tensor(logp), Tensor(np.asarray(m_factor, dtype=float))))


def update_m_factor(m_prev: np.ndarray, new_logp: np.ndarray, old_logp: np.ndarray) -> np.ndarray:
    """M <- (pi_new(a) / pi_old(a)) * M for the agent just updated."""
    old_logp = np.asarray(old_logp, dtype=float)
    if not np.all(np.isfinite(old_logp)):
        raise ValueError("old policy assigns zero probability to a stored action")
    return np.exp(np.asarray(new_logp, dtype=float) - old_logp) * m_prev


def _minibatches(n: int, k: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    perm = rng.permutation(n)
    yield from (mb for mb in np.array_split(perm, min(k, n)) if mb.size)


def _abort_if_nan(value: float, what: str, **diag):
    if not math.isfinite(value):
        detail = ", ".join(f"{k}={v}" for k, v in diag.items())
        raise FloatingPointError(f"non-finite {what} ({detail})")


def happo_agent_update(actor: ActorNet, opt: Adam, obs: np.ndarray, raw: np.ndarray,
                       old_logp: np.ndarray, m_factor: np.ndarray, cfg: HappoConfig,
                       rng: np.random.Generator, objective: str = "clip") -> np.ndarray:
    """Ascend the agent's surrogate; returns its new log-probs on the whole batch."""
    epochs = 1 if objective == "a2c" else cfg.epochs
    params = actor.parameters()
    for epoch in range(epochs):
        for mb in _minibatches(len(obs), cfg.minibatches, rng):
            dist = actor(obs[mb])
            logp = dist.log_prob(raw[mb])
            if objective == "clip":
                ratio = ad.exp(ad.sub(logp, Tensor(old_logp[mb])))
                surrogate = happo_clip_objective(ratio, m_factor[mb], cfg.clip_eps)
            else:
                surrogate = a2c_objective(logp, m_factor[mb])
            entropy = ad.mean(dist.entropy())
            loss = ad.mul(ad.add(surrogate, ad.mul(entropy, cfg.entropy_coef)), -1.0)
            _abort_if_nan(loss.item(), "actor loss", agent=actor.agent, epoch=epoch)
            opt.zero_grad()
            loss.backward()
            ad.clip_grad_norm(params, cfg.max_grad_norm)
            opt.step()
    with ad.no_grad():
        return actor(obs).log_prob(raw).data


class Critic:
    """Generator value net, plus a discriminator when ``kind == 'gan'``."""

    def __init__(self, state_dim: int, kind: str, cfg: HappoConfig, seed: int):
        self.kind = kind
        self.cfg = cfg
        self.G = GeneratorNet(state_dim, cfg.net, _stream(seed, _G_INIT))
        self.g_opt = Adam(self.G.parameters(), cfg.critic_lr)
        self.D = DiscriminatorNet(state_dim, cfg.net, _stream(seed, _D_INIT)) if kind == "gan" else None
        self.d_opt = Adam(self.D.parameters(), cfg.disc_lr) if self.D is not None else None

    def values(self, states: np.ndarray) -> np.ndarray:
        shape = states.shape[:-1]
        with ad.no_grad():
            v = self.G(states.reshape(-1, states.shape[-1])).data
        return v.reshape(shape)

    def update(self, states: np.ndarray, returns: np.ndarray, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        stats = {"value_loss": 0.0, "d_loss": 0.0}
        for _ in range(cfg.epochs):
            for mb in _minibatches(len(states), cfg.minibatches, rng):
                s, r = states[mb], returns[mb]
                if self.D is not None:
                    fake = self.values(s)
                    loss_d = d_loss(self.D, s, r, fake)
                    _abort_if_nan(loss_d.item(), "discriminator loss")
                    self.d_opt.zero_grad()
                    loss_d.backward()
                    ad.clip_grad_norm(self.D.parameters(), cfg.max_grad_norm)
                    self.d_opt.step()
                    stats["d_loss"] = loss_d.item()
                value_loss = g_value_loss(self.G, s, r)
                loss = value_loss
                if self.D is not None:
                    loss = ad.add(value_loss, ad.mul(g_adv_loss(self.D, s, self.G(s)), cfg.lambda_adv))
                _abort_if_nan(loss.item(), "generator loss")
                self.g_opt.zero_grad()
                loss.backward()
                if self.D is not None:
                    self.D.zero_grad()
                ad.clip_grad_norm(self.G.parameters(), cfg.max_grad_norm)
                self.g_opt.step()
                stats["value_loss"] = value_loss.item()
        return stats

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"G/{k}": v for k, v in self.G.state_dict().items()}
        if self.D is not None:
            out.update({f"D/{k}": v for k, v in self.D.state_dict().items()})
        return out

    def load_state_dict(self, arrays: dict[str, np.ndarray]):
        self.G.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("G/")})
        if self.D is not None:
            self.D.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("D/")})


# training ------------------------------------------------------------------

METRIC_FIELDS = ("variant", "n_usvs", "n_uavs", "n_gss", "seed", "iteration",
                 "mean_episode_reward", "mean_task_delay", "wall_clock_seconds")


@dataclass
class MetricsRow:
    variant: str
    n_usvs: int
    n_uavs: int
    n_gss: int
    seed: int
    iteration: int
    mean_episode_reward: float
    mean_task_delay: float
    wall_clock_seconds: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in METRIC_FIELDS)


class Trainer:
    def __init__(self, env_cfg: EnvConfig, cfg: HappoConfig, seed: int):
        self.env_cfg = env_cfg
        self.cfg = cfg
        self.seed = seed
        actor_kind, critic_kind, self.objective = cfg.wiring
        self.policy = JointPolicy(env_cfg, actor_kind, cfg.net, seed)
        self.actor_opts = [Adam(a.parameters(), cfg.actor_lr) for a in self.policy.actors]
        self.critic = Critic(env_cfg.state_dim, critic_kind, cfg, seed)
        self.sampling_rng = _stream(seed, _SAMPLING)
        self.permute_rng = _stream(seed, _PERMUTE)
        self.actor_mb_rng = _stream(seed, _ACTOR_MB)
        self.critic_mb_rng = _stream(seed, _CRITIC_MB)
        self.iteration = 0

    def episode_seeds(self, iteration: int) -> list[int]:
        return [_derived_seed(self.seed, _ENV, iteration, b) for b in range(self.cfg.batch_episodes)]

    def prepare(self, buf: RolloutBuffer) -> RolloutBuffer:
        rewards = buf.rewards * self.cfg.reward_scale
        values = self.critic.values(buf.states)
        buf.advantages, buf.returns = compute_gae(rewards, values, buf.dones, self.cfg.discount,
                                                  self.cfg.gae_lambda)
        return buf

    def update(self, buf: RolloutBuffer) -> dict:
        cfg = self.cfg
        N = self.env_cfg.n_agents
        adv = buf.advantages.reshape(-1)
        m_factor = normalize(adv) if cfg.normalize_advantages else adv.copy()
        order = permute_agents(N, self.permute_rng)
        obs = buf.obs.reshape(-1, N, buf.obs.shape[-1])
        old_logp = buf.logp.reshape(-1, N)
        for a in order:
            actor = self.policy.actors[a]
            raw = buf.raw_actions[a].reshape(-1, actor.raw_dim)
            new_logp = happo_agent_update(actor, self.actor_opts[a], obs[:, a], raw, old_logp[:, a],
                                          m_factor, cfg, self.actor_mb_rng, self.objective)
            m_factor = update_m_factor(m_factor, new_logp, old_logp[:, a])
        states = buf.states[:-1].reshape(-1, buf.states.shape[-1])
        stats = self.critic.update(states, buf.returns.reshape(-1), self.critic_mb_rng)
        stats["order"] = order.tolist()
        return stats

    def run_iteration(self) -> tuple[RolloutBuffer, dict]:
        buf = collect_rollouts(self.env_cfg, self.policy, self.episode_seeds(self.iteration),
                               self.sampling_rng)
        self.prepare(buf)
        stats = self.update(buf)
        self.iteration += 1
        return buf, stats

    def train(self, iterations: int | None = None,
              on_row: Callable[[MetricsRow], None] | None = None,
              checkpoint_dir: str | Path | None = None) -> list[MetricsRow]:
        rows = []
        start = time.perf_counter()
        for _ in range(self.cfg.iterations if iterations is None else iterations):
            buf, stats = self.run_iteration()
            elapsed = time.perf_counter() - start if self.cfg.record_wall_clock else 0.0
            row = MetricsRow(self.cfg.variant, self.env_cfg.n_usvs, self.env_cfg.n_uavs,
                             self.env_cfg.n_gss, self.seed, self.iteration - 1,
                             float(buf.episode_rewards().mean()), buf.mean_task_delay(), elapsed)
            log.debug("iter %d reward %.4g delay %.4g %s", row.iteration, row.mean_episode_reward,
                      row.mean_task_delay, stats)
            rows.append(row)
            if on_row is not None:
                on_row(row)
            every = self.cfg.checkpoint_every
            if checkpoint_dir is not None and every and self.iteration % every == 0:
                self.save(Path(checkpoint_dir) / f"checkpoint_{self.iteration:06d}.npz")
        if checkpoint_dir is not None:
            self.save(Path(checkpoint_dir) / "checkpoint_final.npz")
        return rows

    # checkpoints

    def save(self, path: str | Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = json.dumps({"env": to_dict(self.env_cfg), "train": to_dict(self.cfg),
                           "seed": self.seed, "iteration": self.iteration}, sort_keys=True)
        arrays = {**self.policy.state_dict(), **self.critic.state_dict(), "__meta__": np.array(meta)}
        ad.save_arrays(path, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "Trainer":
        arrays = ad.load_arrays(path)
        try:
            meta = json.loads(str(arrays.pop("__meta__")))
            env_cfg = from_dict(EnvConfig, meta["env"])
            cfg = from_dict(HappoConfig, meta["train"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: unreadable checkpoint metadata ({exc})") from exc
        trainer = cls(env_cfg, cfg, meta["seed"])
        trainer.policy.load_state_dict(arrays)
        trainer.critic.load_state_dict(arrays)
        trainer.iteration = meta["iteration"]
        return trainer
