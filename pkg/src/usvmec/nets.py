"""Actor and critic networks built on :mod:`usvmec.autodiff`.

Raw action encoding (what the trainer stores and what log-probs refer to):

* USV agents: ``[uav_index, gs_index, u_alpha, u_beta, u_gamma]`` where index 0
  means "none" and index ``j + 1`` selects node ``j``; the split is
  ``softmax(u)``.
* UAV agents: ``[u_theta, u_k]``; ``theta = pi * (1 + tanh(u_theta))`` and
  ``k = k_max * (1 + tanh(u_k)) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .env import ENTITY_FEATURES, EnvConfig, UavAction, UsvAction

LOG_2PI = math.log(2.0 * math.pi)
PROB_FLOOR = 1e-7


class Module:
    """Parameter container. Subclasses register tensors in ``self._params``."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True)
        self._params[name] = t
        return t

    def add_module(self, prefix: str, module: "Module"):
        for name, t in module._params.items():
            self._params[f"{prefix}.{name}"] = t
        return module

    def parameters(self) -> list[Tensor]:
        return list(self._params.values())

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]):
        missing = set(self._params) - set(arrays)
        unexpected = set(arrays) - set(self._params)
        if missing or unexpected:
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for k, t in self._params.items():
            if arrays[k].shape != t.shape:
                raise ValueError(f"checkpoint shape mismatch for {k}: {arrays[k].shape} vs {t.shape}")
            t.data[...] = arrays[k]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, scale: float = 1.0):
        super().__init__()
        self.W = self.param("W", rng.normal(0.0, scale / math.sqrt(n_in), size=(n_in, n_out)))
        self.b = self.param("b", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.W), self.b)


class MLP(Module):
    """tanh hidden layers, linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator, out_scale: float = 1.0):
        super().__init__()
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            self.layers.append(self.add_module(f"l{i}", Linear(a, b, rng, out_scale if last else 1.0)))

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ad.tanh(x)
        return x


@dataclass(frozen=True)
class NetConfig:
    d_model: int = 32
    n_heads: int = 2
    hidden: int = 64
    init_log_std: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")


class AttentionEncoder(Module):
    """Entity tokens -> one multi-head self-attention block -> [mean-pool, own token]."""

    def __init__(self, n_entities: int, self_index: int, cfg: NetConfig, rng: np.random.Generator):
        super().__init__()
        d = cfg.d_model
        self.n_entities = n_entities
        self.self_index = self_index
        self.n_heads = cfg.n_heads
        self.d_head = d // cfg.n_heads
        self.embed = self.add_module("embed", Linear(ENTITY_FEATURES, d, rng))
        self.wq = self.add_module("wq", Linear(d, d, rng))
        self.wk = self.add_module("wk", Linear(d, d, rng))
        self.wv = self.add_module("wv", Linear(d, d, rng))
        self.wo = self.add_module("wo", Linear(d, d, rng))
        self.out_dim = 2 * d

    def tokens(self, obs: Tensor) -> Tensor:
        b = obs.shape[0]
        body = ad.index(obs, (slice(None), slice(0, self.n_entities * ENTITY_FEATURES)))
        return ad.reshape(body, (b, self.n_entities, ENTITY_FEATURES))

    def encode(self, obs: Tensor) -> Tensor:
        """Per-token features after the attention block, shape (b, n, d)."""
        b, n, h, dh = obs.shape[0], self.n_entities, self.n_heads, self.d_head
        e = self.embed(self.tokens(obs))

        def split_heads(x):
            return ad.transpose(ad.reshape(x, (b, n, h, dh)), (0, 2, 1, 3))

        att = ad.scaled_dot_attention(split_heads(self.wq(e)), split_heads(self.wk(e)),
                                      split_heads(self.wv(e)), dh)
        att = ad.reshape(ad.transpose(att, (0, 2, 1, 3)), (b, n, h * dh))
        return ad.tanh(ad.add(e, self.wo(att)))

    def pooled(self, obs: Tensor) -> Tensor:
        return ad.mean(self.encode(obs), axis=1)

    def __call__(self, obs: Tensor) -> Tensor:
        hidden = self.encode(obs)
        own = ad.index(hidden, (slice(None), self.self_index, slice(None)))
        return ad.concat([ad.mean(hidden, axis=1), own], axis=-1)


class MLPEncoder(Module):
    def __init__(self, obs_dim: int, cfg: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.net = self.add_module("mlp", MLP([obs_dim, cfg.hidden, cfg.hidden], rng))
        self.out_dim = cfg.hidden

    def __call__(self, obs: Tensor) -> Tensor:
        return ad.tanh(self.net(obs))


class ActorNet(Module):
    """Per-agent policy: encoder (attention or MLP) + role-specific heads."""

    def __init__(self, env_cfg: EnvConfig, agent: int, kind: str, cfg: NetConfig,
                 rng: np.random.Generator):
        super().__init__()
        if kind not in ("attention", "mlp"):
            raise ValueError(f"unknown actor kind {kind!r}")
        self.kind = kind
        self.agent = agent
        self.role = "usv" if agent < env_cfg.n_usvs else "uav"
        self.obs_dim = env_cfg.obs_dim
        self.n_uavs, self.n_gss = env_cfg.n_uavs, env_cfg.n_gss
        self.k_max = env_cfg.area.k_max
        if kind == "attention":
            # entities are ordered USVs then UAVs, so an agent's own token index is its id
            self.encoder = self.add_module("enc", AttentionEncoder(env_cfg.n_entities, agent, cfg, rng))
        else:
            self.encoder = self.add_module("enc", MLPEncoder(self.obs_dim, cfg, rng))
        width = self.encoder.out_dim
        self.trunk = self.add_module("trunk", Linear(width, cfg.hidden, rng))
        if self.role == "usv":
            self.uav_head = self.add_module("uav_head", Linear(cfg.hidden, self.n_uavs + 1, rng, 0.01))
            self.gs_head = self.add_module("gs_head", Linear(cfg.hidden, self.n_gss + 1, rng, 0.01))
            self.split_head = self.add_module("split_head", Linear(cfg.hidden, 3, rng, 0.01))
            self.log_std = self.param("split_log_std", np.full(3, cfg.init_log_std))
        else:
            self.move_head = self.add_module("move_head", Linear(cfg.hidden, 2, rng, 0.01))
            self.log_std = self.param("move_log_std", np.full(2, cfg.init_log_std))

    @property
    def raw_dim(self) -> int:
        return 5 if self.role == "usv" else 2

    def __call__(self, obs) -> "ActionDistribution":
        obs = ad.as_tensor(obs)
        if obs.ndim != 2 or obs.shape[1] != self.obs_dim:
            raise ValueError(f"actor expects observations of shape (batch, {self.obs_dim}), got {obs.shape}")
        h = ad.tanh(self.trunk(self.encoder(obs)))
        if self.role == "usv":
            return ActionDistribution(
                role="usv",
                uav_logp=ad.log_softmax(self.uav_head(h)),
                gs_logp=ad.log_softmax(self.gs_head(h)),
                mean=self.split_head(h),
                log_std=self.log_std,
                k_max=self.k_max,
            )
        return ActionDistribution(role="uav", mean=self.move_head(h), log_std=self.log_std, k_max=self.k_max)


def _log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2), stable for large |u|."""
    return 2.0 * (math.log(2.0) - np.abs(u) - np.log1p(np.exp(-2.0 * np.abs(u))))


class ActionDistribution:
    """Factored policy distribution for one agent over a batch of observations."""

    def __init__(self, role: str, mean: Tensor, log_std: Tensor, k_max: float,
                 uav_logp: Tensor | None = None, gs_logp: Tensor | None = None):
        self.role = role
        self.mean = mean
        self.log_std = log_std
        self.k_max = k_max
        self.uav_logp = uav_logp
        self.gs_logp = gs_logp

    @property
    def batch(self) -> int:
        return self.mean.shape[0]

    def probs(self) -> dict[str, np.ndarray]:
        out = {"std": np.exp(self.log_std.data)}
        if self.role == "usv":
            out["uav"] = np.exp(self.uav_logp.data)
            out["gs"] = np.exp(self.gs_logp.data)
            e = np.exp(self.mean.data - self.mean.data.max(axis=-1, keepdims=True))
            out["split"] = e / e.sum(axis=-1, keepdims=True)
        return out

    def _gaussian_logp(self, u: np.ndarray) -> Tensor:
        inv_std = ad.exp(ad.mul(self.log_std, -1.0))
        z = ad.mul(ad.sub(Tensor(u), self.mean), inv_std)
        per_dim = ad.sub(ad.mul(ad.mul(z, z), -0.5), ad.add(self.log_std, 0.5 * LOG_2PI))
        return ad.sum(per_dim, axis=-1)

    def log_prob(self, raw: np.ndarray, squash_correction: bool = True) -> Tensor:
        """Log-density of stored raw actions, shape (batch,).

        For UAV agents the density is over the squashed (theta, k) values, so the
        tanh change-of-variables term is included unless disabled.
        """
        raw = np.asarray(raw, dtype=float)
        b = raw.shape[0]
        if self.role == "usv":
            uav_idx = raw[:, 0].astype(int)
            gs_idx = raw[:, 1].astype(int)
            rows = np.arange(b)
            lp = ad.add(ad.index(self.uav_logp, (rows, uav_idx)), ad.index(self.gs_logp, (rows, gs_idx)))
            return ad.add(lp, self._gaussian_logp(raw[:, 2:5]))
        lp = self._gaussian_logp(raw)
        if squash_correction:
            scale = np.array([math.pi, self.k_max / 2.0])
            log_det = np.sum(np.log(scale) + _log1m_tanh_sq(raw), axis=-1)
            lp = ad.sub(lp, log_det)
        return lp

    def entropy(self) -> Tensor:
        """Entropy of the categorical heads plus the pre-squash Gaussian, shape (batch,)."""
        gauss = ad.sum(ad.add(self.log_std, 0.5 * (LOG_2PI + 1.0)))
        ent = ad.add(Tensor(np.zeros(self.batch)), gauss)
        if self.role == "usv":
            for logp in (self.uav_logp, self.gs_logp):
                ent = ad.sub(ent, ad.sum(ad.mul(ad.exp(logp), logp), axis=-1))
        return ent

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        std = np.exp(self.log_std.data)
        u = self.mean.data + std * rng.standard_normal(self.mean.shape)
        if self.role == "uav":
            return u
        uav = _sample_categorical(np.exp(self.uav_logp.data), rng)
        gs = _sample_categorical(np.exp(self.gs_logp.data), rng)
        return np.column_stack([uav, gs, u])

    def mode(self) -> np.ndarray:
        if self.role == "uav":
            return self.mean.data.copy()
        return np.column_stack([self.uav_logp.data.argmax(axis=-1), self.gs_logp.data.argmax(axis=-1),
                                self.mean.data])


def _sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    r = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    return np.minimum((cdf <= r).sum(axis=-1), probs.shape[-1] - 1)


def squash_move(u: np.ndarray, k_max: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.tanh(np.asarray(u, dtype=float))
    theta = math.pi * (1.0 + t[..., 0])
    k = k_max * 0.5 * (1.0 + t[..., 1])
    return np.clip(theta, 0.0, 2.0 * math.pi), np.clip(k, 0.0, k_max)


def split_from_logits(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    e = np.exp(u - u.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def to_env_action(raw: np.ndarray, role: str, k_max: float):
    """Map one raw action vector to the environment's action type."""
    if role == "usv":
        uav, gs = int(raw[0]), int(raw[1])
        split = split_from_logits(raw[2:5])
        return UsvAction(None if uav == 0 else uav - 1, None if gs == 0 else gs - 1,
                         (float(split[0]), float(split[1]), float(split[2])))
    theta, k = squash_move(raw, k_max)
    return UavAction(float(theta), float(k))


def sample_and_squash(dist: ActionDistribution, rng: np.random.Generator):
    """Draw one action per batch row; returns (env actions, raw actions, log-probs)."""
    raw = dist.sample(rng)
    with ad.no_grad():
        logp = dist.log_prob(raw).data
    actions = [to_env_action(r, dist.role, dist.k_max) for r in raw]
    return actions, raw, logp


# critic --------------------------------------------------------------------

class GeneratorNet(Module):
    """State -> scalar value estimate."""

    def __init__(self, state_dim: int, cfg: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.net = self.add_module("mlp", MLP([state_dim, cfg.hidden, cfg.hidden, 1], rng))

    def __call__(self, states) -> Tensor:
        s = ad.as_tensor(states)
        return ad.reshape(self.net(s), (s.shape[0],))


class DiscriminatorNet(Module):
    """(state, value) -> probability that the value is a real return."""

    def __init__(self, state_dim: int, cfg: NetConfig, rng: np.random.Generator):
        super().__init__()
        self.net = self.add_module("mlp", MLP([state_dim + 1, cfg.hidden, cfg.hidden, 1], rng))

    def __call__(self, states, values) -> Tensor:
        s = ad.as_tensor(states)
        v = ad.reshape(ad.as_tensor(values), (s.shape[0], 1))
        return ad.sigmoid(ad.reshape(self.net(ad.concat([s, v], axis=-1)), (s.shape[0],)))


def _clamped(p: Tensor) -> Tensor:
    return ad.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def d_loss(D, states, real_values, fake_values) -> Tensor:
    """-mean[log D(s, real) + log(1 - D(s, fake))]."""
    p_real = _clamped(D(states, real_values))
    p_fake = _clamped(D(states, fake_values))
    return ad.mul(ad.mean(ad.add(ad.log(p_real), ad.log(ad.sub(1.0, p_fake)))), -1.0)


def g_adv_loss(D, states, fake_values) -> Tensor:
    """mean[log(1 - D(s, fake))]; minimised by the generator."""
    return ad.mean(ad.log(ad.sub(1.0, _clamped(D(states, fake_values)))))


def g_value_loss(G, states, returns) -> Tensor:
    return ad.mse(G(states), Tensor(np.asarray(returns, dtype=float)))
