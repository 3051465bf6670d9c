"""Task arrivals, offloading decisions, queue dynamics and delay/reward accounting.

Units: data and backlogs in bits, compute capacity in cycles/s, time in
seconds. Per-slot service in bits is ``slot_duration * f / cycles_per_bit``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MBIT = 1.0e6
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class Task:
    data_size: float
    cycles_per_bit: float

    def __post_init__(self):
        if self.data_size < 0:
            raise ValueError(f"data_size must be >= 0, got {self.data_size}")
        if not self.cycles_per_bit > 0:
            raise ValueError(f"cycles_per_bit must be > 0, got {self.cycles_per_bit}")


@dataclass(frozen=True)
class OffloadDecision:
    """One USV's offload choice. ``uav``/``gs`` are 0-based indices or None."""

    uav: int | None
    gs: int | None
    alpha: float
    beta: float
    gamma: float

    def validate(self, n_uavs: int | None = None, n_gss: int | None = None) -> None:
        split = (self.alpha, self.beta, self.gamma)
        if any(not math.isfinite(v) or v < 0 for v in split):
            raise ValueError(f"split must be finite and non-negative: {split}")
        if abs(sum(split) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"split must sum to 1: {split}")
        if self.uav is None and self.beta != 0.0:
            raise ValueError("beta > 0 without a selected UAV")
        if self.gs is None and self.gamma != 0.0:
            raise ValueError("gamma > 0 without a selected GS")
        if n_uavs is not None and self.uav is not None and not 0 <= self.uav < n_uavs:
            raise ValueError(f"unknown UAV index {self.uav}")
        if n_gss is not None and self.gs is not None and not 0 <= self.gs < n_gss:
            raise ValueError(f"unknown GS index {self.gs}")


@dataclass
class QueueState:
    usv: np.ndarray
    uav: np.ndarray
    gs: np.ndarray

    @classmethod
    def zeros(cls, n_usvs: int, n_uavs: int, n_gss: int) -> "QueueState":
        return cls(np.zeros(n_usvs), np.zeros(n_uavs), np.zeros(n_gss))

    def copy(self) -> "QueueState":
        return QueueState(self.usv.copy(), self.uav.copy(), self.gs.copy())


def _per_node(value, n: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected a scalar or {n} per-node values, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ComputeConfig:
    """Compute capacities and arrivals.

    Capacities and ``mean_arrival`` accept a scalar or a per-node list; use
    :meth:`capacities` to get per-node arrays.
    """

    f_usv: float | list = 1.0e9
    f_uav: float | list = 5.0e9
    f_gs: float | list = 2.0e10
    mean_arrival: float | list = 15.0
    cycles_per_bit: float = 270.0
    slot_duration: float = 1.0

    def __post_init__(self):
        for name in ("f_usv", "f_uav", "f_gs"):
            if np.any(np.asarray(getattr(self, name), dtype=float) <= 0):
                raise ValueError(f"{name} must be > 0")
        if np.any(np.asarray(self.mean_arrival, dtype=float) < 0):
            raise ValueError("mean_arrival must be >= 0")
        if not self.cycles_per_bit > 0:
            raise ValueError("cycles_per_bit must be > 0")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be > 0")

    def capacities(self, n_usvs: int, n_uavs: int, n_gss: int):
        return (_per_node(self.f_usv, n_usvs, "f_usv"),
                _per_node(self.f_uav, n_uavs, "f_uav"),
                _per_node(self.f_gs, n_gss, "f_gs"))

    def arrivals(self, n_usvs: int) -> np.ndarray:
        return _per_node(self.mean_arrival, n_usvs, "mean_arrival")


def sample_task(cfg: ComputeConfig, rng: np.random.Generator, mean_arrival: float | None = None) -> Task:
    """Poisson task size in whole Mbit."""
    lam = float(cfg.mean_arrival) if mean_arrival is None else mean_arrival
    return Task(float(rng.poisson(lam)) * MBIT, cfg.cycles_per_bit)


def sample_task_sizes(lams: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draw for all USVs, in USV-index order."""
    return rng.poisson(lams).astype(float) * MBIT


def project_decision(uav: int | None, gs: int | None, split: Sequence[float]) -> OffloadDecision:
    """Zero the shares of unselected targets and renormalise onto the simplex."""
    alpha, beta, gamma = (float(v) for v in split)
    if any(not math.isfinite(v) or v < 0 for v in (alpha, beta, gamma)):
        raise ValueError(f"split components must be finite and >= 0: {split}")
    if alpha + beta + gamma <= 0.0:
        raise ValueError("split must not be all zero")
    if uav is None:
        beta = 0.0
    if gs is None:
        gamma = 0.0
    total = alpha + beta + gamma
    if abs(total - 1.0) <= SIMPLEX_TOL:
        return OffloadDecision(uav, gs, alpha, beta, gamma)
    if total <= 0.0:
        return OffloadDecision(uav, gs, 1.0, 0.0, 0.0)
    alpha, beta, gamma = alpha / total, beta / total, gamma / total
    return OffloadDecision(uav, gs, alpha, beta, gamma)


def update_queues(q: QueueState, decisions: Sequence[OffloadDecision], tasks: Sequence[Task],
                  cfg: ComputeConfig, capacities: tuple | None = None) -> QueueState:
    """One slot of queue dynamics; ``capacities`` may pass pre-expanded per-node arrays."""
    n_usvs, n_uavs, n_gss = len(q.usv), len(q.uav), len(q.gs)
    f_usv, f_uav, f_gs = capacities if capacities is not None else cfg.capacities(n_usvs, n_uavs, n_gss)
    usv_in = np.zeros(n_usvs)
    uav_in = np.zeros(n_uavs)
    gs_in = np.zeros(n_gss)
    for i, (dec, task) in enumerate(zip(decisions, tasks)):
        usv_in[i] = dec.alpha * task.data_size
        if dec.uav is not None:
            uav_in[dec.uav] += dec.beta * task.data_size
        if dec.gs is not None:
            gs_in[dec.gs] += dec.gamma * task.data_size
    scale = cfg.slot_duration / cfg.cycles_per_bit
    return QueueState(
        usv=np.maximum(0.0, q.usv + usv_in - scale * f_usv),
        uav=np.maximum(0.0, q.uav + uav_in - scale * f_uav),
        gs=np.maximum(0.0, q.gs + gs_in - scale * f_gs),
    )


def delay_local(backlog: float, dec: OffloadDecision, task: Task, f_usv: float) -> float:
    c = task.cycles_per_bit
    return backlog * c / f_usv + dec.alpha * task.data_size * c / f_usv


def _offload_delay(selected: bool, backlog: float, share: float, task: Task, rate: float, f: float) -> float:
    if not selected:
        return 0.0
    c = task.cycles_per_bit
    bits = share * task.data_size
    if bits > 0 and not rate > 0:
        raise ValueError(f"non-positive link rate {rate} with data to send")
    tx = bits / rate if bits > 0 else 0.0
    return backlog * c / f + tx + bits * c / f


def delay_uav(backlog: float, dec: OffloadDecision, task: Task, rate: float, f_uav: float) -> float:
    return _offload_delay(dec.uav is not None, backlog, dec.beta, task, rate, f_uav)


def delay_gs(backlog: float, dec: OffloadDecision, task: Task, rate: float, f_gs: float) -> float:
    return _offload_delay(dec.gs is not None, backlog, dec.gamma, task, rate, f_gs)


def total_delay(local: float, uav: float | Iterable[float] = 0.0, gs: float | Iterable[float] = 0.0) -> float:
    return float(local + np.sum(uav) + np.sum(gs))


def cumulative_cost(history: Iterable[Sequence[float]]) -> float:
    """Sum of per-USV slot delays over all slots."""
    return float(sum(sum(slot) for slot in history))


def slot_reward(data_sizes: Sequence[float], delays: Sequence[float]) -> float:
    reward = 0.0
    for d, t in zip(data_sizes, delays):
        if d <= 0:
            continue
        assert t > 0, "positive task with zero delay"
        reward += d / t
    return reward


@dataclass
class SlotAccounting:
    """Per-USV delay breakdown for one slot."""

    local: np.ndarray
    uav: np.ndarray
    gs: np.ndarray
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        self.total = self.local + self.uav + self.gs
