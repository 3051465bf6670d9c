"""Scenario sweeps: variants x scenario cells x seeds."""

from __future__ import annotations

import dataclasses
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path

from ..env import EnvConfig
from ..trainer import VARIANTS, HappoConfig, MetricsRow, Trainer
from .evaluation import evaluate
from .metrics import MetricsWriter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentSpec:
    """Sweep definition; the JSON layout of ``sweep --spec`` files.

    ``grid = "sweep"`` varies USVs at ``fixed_uavs`` and UAVs at
    ``fixed_usvs`` (two one-dimensional sweeps); ``grid = "product"`` runs
    every (USV, UAV) combination.
    """

    usv_counts: list = field(default_factory=lambda: [4, 5, 6, 7, 8])
    uav_counts: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    gs_count: int = 2
    grid: str = "sweep"
    fixed_usvs: int = 6
    fixed_uavs: int = 4
    variants: list = field(default_factory=lambda: list(VARIANTS))
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    iterations: int = 100
    eval_episodes: int = 32
    env: EnvConfig = field(default_factory=EnvConfig)
    train: HappoConfig = field(default_factory=HappoConfig)

    def __post_init__(self):
        if not self.usv_counts or not self.uav_counts:
            raise ValueError("scenario grid must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if not self.variants:
            raise ValueError("variants must not be empty")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown variants {unknown}")
        if self.grid not in ("sweep", "product"):
            raise ValueError("grid must be 'sweep' or 'product'")
        if self.iterations < 1 or self.eval_episodes < 1:
            raise ValueError("iterations and eval_episodes must be >= 1")

    def cells(self) -> list[tuple[int, int, int]]:
        if self.grid == "product":
            pairs = [(i, j) for i in self.usv_counts for j in self.uav_counts]
        else:
            pairs = [(i, self.fixed_uavs) for i in self.usv_counts]
            pairs += [(self.fixed_usvs, j) for j in self.uav_counts if (self.fixed_usvs, j) not in pairs]
        return [(i, j, self.gs_count) for i, j in pairs]


def run_cell(spec: ExperimentSpec, variant: str, cell: tuple[int, int, int], seed: int,
             train_writer: MetricsWriter, eval_writer: MetricsWriter, ckpt_dir: Path) -> MetricsRow:
    i, j, k = cell
    env_cfg = spec.env.with_counts(n_usvs=i, n_uavs=j, n_gss=k)
    cfg = dataclasses.replace(spec.train, variant=variant, iterations=spec.iterations)
    trainer = Trainer(env_cfg, cfg, seed)
    trainer.train(on_row=train_writer.append)
    trainer.save(ckpt_dir / f"{variant}_u{i}_a{j}_g{k}_s{seed}.npz")
    res = evaluate(trainer, env_cfg, spec.eval_episodes, seed)
    row = MetricsRow(variant, i, j, k, seed, spec.iterations, res.mean_reward, res.mean_delay, 0.0)
    eval_writer.append(row)
    return row


def run_experiment(spec: ExperimentSpec, out_dir: str | Path) -> dict:
    """Run the whole grid; failures are logged to ``failures.log`` and skipped."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_writer = MetricsWriter(out / "metrics.csv")
    eval_writer = MetricsWriter(out / "eval.csv")
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    done, failed = 0, []
    for cell in spec.cells():
        for variant in spec.variants:
            for seed in spec.seeds:
                try:
                    run_cell(spec, variant, cell, seed, train_writer, eval_writer, ckpt_dir)
                    done += 1
                except Exception as exc:  # one bad cell must not sink the sweep
                    log.error("cell %s %s seed %d failed: %s", cell, variant, seed, exc)
                    failed.append((cell, variant, seed))
                    with open(out / "failures.log", "a") as fh:
                        fh.write(f"{variant} {cell} seed={seed}: {exc!r}\n{traceback.format_exc()}\n")
    return {"completed": done, "failed": failed}
