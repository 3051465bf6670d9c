"""Command line entry point: ``usvmec {train,eval,sweep,plot}``.

The seed of ``train`` and ``eval`` can also come from ``USVMEC_SEED``; an
explicit ``--seed`` flag wins over the environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..config import ConfigError, dump_json, load_json
from ..env import EnvConfig
from ..trainer import VARIANTS, RunConfig, Trainer
from .evaluation import evaluate
from .heuristics import KINDS, HeuristicPolicy
from .metrics import MetricsWriter
from .plotting import X_AXES, Y_AXES, emit_plot
from .runner import ExperimentSpec, run_experiment

SEED_ENV = "USVMEC_SEED"


def _resolve_seed(flag: int | None, default: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: not an integer: {env!r}") from None
    return default


def cmd_train(args) -> int:
    run = load_json(RunConfig, args.config) if args.config else RunConfig()
    train_cfg = run.train
    if args.variant:
        train_cfg = dataclasses.replace(train_cfg, variant=args.variant)
    if args.iterations:
        train_cfg = dataclasses.replace(train_cfg, iterations=args.iterations)
    seed = _resolve_seed(args.seed, run.env.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(RunConfig(env=run.env, train=train_cfg), out / "config.json")
    writer = MetricsWriter(out / "metrics.csv")
    trainer = Trainer(run.env, train_cfg, seed)
    rows = trainer.train(on_row=writer.append, checkpoint_dir=out / "checkpoints")
    last = rows[-1]
    print(f"{train_cfg.variant} seed={seed}: {len(rows)} iterations, "
          f"last mean episode reward {last.mean_episode_reward:.6g}, delay {last.mean_task_delay:.4g} s")
    return 0


def cmd_eval(args) -> int:
    if args.checkpoint is None and args.heuristic is None:
        raise ConfigError("eval: pass --checkpoint or --heuristic")
    trainer = Trainer.load(args.checkpoint) if args.checkpoint else None
    if args.scenario:
        env_cfg = load_json(EnvConfig, args.scenario)
    elif trainer is not None:
        env_cfg = trainer.env_cfg
    else:
        env_cfg = EnvConfig()
    seed = _resolve_seed(args.seed, env_cfg.seed)
    if trainer is not None:
        policy = trainer
    else:
        policy = HeuristicPolicy(args.heuristic, env_cfg, np.random.default_rng(seed))
    res = evaluate(policy, env_cfg, args.episodes, seed)
    print(json.dumps({"mean_reward": res.mean_reward, "mean_delay": res.mean_delay,
                      "episodes": args.episodes, "seed": seed}))
    return 0


def cmd_sweep(args) -> int:
    spec = load_json(ExperimentSpec, args.spec) if args.spec else ExperimentSpec()
    summary = run_experiment(spec, args.out)
    print(f"completed {summary['completed']} runs, {len(summary['failed'])} failed")
    return 1 if summary["failed"] else 0


def cmd_plot(args) -> int:
    path = emit_plot(args.metrics, args.x, args.y, args.out, usvs=args.usvs, uavs=args.uavs, gss=args.gss)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="usvmec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one variant on one scenario")
    t.add_argument("--config", help="run config JSON ({'env': ..., 'train': ...})")
    t.add_argument("--variant", choices=sorted(VARIANTS))
    t.add_argument("--seed", type=int)
    t.add_argument("--iterations", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint or a heuristic")
    e.add_argument("--checkpoint")
    e.add_argument("--heuristic", choices=KINDS)
    e.add_argument("--scenario", help="environment config JSON")
    e.add_argument("--episodes", type=int, default=32)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run a scenario x variant x seed grid")
    s.add_argument("--spec")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render an SVG chart from a metrics CSV")
    pl.add_argument("--metrics", required=True)
    pl.add_argument("--x", choices=sorted(X_AXES), default="iteration")
    pl.add_argument("--y", choices=sorted(Y_AXES), default="reward")
    pl.add_argument("--usvs", type=int)
    pl.add_argument("--uavs", type=int)
    pl.add_argument("--gss", type=int)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
