"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a verdict line that the session summary prints.
"""

import dataclasses
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from usvmec import autodiff as ad
from usvmec.autodiff import Tensor, finite_diff_check
from usvmec.config import to_dict
from usvmec.env import EnvConfig, UavAction, UsvAction, UsvMecEnv
from usvmec.experiments import cli
from usvmec.experiments.evaluation import evaluate
from usvmec.experiments.heuristics import HeuristicPolicy
from usvmec.nets import d_loss, g_adv_loss
from usvmec.trainer import (HappoConfig, RunConfig, Trainer, compute_gae, happo_agent_update,
                            happo_clip_objective, normalize, update_m_factor)
from usvmec.workload import (ComputeConfig, OffloadDecision, QueueState, Task, delay_gs, delay_local,
                             delay_uav, slot_reward, update_queues)


def record(number: int, name: str, passed: bool, detail: str):
    ACCEPTANCE_RESULTS.append((number, name, bool(passed), detail))
    print(f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")
    assert passed, detail


# 1 ----------------------------------------------------------------------------

def test_01_training_determinism(tmp_path):
    env = EnvConfig(horizon=20)
    train = HappoConfig(variant="GAI-HAPPO", iterations=10, batch_episodes=2, record_wall_clock=False)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(to_dict(RunConfig(env=env, train=train))))
    start = time.perf_counter()
    for name in ("a", "b"):
        assert cli.main(["train", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / name)]) == 0
    elapsed = time.perf_counter() - start
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    b = (tmp_path / "b" / "metrics.csv").read_bytes()
    rows = a.count(b"\n") - 1
    record(1, "training determinism", a == b and rows == 10 and elapsed < 120,
           f"metrics identical={a == b}, rows={rows}, two runs in {elapsed:.1f}s (limit 120s)")


# 2 ----------------------------------------------------------------------------

def _weighted(out):
    w = np.random.default_rng(99).uniform(0.5, 1.5, size=out.shape)
    return ad.sum(ad.mul(out, Tensor(w)))


def _cases(rng):
    m, k, n = (int(v) for v in rng.integers(1, 5, size=3))
    A, B, X, Y = rng.normal(size=(m, k)), rng.normal(size=(k, n)), rng.normal(size=(m, n)), rng.normal(size=(m, n))
    away = rng.choice([-1.0, 1.0], size=(m, n)) * rng.uniform(0.1, 2.0, size=(m, n))
    pos = rng.uniform(0.5, 2.0, size=(m, n))
    heads, tokens, dh = int(rng.integers(1, 3)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
    QKV = rng.normal(size=(3, 2, heads, tokens, dh))

    def attention(x):
        q, kk, v = (ad.index(x, i) for i in range(3))
        return _weighted(ad.scaled_dot_attention(q, kk, v))

    return {
        "matmul": (A, lambda x: _weighted(ad.matmul(x, Tensor(B)))),
        "add": (X, lambda x: _weighted(ad.add(x, Tensor(Y)))),
        "sub": (X, lambda x: _weighted(ad.sub(Tensor(Y), x))),
        "mul": (X, lambda x: _weighted(ad.mul(x, x))),
        "tanh": (X, lambda x: _weighted(ad.tanh(x))),
        "relu": (away, lambda x: _weighted(ad.relu(x))),
        "exp": (X, lambda x: _weighted(ad.exp(x))),
        "log": (pos, lambda x: _weighted(ad.log(x))),
        "sigmoid": (X, lambda x: _weighted(ad.sigmoid(x))),
        "sum": (X, lambda x: _weighted(ad.sum(x, axis=0))),
        "mean": (X, lambda x: _weighted(ad.mean(x, axis=-1))),
        "softmax": (X, lambda x: _weighted(ad.softmax(x))),
        "log_softmax": (X, lambda x: _weighted(ad.log_softmax(x))),
        "mse": (X, lambda x: ad.mse(x, Tensor(Y))),
        "reshape+transpose": (X, lambda x: _weighted(ad.transpose(ad.reshape(x, (n, m))))),
        "concat": (X, lambda x: _weighted(ad.concat([x, Tensor(Y)], axis=0))),
        "attention block": (QKV, attention),
    }


def test_02_autodiff_finite_differences():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst: dict[str, float] = {}
    for _ in range(100):
        for name, (point, f) in _cases(rng).items():
            worst[name] = max(worst.get(name, 0.0), finite_diff_check(f, point))
    elapsed = time.perf_counter() - start
    top = max(worst, key=worst.get)
    record(2, "autodiff finite differences", worst[top] < 1e-4 and elapsed < 60,
           f"100 cases x {len(worst)} primitives, max rel err {worst[top]:.2e} ({top}), {elapsed:.1f}s")


# 3 ----------------------------------------------------------------------------

def test_03_gae_brute_force():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        r, v = rng.normal(size=10), rng.normal(size=11)
        d = np.zeros(10)
        d[-1] = 1.0
        g, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
        adv, _ = compute_gae(r, v, d, g, lam)
        oracle = np.zeros(10)
        for t in range(10):
            for u in range(t, 10):
                nonterminal = 1.0 - d[u]
                delta = r[u] + g * v[u + 1] * nonterminal - v[u]
                oracle[t] += (g * lam) ** (u - t) * delta
        worst = max(worst, float(np.max(np.abs(adv - oracle))))
    record(3, "GAE against brute force", worst <= 1e-10, f"200 rollouts, max abs err {worst:.1e}")


# 4 ----------------------------------------------------------------------------

def test_04_clip_objective():
    m = np.array([0.7, -1.3, 2.2])
    c1 = happo_clip_objective(np.ones(3), m, 0.2).item() == np.mean(m)
    c2 = happo_clip_objective(np.array([2.0]), np.array([1.0]), 0.2).item() == 1.2
    c3 = happo_clip_objective(np.array([0.5]), np.array([-1.0]), 0.2).item() == -0.8
    # gradient at ratio 1 through a real policy: compare with the unclipped surrogate mean(ratio * M)
    env = EnvConfig(n_usvs=2, n_uavs=1, n_gss=1)
    actor = Trainer(env, HappoConfig(variant="GAI-HAPPO"), 0).policy.actors[0]
    rng = np.random.default_rng(4)
    obs = rng.normal(size=(16, env.obs_dim)) * 0.3
    with ad.no_grad():
        raw = actor(obs).sample(rng)
        old = actor(obs).log_prob(raw).data
    adv = rng.normal(size=16)

    def grads(clipped: bool):
        actor.zero_grad()
        ratio = ad.exp(ad.sub(actor(obs).log_prob(raw), Tensor(old)))
        obj = happo_clip_objective(ratio, adv, 0.2) if clipped else ad.mean(ad.mul(ratio, Tensor(adv)))
        obj.backward()
        return np.concatenate([p.grad.ravel() for p in actor.parameters()])

    diff = float(np.max(np.abs(grads(True) - grads(False))))
    ok = c1 and c2 and c3 and diff <= 1e-8
    record(4, "clip objective", ok, f"cases exact={c1 and c2 and c3}, grad diff at ratio 1 = {diff:.1e}")


# 5 ----------------------------------------------------------------------------

def test_05_m_factor_chain():
    env = EnvConfig(n_usvs=2, n_uavs=1, n_gss=1)
    rng = np.random.default_rng(5)
    n = 64
    errs = []
    lr_zero_ok = True
    for lr in (3e-3, 0.0):
        trainer = Trainer(env, HappoConfig(variant="HAPPO", actor_lr=lr, epochs=2), 1)
        actors = trainer.policy.actors
        obs = rng.normal(size=(n, 3, env.obs_dim)) * 0.3
        raws, old = [], []
        with ad.no_grad():
            for a, actor in enumerate(actors):
                dist = actor(obs[:, a])
                raws.append(dist.sample(rng))
                old.append(dist.log_prob(raws[-1]).data)
        adv = normalize(rng.normal(size=n))
        m = adv.copy()
        order = [2, 0, 1]
        updated = []
        for a in order:
            new = happo_agent_update(actors[a], trainer.actor_opts[a], obs[:, a], raws[a], old[a], m,
                                     trainer.cfg, rng)
            m = update_m_factor(m, new, old[a])
            updated.append(a)
            # direct form: joint ratio of every agent updated so far, times the advantage
            with ad.no_grad():
                joint = sum(actors[b](obs[:, b]).log_prob(raws[b]).data - old[b] for b in updated)
            direct = np.exp(joint) * adv
            errs.append(float(np.max(np.abs(m - direct) / np.maximum(np.abs(direct), 1.0))))
            if lr == 0.0:
                lr_zero_ok &= bool(np.array_equal(m, adv))
    worst = max(errs)
    record(5, "M-factor chain", worst <= 1e-12 and lr_zero_ok,
           f"3-agent incremental vs direct max err {worst:.1e}; lr=0 keeps M == A: {lr_zero_ok}")


# 6 ----------------------------------------------------------------------------

def test_06_environment_invariants():
    cfg = EnvConfig(n_usvs=6, n_uavs=4, n_gss=2, horizon=50)
    env = UsvMecEnv(cfg, seed=6)
    rng = np.random.default_rng(6)
    I, J, K = cfg.n_usvs, cfg.n_uavs, cfg.n_gss
    steps, violations = 100_000, []
    start = time.perf_counter()
    done = True
    for step in range(steps):
        if done:
            env.reset(seed=int(rng.integers(2**63)))
        uav = rng.integers(0, J + 1, size=I)
        gs = rng.integers(0, K + 1, size=I)
        split = rng.dirichlet(np.ones(3), size=I)
        theta = rng.uniform(0, 2 * math.pi, size=J)
        k = rng.uniform(0, cfg.area.k_max, size=J)
        acts = [UsvAction(None if uav[i] == 0 else int(uav[i]) - 1, None if gs[i] == 0 else int(gs[i]) - 1,
                          tuple(split[i])) for i in range(I)]
        acts += [UavAction(float(theta[j]), float(k[j])) for j in range(J)]
        out = env.step(acts)
        done = out.done
        s = env.state
        q = s.queues
        if min(q.usv.min(), q.uav.min(), q.gs.min()) < 0:
            violations.append((step, "negative queue"))
        pos = np.concatenate([s.usv_pos, s.uav_pos])
        if pos[:, 0].min() < 0 or pos[:, 0].max() > cfg.area.x_max or pos[:, 1].min() < 0 \
                or pos[:, 1].max() > cfg.area.y_max or np.any(s.uav_pos[:, 2] != cfg.area.uav_altitude):
            violations.append((step, "out of area"))
        for dec in out.info["decisions"]:
            shares = (dec.alpha, dec.beta, dec.gamma)
            if min(shares) < 0 or abs(sum(shares) - 1.0) > 1e-9 or (dec.uav is None and dec.beta) \
                    or (dec.gs is None and dec.gamma):
                violations.append((step, "simplex"))
        sizes, delays = out.info["data_sizes"], out.info["delays"]
        mask = sizes > 0
        recomputed = float(np.sum(sizes[mask] / delays[mask]))
        if not math.isclose(recomputed, out.reward, rel_tol=1e-12, abs_tol=0.0):
            violations.append((step, "reward"))
    elapsed = time.perf_counter() - start
    record(6, "environment invariants", not violations and elapsed < 60,
           f"{steps} random steps on (6, 4, 2), {len(violations)} violations, {elapsed:.1f}s (limit 60s)")


# 7 ----------------------------------------------------------------------------

def test_07_formula_spot_checks():
    c, f = Fraction(270), Fraction(10**9)
    results = {}
    cfg = ComputeConfig(f_usv=1e9, cycles_per_bit=270.0, slot_duration=1.0)
    q = update_queues(QueueState(np.array([5e6]), np.zeros(1), np.zeros(1)),
                      [OffloadDecision(None, None, 1.0, 0.0, 0.0)], [Task(1e6, 270.0)], cfg)
    results["queue"] = q.usv[0] == float(max(Fraction(0), 6 * 10**6 - f / c))
    task = Task(1e6, 270.0)
    local = OffloadDecision(None, None, 1.0, 0.0, 0.0)
    results["local"] = delay_local(0.0, local, task, 1e9) == float(Fraction(10**6) * c / f)
    results["backlog"] = delay_local(1e6, OffloadDecision(None, None, 0.0, 0.0, 1.0), task, 1e9) == \
        float(Fraction(10**6) * c / f)
    half = OffloadDecision(0, None, 0.5, 0.5, 0.0)
    results["uav"] = delay_uav(0.0, half, task, 1e6, 1e9) == float(Fraction(1, 2) + Fraction(135, 1000))
    gs = OffloadDecision(None, 0, 0.0, 0.0, 1.0)
    results["gs"] = delay_gs(0.0, gs, task, 2e6, 2e10) == float(Fraction(1, 2) + Fraction(135, 10000))
    results["reward1"] = slot_reward([1e6], [2.0]) == float(Fraction(10**6, 2))
    results["reward2"] = slot_reward([1e6, 2e6], [2.0, 4.0]) == float(Fraction(10**6))
    results["reward0"] = slot_reward([0.0, 0.0], [0.0, 0.0]) == 0.0
    bad = [k for k, v in results.items() if not v]
    record(7, "formula spot-checks", not bad, f"{len(results) - len(bad)}/{len(results)} exact matches {bad or ''}")


# 8 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_08_learning_smoke():
    env = EnvConfig(n_usvs=2, n_uavs=1, n_gss=1, horizon=40)
    cfg = HappoConfig(variant="GAI-HAPPO", iterations=300, record_wall_clock=False)
    start = time.perf_counter()
    ratios, initial = [], []
    for seed in (0, 1, 2):
        trainer = Trainer(env, cfg, seed)
        baseline = evaluate(HeuristicPolicy("random", env, np.random.default_rng(seed)), env, 32, seed)
        initial.append(evaluate(trainer, env, 32, seed).mean_reward / baseline.mean_reward)
        trainer.train()
        ratios.append(evaluate(trainer, env, 32, seed).mean_reward / baseline.mean_reward)
    elapsed = time.perf_counter() - start
    wins = sum(r >= 1.2 for r in ratios)
    record(8, "learning smoke test", wins >= 2,
           f"trained/random = {', '.join(f'{r:.2f}' for r in ratios)} (untrained "
           f"{', '.join(f'{r:.2f}' for r in initial)}), {wins}/3 seeds >= 1.2, {elapsed:.0f}s")


# 9 ----------------------------------------------------------------------------

def test_09_ablation_wiring():
    env = EnvConfig(n_usvs=2, n_uavs=1, n_gss=1, horizon=20)
    base = HappoConfig(iterations=5, record_wall_clock=False)
    happo = Trainer(env, dataclasses.replace(base, variant="HAPPO"), 11).train()
    ablated = Trainer(env, dataclasses.replace(base, variant="GAI-HAPPO", actor_kind="mlp", lambda_adv=0.0),
                      11).train()

    def lines(rows):
        # the variant label is the only column allowed to differ
        return [",".join(repr(v) for v in r.as_tuple()[1:]).encode() for r in rows]

    same = lines(happo) == lines(ablated)
    record(9, "ablation wiring", same, f"GAI-HAPPO(mlp actor, lambda_adv=0) vs HAPPO, 5 iterations: "
                                       f"byte-identical rows={same}")


# 10 ---------------------------------------------------------------------------

def test_10_gan_loss_values():
    s = np.zeros((8, 4))
    half = lambda states, values: ad.add(ad.mul(ad.as_tensor(values), 0.0), 0.5)  # noqa: E731
    ld = d_loss(half, s, np.ones(8), -np.ones(8)).item()
    lg = g_adv_loss(half, s, np.ones(8)).item()
    ok = abs(ld - 2 * math.log(2)) <= 1e-9 and abs(lg - math.log(0.5)) <= 1e-9
    record(10, "GAN loss values", ok, f"d_loss={ld:.12f} (2 ln 2), g_adv_loss={lg:.12f} (ln 0.5)")
