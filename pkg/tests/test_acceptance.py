"""End-to-end acceptance checks, one test per shipped claim.

Each test prints a single [criterion N] PASS/FAIL line (visible even under
-q) and then asserts. The two G1 checks need the instance file on disk; when
it is absent (no bundled copy, offline environment) they report SKIP and
point at scripts/fetch_gset.py.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from simcim_rl import (
    CmaesConfig,
    EnvConfig,
    Leaderboard,
    PpoConfig,
    ScheduleControlEnv,
    SimCimConfig,
    TrainConfig,
    brute_force_max_cut,
    build_networks,
    cmaes_minimize,
    eigendecompose,
    find_learning_rate,
    finetune,
    generate_erdos_renyi,
    linear_pbar,
    parse_gset,
    ppo_loss,
    pretrain,
    r3_rewards,
    run_batch,
    tune_tanh,
)
from simcim_rl.environment import ZERO_ACTION

PRETRAIN_SEED = 2026
HELD_OUT_SEED = 1000


def _verdict(capsys, number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    line = f"[criterion {number}] {name}: {status}"
    if detail:
        line += f" ({detail})"
    with capsys.disabled():
        print(f"\n{line}", flush=True)
    assert passed, line


def _skip(capsys, number, name, reason):
    with capsys.disabled():
        print(f"\n[criterion {number}] {name}: SKIP ({reason})", flush=True)
    pytest.skip(reason)


def _find_g1():
    candidates = []
    env_dir = os.environ.get("SIMCIM_RL_GSET_DIR")
    if env_dir:
        candidates += [Path(env_dir) / "G1", Path(env_dir) / "G1.txt"]
    repo = Path(__file__).resolve().parents[1]
    candidates += [repo / "data" / "gset" / "G1", repo / "data" / "gset" / "G1.txt"]
    for path in candidates:
        if path.exists():
            return path
    return None


G1_REASON = (
    "G1 instance file not available in this offline environment; "
    "fetch it with scripts/fetch_gset.py and set SIMCIM_RL_GSET_DIR"
)


@pytest.fixture(scope="session")
def pretrained():
    """Shared 300-instance pretraining run (criteria 6 and 7)."""
    train = TrainConfig(batch_size=64)

    def sampler(rng):
        return generate_erdos_renyi(60, 0.06, seed=rng)

    start = time.monotonic()
    result = pretrain(sampler, 300, seed=PRETRAIN_SEED, train=train)
    return result, time.monotonic() - start


def test_criterion_1_small_instances_match_brute_force(capsys):
    start = time.monotonic()
    solved = 0
    for i in range(50):
        matrix = generate_erdos_renyi(16, 0.3, seed=i)
        decomp = eigendecompose(matrix)
        probe = SimCimConfig(mu=1.0, batch_size=256)
        mu = find_learning_rate(matrix, decomp, probe, seed=i)
        config = SimCimConfig(mu=mu, batch_size=256)
        _, _, cuts = run_batch(
            matrix,
            decomp,
            lambda t: linear_pbar(t, config.iterations),
            config,
            seed=10_000 + i,
        )
        _, best = brute_force_max_cut(matrix)
        solved += cuts.max() == best
    elapsed = time.monotonic() - start
    passed = solved >= 45 and elapsed < 120.0
    _verdict(
        capsys, 1, "linear schedule finds brute-force optima",
        passed, f"{solved}/50 solved in {elapsed:.0f}s",
    )


def test_criterion_2_g1_linear_schedule_quality(capsys):
    path = _find_g1()
    if path is None:
        _skip(capsys, 2, "G1 linear-schedule quality", G1_REASON)
    start = time.monotonic()
    instance = parse_gset(path.read_text(), name="G1", best_known_cut=11624)
    decomp = eigendecompose(instance.matrix)
    probe = SimCimConfig(mu=1.0, batch_size=256)
    mu = find_learning_rate(instance.matrix, decomp, probe, seed=0)
    config = SimCimConfig(mu=mu, batch_size=256)
    best = -np.inf
    for b in range(30):
        _, _, cuts = run_batch(
            instance.matrix,
            decomp,
            lambda t: linear_pbar(t, config.iterations),
            config,
            seed=20_000 + b,
        )
        best = max(best, float(cuts.max()))
    elapsed = time.monotonic() - start
    passed = best >= 0.998 * 11624 and elapsed < 1200.0
    _verdict(
        capsys, 2, "G1 linear-schedule quality",
        passed, f"best {best:.0f} = {best / 11624:.5f} of 11624 in {elapsed:.0f}s",
    )


def test_criterion_3_r3_window_mean_is_zero(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        size = int(rng.integers(1, 500))
        values = rng.integers(0, 30, size=size).astype(float)
        board = Leaderboard(size)
        board.extend(values)
        q = float(rng.uniform(1.0, 99.9))
        rewards = r3_rewards(values, board, q)
        worst = max(worst, abs(float(rewards.mean())))
    passed = worst <= 1e-9
    _verdict(
        capsys, 3, "R3 rewards average to zero over the window",
        passed, f"worst |mean| = {worst:.2e} over 1000 boards",
    )


def test_criterion_4_g1_eigendecomposition(capsys):
    path = _find_g1()
    if path is None:
        _skip(capsys, 4, "G1 eigendecomposition accuracy", G1_REASON)
    instance = parse_gset(path.read_text(), name="G1", best_known_cut=11624)
    j = instance.matrix.j
    decomp = eigendecompose(instance.matrix)
    recon = decomp.q @ np.diag(decomp.lam) @ decomp.q.T
    rel = np.linalg.norm(recon - j) / np.linalg.norm(j)
    ortho = np.abs(decomp.q.T @ decomp.q - np.eye(instance.matrix.n)).max()
    passed = rel <= 1e-8 and ortho <= 1e-8
    _verdict(
        capsys, 4, "G1 eigendecomposition accuracy",
        passed, f"reconstruction {rel:.2e}, orthogonality {ortho:.2e}",
    )


def test_criterion_5_ppo_gradients_match_finite_differences(capsys):
    rng = np.random.default_rng(5)
    worst = 0.0
    shapes = []
    for _ in range(3):
        n = int(rng.integers(3, 7))
        hidden = int(rng.integers(4, 13))
        count = int(rng.integers(4, 13))
        shapes.append((n, hidden, count))
        nets = build_networks(n, hidden=hidden, seed=rng)
        obs = torch.as_tensor(rng.standard_normal((count, n + 2)))
        phi = torch.as_tensor(rng.random(n))
        actions = torch.as_tensor(rng.integers(0, 3, size=count))
        with torch.no_grad():
            logits = nets.actor_logits(obs, phi)
            logp = (
                torch.log_softmax(logits, dim=-1)
                .gather(-1, actions.unsqueeze(-1))
                .squeeze(-1)
            )
        old_logp = logp + torch.as_tensor(rng.uniform(-0.05, 0.05, size=count))
        returns = torch.as_tensor(rng.standard_normal(count))
        advantages = torch.as_tensor(rng.standard_normal(count))
        cfg = PpoConfig()

        def loss_value():
            loss, _ = ppo_loss(nets, obs, phi, actions, old_logp, returns, advantages, cfg)
            return loss

        nets.zero_grad()
        loss_value().backward()
        analytic = parameters_to_vector([p.grad for p in nets.parameters()]).numpy()
        base = parameters_to_vector(nets.parameters()).detach().clone()
        eps = 1e-6
        numeric = np.empty_like(analytic)
        for i in range(len(base)):
            plus, minus = base.clone(), base.clone()
            plus[i] += eps
            minus[i] -= eps
            with torch.no_grad():
                vector_to_parameters(plus, nets.parameters())
            hi = loss_value().item()
            with torch.no_grad():
                vector_to_parameters(minus, nets.parameters())
            lo = loss_value().item()
            numeric[i] = (hi - lo) / (2 * eps)
        with torch.no_grad():
            vector_to_parameters(base, nets.parameters())
        rel = np.linalg.norm(numeric - analytic) / max(
            np.linalg.norm(numeric), np.linalg.norm(analytic)
        )
        worst = max(worst, rel)
    passed = worst <= 1e-4
    _verdict(
        capsys, 5, "PPO gradients match finite differences",
        passed, f"worst relative error {worst:.2e} over shapes {shapes}",
    )


def test_criterion_6_pretraining_learns(pretrained, capsys):
    result, elapsed = pretrained
    rewards = np.array([h["mean_reward"] for h in result.history])
    beats = np.array([h["beat_fraction"] for h in result.history])
    first, last = rewards[:50].mean(), rewards[-50:].mean()
    slope = float(np.polyfit(np.arange(len(beats)), beats, 1)[0])
    passed = last > first and slope > 0.0 and elapsed < 1800.0
    _verdict(
        capsys, 6, "pretraining improves rewards and beat fraction",
        passed,
        f"mean reward {first:+.4f} -> {last:+.4f}, beat slope {slope:+.5f}, {elapsed:.0f}s",
    )


def test_criterion_7_finetuning_beats_agent_zero(pretrained, capsys):
    result, _ = pretrained
    held_out = generate_erdos_renyi(60, 0.06, seed=HELD_OUT_SEED)
    train = TrainConfig(batch_size=64)
    agent0 = finetune(held_out, 0, seed=7, train=train, networks=result.networks)
    agent100 = finetune(held_out, 100, seed=7, train=train, networks=result.networks)
    median0 = float(np.median(agent0.final_cuts))
    median100 = float(np.median(agent100.final_cuts))
    passed = median100 > median0
    _verdict(
        capsys, 7, "100 fine-tune updates beat Agent-0",
        passed, f"median {median0:.1f} -> {median100:.1f}",
    )


def test_criterion_8_cmaes_and_tanh_tuning(capsys):
    def corner_sphere(x):
        return float(np.sum(x**2))

    def interior_sphere(x):
        return float(np.sum((x - 0.4) ** 2))

    _, corner_best, _ = cmaes_minimize(corner_sphere, dim=3, seed=8)
    _, interior_best, _ = cmaes_minimize(interior_sphere, dim=3, seed=8)
    sphere_ok = corner_best <= 1e-6 and interior_best <= 1e-6

    matrix = generate_erdos_renyi(16, 0.3, seed=0)
    decomp = eigendecompose(matrix)
    probe = SimCimConfig(mu=1.0, batch_size=256)
    mu = find_learning_rate(matrix, decomp, probe, seed=0)
    _, stats, _ = tune_tanh(matrix, decomp, SimCimConfig(mu=mu, batch_size=256), seed=0)
    _, best = brute_force_max_cut(matrix)
    tanh_ok = stats["max_cut"] == best

    passed = sphere_ok and tanh_ok
    _verdict(
        capsys, 8, "CMA-ES solves the sphere and tunes the tanh schedule",
        passed,
        f"sphere best {max(corner_best, interior_best):.1e}, "
        f"tuned batch {stats['max_cut']:.0f} vs optimum {best:.0f}",
    )


def test_criterion_9_zero_action_agent_equals_linear_schedule(capsys):
    matrix = generate_erdos_renyi(16, 0.3, seed=0)
    config = EnvConfig(simcim=SimCimConfig(mu=0.05, batch_size=4))
    env = ScheduleControlEnv(matrix, eigendecompose(matrix), config, seed=0)
    env.reset()
    done = False
    while not done:
        _, done = env.step(np.full(4, ZERO_ACTION, dtype=int))
    anchors = env.anchor_history
    expected = np.array(
        [linear_pbar(k * config.agent_interval, config.simcim.iterations) for k in range(anchors.shape[0])]
    )
    exact = bool(np.all(anchors == expected[:, None]))
    _verdict(
        capsys, 9, "zero-action agent reproduces the linear schedule exactly",
        exact, f"{anchors.shape[0]} anchors bit-identical" if exact else "anchor drift detected",
    )
