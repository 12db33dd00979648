"""Actor-critic networks with FiLM conditioning, PPO updates, training loops.

The actor and critic are separate two-layer tanh MLPs over the (n + 2)-long
observation. The actor's second hidden layer is modulated feature-wise by an
affine function of the per-problem feature vector phi; the critic sees the
raw observation only. Torch supplies autograd and the optimizer; every source
of randomness (weight init, action sampling) is a numpy Generator so that
runs are reproducible from one master seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from torch import nn

from .environment import (
    NUM_ACTIONS,
    EnvConfig,
    ScheduleControlEnv,
    TrajectoryBatch,
)
from .problem import CouplingMatrix
from .rewards import Leaderboard, RewardConfig
from .schedules import DEFAULT_P_DELTA
from .seeding import component_rng, component_seed
from .simcim import LrTestParams, SimCimConfig, find_learning_rate
from .spectral import SpectralDecomposition, eigendecompose, problem_features

HIDDEN_SIZE = 256


@dataclass(frozen=True)
class PpoConfig:
    epochs: int = 4
    gamma: float = 1.0
    clip_ratio: float = 0.2
    value_weight: float = 0.5
    entropy_weight: float = 0.01
    learning_rate: float = 3e-4
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.clip_ratio <= 0:
            raise ValueError("clip_ratio must be positive")


@dataclass(frozen=True)
class TrainConfig:
    """Everything episode generation needs, minus the per-instance mu."""

    eta: float = 0.9
    sigma: float = 0.03
    iterations: int = 1000
    batch_size: int = 256
    agent_interval: int = 10
    p_delta: float = DEFAULT_P_DELTA
    pbar_init: float = 1.0
    reward: RewardConfig = field(default_factory=RewardConfig)
    hidden: int = HIDDEN_SIZE
    lr_test: LrTestParams = field(default_factory=LrTestParams)

    def simcim_config(self, mu: float) -> SimCimConfig:
        return SimCimConfig(
            mu=mu,
            eta=self.eta,
            sigma=self.sigma,
            iterations=self.iterations,
            batch_size=self.batch_size,
        )

    def env_config(self, mu: float) -> EnvConfig:
        return EnvConfig(
            simcim=self.simcim_config(mu),
            agent_interval=self.agent_interval,
            p_delta=self.p_delta,
            pbar_init=self.pbar_init,
            reward=self.reward,
        )


class AgentNetworks(nn.Module):
    """Separate actor and critic MLPs; FiLM modulates the actor only."""

    def __init__(self, n: int, hidden: int = HIDDEN_SIZE):
        super().__init__()
        self.n = n
        self.hidden = hidden
        obs_dim = n + 2
        self.actor_fc1 = nn.Linear(obs_dim, hidden)
        self.actor_fc2 = nn.Linear(hidden, hidden)
        self.actor_head = nn.Linear(hidden, NUM_ACTIONS)
        self.film = nn.Linear(n, 2 * hidden)
        self.critic_fc1 = nn.Linear(obs_dim, hidden)
        self.critic_fc2 = nn.Linear(hidden, hidden)
        self.critic_head = nn.Linear(hidden, 1)
        self.double()

    def _check_obs(self, obs: torch.Tensor) -> None:
        if obs.shape[-1] != self.n + 2:
            raise ValueError(f"expected observations of length {self.n + 2}, got {obs.shape[-1]}")

    def actor_logits(self, obs: torch.Tensor, phi: torch.Tensor) -> torch.Tensor:
        """FiLM-modulated forward pass: h2' = scale(phi) * h2 + shift(phi)."""
        self._check_obs(obs)
        if phi.shape[-1] != self.n:
            raise ValueError(f"expected phi of length {self.n}, got {phi.shape[-1]}")
        h = torch.tanh(self.actor_fc1(obs))
        h = torch.tanh(self.actor_fc2(h))
        scale, shift = torch.split(self.film(phi), self.hidden, dim=-1)
        return self.actor_head(scale * h + shift)

    def critic_value(self, obs: torch.Tensor) -> torch.Tensor:
        self._check_obs(obs)
        h = torch.tanh(self.critic_fc1(obs))
        h = torch.tanh(self.critic_fc2(h))
        return self.critic_head(h).squeeze(-1)


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def build_networks(
    n: int, hidden: int = HIDDEN_SIZE, seed: int | np.random.Generator = 0
) -> AgentNetworks:
    """Orthogonal hidden layers, near-uniform initial policy, identity FiLM."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    nets = AgentNetworks(n, hidden)
    gains = {
        "actor_fc1": np.sqrt(2.0),
        "actor_fc2": np.sqrt(2.0),
        "actor_head": 0.01,
        "critic_fc1": np.sqrt(2.0),
        "critic_fc2": np.sqrt(2.0),
        "critic_head": 1.0,
    }
    with torch.no_grad():
        for name, gain in gains.items():
            layer = getattr(nets, name)
            w = _orthogonal(rng, layer.out_features, layer.in_features, gain)
            layer.weight.copy_(torch.from_numpy(w))
            layer.bias.zero_()
        nets.film.weight.zero_()
        nets.film.bias.copy_(
            torch.from_numpy(np.concatenate([np.ones(hidden), np.zeros(hidden)]))
        )
    return nets


def _tensor(x) -> torch.Tensor:
    arr = np.asarray(x, dtype=np.float64)
    if not arr.flags.writeable:
        arr = arr.copy()
    return torch.as_tensor(arr, dtype=torch.float64)


def actor_forward(
    networks: AgentNetworks, obs: np.ndarray, phi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Action probabilities and logits for a batch of observations, no grad."""
    with torch.no_grad():
        logits = networks.actor_logits(_tensor(obs), _tensor(phi))
        probs = torch.softmax(logits, dim=-1)
    return probs.numpy(), logits.numpy()


def critic_forward(networks: AgentNetworks, obs: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        return networks.critic_value(_tensor(obs)).numpy()


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF categorical sampling, one draw per row."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])
    actions = (u[:, None] >= cdf).sum(axis=-1)
    return np.minimum(actions, probs.shape[-1] - 1)


def generate_episodes(
    networks: AgentNetworks,
    env: ScheduleControlEnv,
    phi: np.ndarray,
    rng: np.random.Generator,
    board: Leaderboard,
    reward_config: RewardConfig | None = None,
    insert_before: bool = True,
) -> TrajectoryBatch:
    """Roll one full batch of episodes with the current policy."""
    obs = env.reset()
    steps = env.config.steps_per_episode
    b = env.config.simcim.batch_size
    obs_hist = np.empty((steps, b, env.observation_dim))
    act_hist = np.empty((steps, b), dtype=np.int64)
    logp_hist = np.empty((steps, b))
    val_hist = np.empty((steps, b))
    rows = np.arange(b)
    done = False
    for t in range(steps):
        probs, _ = actor_forward(networks, obs, phi)
        actions = sample_actions(probs, rng)
        log_probs = np.log(probs[rows, actions])
        values = critic_forward(networks, obs)
        obs_hist[t] = obs
        act_hist[t] = actions
        logp_hist[t] = log_probs
        val_hist[t] = values
        obs, done = env.step(actions)
    assert done
    _, cuts, rewards, stats = env.finalize(board, reward_config, insert_before)
    return TrajectoryBatch(
        observations=obs_hist,
        actions=act_hist,
        log_probs=logp_hist,
        values=val_hist,
        terminal_rewards=rewards,
        final_cuts=cuts,
        stats=stats,
    )


def ppo_loss(
    networks: AgentNetworks,
    obs: torch.Tensor,
    phi: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    returns: torch.Tensor,
    advantages: torch.Tensor,
    config: PpoConfig,
) -> tuple[torch.Tensor, dict]:
    """Clipped-surrogate policy loss + value loss - entropy bonus."""
    logits = networks.actor_logits(obs, phi)
    log_probs_all = torch.log_softmax(logits, dim=-1)
    log_probs = log_probs_all.gather(-1, actions.unsqueeze(-1)).squeeze(-1)
    ratio = torch.exp(log_probs - old_log_probs)
    clipped = torch.clamp(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
    policy_loss = -torch.minimum(ratio * advantages, clipped * advantages).mean()
    values = networks.critic_value(obs)
    value_loss = ((values - returns) ** 2).mean()
    entropy = -(log_probs_all.exp() * log_probs_all).sum(dim=-1).mean()
    loss = policy_loss + config.value_weight * value_loss - config.entropy_weight * entropy
    parts = {
        "policy_loss": policy_loss.item(),
        "value_loss": value_loss.item(),
        "entropy": entropy.item(),
    }
    return loss, parts


def trajectory_returns(traj: TrajectoryBatch, gamma: float) -> np.ndarray:
    """(T, B) discounted returns; rewards are terminal-only, so the return at
    step t is gamma^(T-1-t) times the terminal reward (exactly the terminal
    reward at gamma = 1)."""
    steps = traj.num_steps
    powers = gamma ** np.arange(steps - 1, -1, -1, dtype=float)
    return powers[:, None] * traj.terminal_rewards[None, :]


def ppo_update(
    networks: AgentNetworks,
    optimizer: torch.optim.Optimizer,
    traj: TrajectoryBatch,
    phi: np.ndarray,
    config: PpoConfig,
) -> dict:
    """Full-batch PPO over the trajectory for config.epochs passes."""
    steps, b = traj.num_steps, traj.batch_size
    obs = _tensor(traj.observations.reshape(steps * b, -1))
    actions = torch.as_tensor(traj.actions.reshape(-1))
    old_log_probs = _tensor(traj.log_probs.reshape(-1))
    returns_np = trajectory_returns(traj, config.gamma)
    returns = _tensor(returns_np.reshape(-1))
    advantages = _tensor((returns_np - traj.values).reshape(-1))
    phi_t = _tensor(phi).reshape(1, -1)

    diagnostics: dict[str, float] = {}
    for epoch in range(config.epochs):
        loss, parts = ppo_loss(
            networks, obs, phi_t, actions, old_log_probs, returns, advantages, config
        )
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite PPO loss at epoch {epoch}: {parts}")
        optimizer.zero_grad()
        loss.backward()
        grad_norm = nn.utils.clip_grad_norm_(networks.parameters(), config.max_grad_norm)
        optimizer.step()
        diagnostics = {**parts, "loss": loss.item(), "grad_norm": grad_norm.item()}
    return diagnostics


@dataclass
class TrainResult:
    networks: AgentNetworks
    history: list[dict]
    board: Leaderboard


@dataclass
class FinetuneResult:
    networks: AgentNetworks
    history: list[dict]
    final_cuts: np.ndarray
    best_cut: float
    mu: float


def _history_entry(index: int, mu: float, traj: TrajectoryBatch, diag: dict) -> dict:
    cuts = traj.final_cuts
    return {
        "index": index,
        "mu": mu,
        "mean_reward": float(traj.terminal_rewards.mean()),
        "mean_cut": float(cuts.mean()),
        "max_cut": float(cuts.max()),
        "median_cut": float(np.median(cuts)),
        "threshold": traj.stats.get("threshold", float("nan")),
        "beat_fraction": traj.stats.get("beat_fraction", float("nan")),
        **diag,
    }


def _tuned_mu(matrix, decomp, train: TrainConfig, seed: int) -> float:
    # mu in the probe config is a placeholder; the range test sweeps its own.
    probe = train.simcim_config(mu=1.0)
    return find_learning_rate(matrix, decomp, probe, seed=seed, params=train.lr_test)


def pretrain(
    instance_sampler: Callable[[np.random.Generator], CouplingMatrix],
    num_instances: int,
    seed: int,
    train: TrainConfig = TrainConfig(),
    ppo: PpoConfig = PpoConfig(),
    networks: AgentNetworks | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = 0,
    log: Callable[[dict], None] | None = None,
) -> TrainResult:
    """One gradient update per freshly sampled instance.

    The leaderboard holds exactly one batch and persists across instances, so
    each batch is scored against the previous instance's cuts (the first
    batch bootstraps against itself). Each instance gets its own tuned mu.
    """
    rng_instances = component_rng(seed, "pretrain/instances")
    rng_actions = component_rng(seed, "pretrain/actions")
    board = Leaderboard(train.batch_size)
    optimizer = None
    history: list[dict] = []
    if networks is not None:
        optimizer = torch.optim.Adam(networks.parameters(), lr=ppo.learning_rate)
    for i in range(num_instances):
        matrix = instance_sampler(rng_instances)
        if networks is None:
            networks = build_networks(
                matrix.n, train.hidden, component_rng(seed, "pretrain/init")
            )
            optimizer = torch.optim.Adam(networks.parameters(), lr=ppo.learning_rate)
        elif networks.n != matrix.n:
            raise ValueError(
                f"networks built for n={networks.n} but instance has n={matrix.n}"
            )
        decomp = eigendecompose(matrix)
        phi = problem_features(decomp).phi
        mu = _tuned_mu(matrix, decomp, train, component_seed(seed, "pretrain/lr", i))
        env = ScheduleControlEnv(
            matrix, decomp, train.env_config(mu), seed=component_seed(seed, "pretrain/env", i)
        )
        traj = generate_episodes(
            networks, env, phi, rng_actions, board, insert_before=False
        )
        diag = ppo_update(networks, optimizer, traj, phi, ppo)
        entry = _history_entry(i, mu, traj, diag)
        history.append(entry)
        if log is not None:
            log(entry)
        if (
            checkpoint_path is not None
            and checkpoint_every > 0
            and (i + 1) % checkpoint_every == 0
        ):
            save_checkpoint(networks, checkpoint_path, extra={"instances_seen": i + 1})
    if networks is None:
        raise ValueError("num_instances=0 requires pre-built networks to return")
    return TrainResult(networks=networks, history=history, board=board)


def finetune(
    matrix: CouplingMatrix,
    num_updates: int,
    seed: int,
    train: TrainConfig = TrainConfig(),
    ppo: PpoConfig = PpoConfig(),
    networks: AgentNetworks | None = None,
    decomp: SpectralDecomposition | None = None,
    board_capacity_factor: int = 5,
    log: Callable[[dict], None] | None = None,
) -> FinetuneResult:
    """Repeated batch-generate + update on a single instance.

    The input networks are copied, never mutated, so a pre-trained agent can
    be fine-tuned on several instances from the same starting point. With
    num_updates=0 the loop is skipped and only the final evaluation batch is
    sampled (the not-fine-tuned "update 0" reference). The optimizer state
    always starts fresh.
    """
    if decomp is None:
        decomp = eigendecompose(matrix)
    if networks is None:
        networks = build_networks(matrix.n, train.hidden, component_rng(seed, "finetune/init"))
    else:
        if networks.n != matrix.n:
            raise ValueError(f"networks built for n={networks.n} but instance has n={matrix.n}")
        networks = copy.deepcopy(networks)
    phi = problem_features(decomp).phi
    mu = _tuned_mu(matrix, decomp, train, component_seed(seed, "finetune/lr"))
    board = Leaderboard(board_capacity_factor * train.batch_size)
    env = ScheduleControlEnv(
        matrix, decomp, train.env_config(mu), seed=component_seed(seed, "finetune/env")
    )
    rng_actions = component_rng(seed, "finetune/actions")
    optimizer = torch.optim.Adam(networks.parameters(), lr=ppo.learning_rate)
    history: list[dict] = []
    best_cut = -np.inf
    for u in range(num_updates):
        traj = generate_episodes(networks, env, phi, rng_actions, board)
        diag = ppo_update(networks, optimizer, traj, phi, ppo)
        best_cut = max(best_cut, float(traj.final_cuts.max()))
        entry = {**_history_entry(u, mu, traj, diag), "best_cut": best_cut}
        history.append(entry)
        if log is not None:
            log(entry)
    final = generate_episodes(networks, env, phi, rng_actions, board)
    best_cut = max(best_cut, float(final.final_cuts.max()))
    return FinetuneResult(
        networks=networks,
        history=history,
        final_cuts=final.final_cuts,
        best_cut=best_cut,
        mu=mu,
    )


def _state_arrays(networks: AgentNetworks) -> dict[str, np.ndarray]:
    return {k: v.detach().numpy() for k, v in networks.state_dict().items()}


def _content_hash(arrays: dict[str, np.ndarray]) -> str:
    digest = hashlib.sha256()
    for key in sorted(arrays):
        digest.update(key.encode())
        digest.update(str(arrays[key].shape).encode())
        digest.update(np.ascontiguousarray(arrays[key]).tobytes())
    return digest.hexdigest()


def save_checkpoint(
    networks: AgentNetworks, path: str | Path, extra: dict | None = None
) -> None:
    """Self-describing npz checkpoint: shapes, content hash, user metadata."""
    arrays = _state_arrays(networks)
    meta = {
        "n": networks.n,
        "hidden": networks.hidden,
        "shapes": {k: list(v.shape) for k, v in arrays.items()},
        "sha256": _content_hash(arrays),
        "extra": extra or {},
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: str | Path) -> tuple[AgentNetworks, dict]:
    """Rebuild networks from a checkpoint, verifying shapes and content hash."""
    with np.load(path) as data:
        meta = json.loads(str(data["__meta__"][()]))
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    for key, shape in meta["shapes"].items():
        if key not in arrays or list(arrays[key].shape) != shape:
            raise ValueError(f"checkpoint shape header mismatch for {key!r}")
    if _content_hash(arrays) != meta["sha256"]:
        raise ValueError("checkpoint content hash mismatch")
    networks = AgentNetworks(meta["n"], meta["hidden"])
    networks.load_state_dict({k: torch.from_numpy(v) for k, v in arrays.items()})
    return networks, meta["extra"]
