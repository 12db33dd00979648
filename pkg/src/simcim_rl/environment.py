"""RL environment around one batched SimCIM run.

All B episodes share one problem instance and advance in lockstep. Every
`agent_interval` iterations the agent nudges each episode's normalized
regularization anchor up, down, or not at all; an automatic m/N decrement is
applied at every anchor so the all-zero-action policy reproduces the linear
schedule. Between anchors p-bar is interpolated linearly. Rewards exist only
at episode end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import CouplingMatrix, batch_cut_values
from .rewards import Leaderboard, RewardConfig, assign_rewards, percentile
from .schedules import DEFAULT_P_DELTA, PBAR_MAX
from .simcim import SimCimConfig, _check_finite, _raw_step, spins_from_amplitudes
from .spectral import SpectralDecomposition, to_eigenbasis

NUM_ACTIONS = 3
# action index -> sign of the p_delta increment
ACTION_DELTA_SIGNS = np.array([1.0, 0.0, -1.0])
ZERO_ACTION = 1


@dataclass(frozen=True)
class EnvConfig:
    simcim: SimCimConfig
    agent_interval: int = 10
    p_delta: float = DEFAULT_P_DELTA
    pbar_init: float = 1.0
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if self.agent_interval < 1:
            raise ValueError("agent_interval must be positive")
        if self.simcim.iterations % self.agent_interval != 0:
            raise ValueError(
                f"iterations ({self.simcim.iterations}) must be divisible by "
                f"agent_interval ({self.agent_interval})"
            )

    @property
    def steps_per_episode(self) -> int:
        return self.simcim.iterations // self.agent_interval


@dataclass
class TrajectoryBatch:
    """Rollout of B episodes over T agent steps; rewards are terminal-only."""

    observations: np.ndarray  # (T, B, n + 2)
    actions: np.ndarray  # (T, B) int
    log_probs: np.ndarray  # (T, B)
    values: np.ndarray  # (T, B)
    terminal_rewards: np.ndarray  # (B,)
    final_cuts: np.ndarray  # (B,)
    stats: dict = field(default_factory=dict)

    @property
    def num_steps(self) -> int:
        return self.observations.shape[0]

    @property
    def batch_size(self) -> int:
        return self.observations.shape[1]

    def reward_matrix(self) -> np.ndarray:
        """(T, B) rewards: zero everywhere except the last step."""
        rewards = np.zeros((self.num_steps, self.batch_size))
        rewards[-1] = self.terminal_rewards
        return rewards


class ScheduleControlEnv:
    """Batched episode state machine: observe, act on p-bar, anneal, repeat."""

    def __init__(
        self,
        matrix: CouplingMatrix,
        decomp: SpectralDecomposition,
        config: EnvConfig,
        seed: int | np.random.Generator = 0,
    ):
        if decomp.n != matrix.n:
            raise ValueError("decomposition does not match the matrix")
        self.matrix = matrix
        self.decomp = decomp
        self.config = config
        self._rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self._lam_span = decomp.lam_max - decomp.lam_min
        self.reset()

    @property
    def observation_dim(self) -> int:
        return self.matrix.n + 2

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Zero amplitudes and momenta, p-bar anchor back to its initial value."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        cfg = self.config
        b = cfg.simcim.batch_size
        self._c = np.zeros((self.matrix.n, b))
        self._m = np.zeros_like(self._c)
        self._step_idx = 0
        self._pbar = np.full(b, cfg.pbar_init)
        # Rebased anchor bookkeeping: the anchor is offset + action_sum minus
        # an exact ((k - k0) * m) / N decrement, re-anchored whenever the clip
        # binds. This keeps the zero-action trajectory bit-equal to the linear
        # schedule instead of accumulating one rounding error per step.
        self._anchor_offset = np.full(b, cfg.pbar_init)
        self._anchor_actions = np.zeros(b)
        self._anchor_k0 = np.zeros(b, dtype=np.int64)
        self._anchor_history = [self._pbar.copy()]
        self._done = False
        return self._observe()

    def _observe(self) -> np.ndarray:
        cfg = self.config
        e = to_eigenbasis(self.decomp, self._c)  # (n, B)
        elapsed = (self._step_idx * cfg.agent_interval) / cfg.simcim.iterations
        obs = np.empty((cfg.simcim.batch_size, self.matrix.n + 2))
        obs[:, : self.matrix.n] = e.T
        obs[:, self.matrix.n] = elapsed
        obs[:, self.matrix.n + 1] = self._pbar
        return obs

    @property
    def done(self) -> bool:
        return self._done

    @property
    def anchor_history(self) -> np.ndarray:
        """(k+1, B) anchors recorded so far, including the initial one."""
        return np.stack(self._anchor_history)

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, bool]:
        """Apply per-episode actions, run one agent interval of SimCIM."""
        if self._done:
            raise RuntimeError("episode already finished; call reset()")
        cfg = self.config
        actions = np.asarray(actions)
        if actions.shape != (cfg.simcim.batch_size,):
            raise ValueError(f"expected {cfg.simcim.batch_size} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() >= NUM_ACTIONS:
            raise ValueError("action indices must be in {0, 1, 2}")

        deltas = ACTION_DELTA_SIGNS[actions] * cfg.p_delta
        k_next = self._step_idx + 1
        m, n_iter = cfg.agent_interval, cfg.simcim.iterations
        raw = (
            self._anchor_offset
            + self._anchor_actions
            + deltas
            - ((k_next - self._anchor_k0) * m) / n_iter
        )
        pbar_next = np.clip(raw, 0.0, PBAR_MAX)
        rebased = pbar_next != raw
        self._anchor_offset[rebased] = pbar_next[rebased]
        self._anchor_actions[rebased] = 0.0
        self._anchor_k0[rebased] = k_next
        self._anchor_actions[~rebased] += deltas[~rebased]

        sim = cfg.simcim
        for j in range(m):
            pbar_t = self._pbar + (j / m) * (pbar_next - self._pbar)
            p = pbar_t * self._lam_span + self.decomp.lam_min
            self._c, self._m, _ = _raw_step(
                self._c, self._m, self.matrix.j, p, sim.mu, sim.eta, sim.sigma, self._rng
            )
        _check_finite(self._c, self._step_idx * m)

        self._pbar = pbar_next
        self._anchor_history.append(pbar_next.copy())
        self._step_idx = k_next
        self._done = k_next == cfg.steps_per_episode
        return self._observe(), self._done

    def finalize(
        self,
        board: Leaderboard,
        reward_config: RewardConfig | None = None,
        insert_before: bool = True,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
        """Read out spins and cuts, update the leaderboard, assign rewards.

        With `insert_before` (the default) the batch joins the window before
        the percentile is taken. Passing False scores the batch against the
        pre-existing window instead (used by pre-training, where the window
        would otherwise be the batch itself); an empty board still
        bootstraps by insertion. Returns (spins, cuts, rewards, stats) where
        stats records the percentile threshold and the fraction of the batch
        strictly above it.
        """
        if not self._done:
            raise RuntimeError("cannot finalize an unfinished episode batch")
        cfg = reward_config if reward_config is not None else self.config.reward
        spins = spins_from_amplitudes(self._c)
        cuts = batch_cut_values(self.matrix, spins)
        if insert_before or len(board) == 0:
            board.extend(cuts)
            threshold = percentile(board, cfg.q)
            rewards = assign_rewards(cuts, board, cfg, self._rng)
        else:
            threshold = percentile(board, cfg.q)
            rewards = assign_rewards(cuts, board, cfg, self._rng)
            board.extend(cuts)
        stats = {
            "threshold": float(threshold),
            "beat_fraction": float(np.mean(cuts > threshold)),
        }
        return spins, cuts, rewards, stats

    def export_anchor_csv(self, path) -> None:
        """Anchor p-bar sequences in long form: agent_step, episode, pbar."""
        anchors = self.anchor_history
        with open(path, "w", newline="") as fh:
            fh.write("agent_step,episode,pbar\n")
            for k in range(anchors.shape[0]):
                for b in range(anchors.shape[1]):
                    fh.write(f"{k},{b},{float(anchors[k, b])!r}\n")
