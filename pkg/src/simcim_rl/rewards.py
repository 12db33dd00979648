"""Leaderboard and the ranked terminal-reward schemes R2 and R3.

The leaderboard is a ring buffer of the most recent episode cut values; the
nearest-rank percentile over that window is the threshold both schemes
compare against. R2 pays +-1 with a random tie-break; R3 pays +q/100 above
the threshold, -(1 - q/100) below it, and splits the tie reward so the mean
reward over the window is exactly zero.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class RewardConfig:
    q: float = 99.0
    scheme: str = "r3"

    def __post_init__(self):
        if not 0.0 < self.q < 100.0:
            raise ValueError(f"percentile level must be in (0, 100), got {self.q}")
        if self.scheme not in ("r2", "r3"):
            raise ValueError(f"unknown reward scheme {self.scheme!r}")


class Leaderboard:
    """Ring buffer of the last `capacity` episode cut values (oldest evicted)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._values = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._values)

    def add(self, value: float) -> None:
        self._values.append(float(value))

    def extend(self, values) -> None:
        for v in values:
            self._values.append(float(v))

    def values(self) -> np.ndarray:
        return np.array(self._values, dtype=float)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "cut"])
            writer.writerows(enumerate(self._values))


def percentile(board: Leaderboard, q: float) -> float:
    """Nearest-rank percentile: the ceil(q/100 * len)-th smallest value.

    No interpolation, so the threshold is always an actual window entry and
    the tie branch of the reward schemes stays reachable.
    """
    if len(board) == 0:
        raise ValueError("percentile of an empty leaderboard")
    values = np.sort(board.values())
    rank = max(1, math.ceil(q / 100.0 * len(values)))
    return float(values[rank - 1])


def r2_reward(cut: float, threshold: float, rng: np.random.Generator) -> float:
    if cut > threshold:
        return 1.0
    if cut < threshold:
        return -1.0
    return 1.0 if rng.random() < 0.5 else -1.0


def r2_rewards(batch_cuts, board: Leaderboard, q: float, rng: np.random.Generator) -> np.ndarray:
    cuts = np.asarray(batch_cuts, dtype=float)
    threshold = percentile(board, q)
    rewards = np.where(cuts > threshold, 1.0, -1.0)
    ties = cuts == threshold
    rewards[ties] = np.where(rng.random(int(ties.sum())) < 0.5, 1.0, -1.0)
    return rewards


def r3_rewards(batch_cuts, board: Leaderboard, q: float) -> np.ndarray:
    """Rescaled ranked rewards for a batch against the leaderboard window.

    The tie reward is set from the window's above/below/tie counts so that
    the mean reward over the window is zero; episodes above the percentile
    therefore keep a strictly larger reward than ties.
    """
    cuts = np.asarray(batch_cuts, dtype=float)
    window = board.values()
    threshold = percentile(board, q)
    q_frac = q / 100.0
    n_above = int((window > threshold).sum())
    n_below = int((window < threshold).sum())
    n_tie = len(window) - n_above - n_below
    tie_reward = (n_below * (1.0 - q_frac) - n_above * q_frac) / n_tie if n_tie else 0.0
    return np.where(cuts > threshold, q_frac, np.where(cuts < threshold, -(1.0 - q_frac), tie_reward))


def assign_rewards(
    batch_cuts,
    board: Leaderboard,
    config: RewardConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Dispatch to the configured scheme against the board's current window."""
    if config.scheme == "r3":
        return r3_rewards(batch_cuts, board, config.q)
    if rng is None:
        raise ValueError("R2 needs an rng for tie-breaking")
    return r2_rewards(batch_cuts, board, config.q, rng)
