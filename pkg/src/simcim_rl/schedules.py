"""Regularization schedules shared by the baselines and the RL environment.

Normalized schedules produce p-bar in [0, PBAR_MAX]; the tanh baseline
produces the raw coefficient p directly and bypasses the eigenvalue-range
normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import CouplingMatrix

PBAR_MAX = 1.05
DEFAULT_P_DELTA = 0.04


def linear_pbar(t: int, total: int) -> float:
    """p-bar decaying linearly from 1 at t=0 to 0 at t=total."""
    return 1.0 - t / total


def row_sum_norm(matrix: CouplingMatrix) -> float:
    """J_m = max_i sum_j |J_ij|, the scale used by the tanh schedule."""
    return float(np.abs(matrix.j).sum(axis=1).max())


@dataclass(frozen=True)
class TanhScheduleParams:
    """Scale O, slope S, shift D of the tanh schedule; jm is the row-sum norm."""

    o: float
    s: float
    d: float
    jm: float


def tanh_p(t: int, total: int, params: TanhScheduleParams) -> float:
    """p_t = J_m * O * (tanh(S * (t/total - 0.5)) + D); already denormalized."""
    return params.jm * params.o * (math.tanh(params.s * (t / total - 0.5)) + params.d)


def apply_action(pbar_prev: float, action: float, m: int, total: int) -> float:
    """Anchor update: add the action increment, subtract the automatic m/N
    decrement, clip once to [0, PBAR_MAX]."""
    return float(np.clip(pbar_prev + action - m / total, 0.0, PBAR_MAX))


def interpolate(pbar_prev, pbar_next, k: int, m: int):
    """Linear interpolation at iteration k in [0, m) of an agent interval."""
    if not 0 <= k < m:
        raise ValueError(f"k={k} outside [0, {m})")
    return pbar_prev + (k / m) * (pbar_next - pbar_prev)


def serialize_schedule(kind: str, **params) -> str:
    """Small key=value text block for reproducibility logs."""
    lines = [f"type={kind}"]
    for key in sorted(params):
        value = params[key]
        if isinstance(value, float):
            value = repr(float(value))
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> tuple[str, dict]:
    kind = None
    params = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        if key == "type":
            kind = value
        else:
            params[key] = float(value)
    if kind is None:
        raise ValueError("schedule text missing 'type=' line")
    return kind, params
