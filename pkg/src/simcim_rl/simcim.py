"""Batched SimCIM engine.

Relaxes the Ising problem to amplitudes c in [-1, 1]^n and descends the
regularized quadratic loss with noisy momentum steps; an amplitude update is
blocked when it would leave [-1, 1] but the momentum accumulator keeps it.
The whole batch advances in lockstep so the per-iteration cost is one
matrix-matrix product J @ c.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .problem import CouplingMatrix, batch_cut_values
from .schedules import linear_pbar
from .spectral import SpectralDecomposition, denormalize_regularization, matrix_content_hash

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Non-finite amplitudes appeared during iteration."""


@dataclass(frozen=True)
class SimCimConfig:
    mu: float
    eta: float = 0.9
    sigma: float = 0.03
    iterations: int = 1000
    batch_size: int = 256

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"learning rate must be positive, got {self.mu}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.eta}")
        if self.sigma < 0:
            raise ValueError(f"noise amplitude must be nonnegative, got {self.sigma}")
        if self.iterations < 0 or self.batch_size < 1:
            raise ValueError("iterations must be >= 0 and batch_size >= 1")


@dataclass
class SimCimBatchState:
    """Amplitudes c and momentum m, both (n, B); t counts completed steps."""

    c: np.ndarray
    m: np.ndarray
    t: int = 0


def init_state(n: int, batch_size: int) -> SimCimBatchState:
    return SimCimBatchState(c=np.zeros((n, batch_size)), m=np.zeros((n, batch_size)), t=0)


def _raw_step(c, m, j, p, mu, eta, sigma, rng):
    """One momentum step; p and mu may be scalars or per-column vectors."""
    grad = mu * (j @ c - p * c)
    if sigma:
        grad += sigma * rng.standard_normal(c.shape)
    m_next = eta * m + (1.0 - eta) * grad
    proposed = c + m_next
    c_next = np.where(np.abs(proposed) <= 1.0, proposed, c)
    return c_next, m_next, grad


def step(
    state: SimCimBatchState,
    matrix: CouplingMatrix,
    p: float | np.ndarray,
    config: SimCimConfig,
    rng: np.random.Generator,
) -> SimCimBatchState:
    """Advance the batch by one iteration at regularization p (scalar or (B,))."""
    c_next, m_next, _ = _raw_step(
        state.c, state.m, matrix.j, p, config.mu, config.eta, config.sigma, rng
    )
    _check_finite(c_next, state.t)
    assert np.abs(c_next).max() <= 1.0
    return SimCimBatchState(c=c_next, m=m_next, t=state.t + 1)


def _check_finite(c: np.ndarray, t: int) -> None:
    if not np.isfinite(c).all():
        bad = int(np.argwhere(~np.isfinite(c).all(axis=0))[0, 0])
        raise DivergenceError(f"non-finite amplitude at iteration {t}, batch column {bad}")


def spins_from_amplitudes(c: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) := +1."""
    return np.where(c >= 0.0, 1.0, -1.0)


def run_batch(
    matrix: CouplingMatrix,
    decomp: SpectralDecomposition,
    schedule,
    config: SimCimConfig,
    seed: int | np.random.Generator,
    normalized: bool = True,
    trace: list | None = None,
    trace_every: int = 1,
) -> tuple[SimCimBatchState, np.ndarray, np.ndarray]:
    """Run a full annealing cycle and read out spins and cut values.

    `schedule(t)` yields p-bar for iteration t when `normalized` (mapped to p
    through the eigenvalue range), or the raw coefficient p otherwise.
    Deterministic for a fixed seed. When `trace` is given, rows
    (t, pbar_or_p, mean amplitude norm, best cut so far) are appended every
    `trace_every` iterations.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    j = matrix.j
    c = np.zeros((matrix.n, config.batch_size))
    m = np.zeros_like(c)
    best_cut = -np.inf
    for t in range(config.iterations):
        sched_value = schedule(t)
        p = denormalize_regularization(sched_value, decomp) if normalized else sched_value
        c, m, _ = _raw_step(c, m, j, p, config.mu, config.eta, config.sigma, rng)
        _check_finite(c, t)
        if trace is not None and t % trace_every == 0:
            cuts_now = batch_cut_values(matrix, spins_from_amplitudes(c))
            best_cut = max(best_cut, float(cuts_now.max()))
            trace.append((t, float(sched_value), float(np.linalg.norm(c, axis=0).mean()), best_cut))
    state = SimCimBatchState(c=c, m=m, t=config.iterations)
    spins = spins_from_amplitudes(c)
    cuts = batch_cut_values(matrix, spins)
    return state, spins, cuts


@dataclass(frozen=True)
class LrTestParams:
    mu_start: float = 1.0
    mu_end: float = 1e-5
    ema_decay: float = 0.9
    rel_tol: float = 0.01
    patience: int = 10
    fallback_mu: float = 0.02


_LR_CACHE: dict[tuple, float] = {}


def find_learning_rate(
    matrix: CouplingMatrix,
    decomp: SpectralDecomposition,
    config: SimCimConfig,
    seed: int,
    params: LrTestParams = LrTestParams(),
    trace: list | None = None,
    use_cache: bool = True,
) -> float:
    """Range test for the learning rate.

    One annealing cycle with zero momentum and the linear schedule is run
    while mu decays exponentially from mu_start to mu_end; the per-column l1
    norm of the gradient is smoothed with an EMA, and mu is read off at the
    start of the first window of `patience` iterations whose relative EMA
    change stays below `rel_tol`. Falls back to `fallback_mu` (with a
    warning) if the norm never settles.
    """
    if config.iterations < 100:
        raise ValueError("learning-rate test needs at least 100 iterations")
    key = (
        matrix_content_hash(matrix),
        config.sigma,
        config.iterations,
        config.batch_size,
        int(seed),
        params,
    )
    if use_cache and trace is None and key in _LR_CACHE:
        return _LR_CACHE[key]

    rng = np.random.default_rng(seed)
    n_iter = config.iterations
    decay = (params.mu_end / params.mu_start) ** (1.0 / n_iter)
    mus = params.mu_start * decay ** np.arange(n_iter)

    j = matrix.j
    c = np.zeros((matrix.n, config.batch_size))
    m = np.zeros_like(c)
    ema = None
    run_length = 0
    chosen = None
    for t in range(n_iter):
        p = denormalize_regularization(linear_pbar(t, n_iter), decomp)
        c, m, grad = _raw_step(c, m, j, p, mus[t], 0.0, config.sigma, rng)
        _check_finite(c, t)
        norm = float(np.abs(grad).sum(axis=0).mean())
        if ema is None:
            ema, rel_change = norm, 0.0
        else:
            ema_next = params.ema_decay * ema + (1.0 - params.ema_decay) * norm
            rel_change = abs(ema_next - ema) / ema if ema > 0.0 else 0.0
            ema = ema_next
        if trace is not None:
            trace.append((t, float(mus[t]), norm, ema))
        run_length = run_length + 1 if rel_change < params.rel_tol else 0
        if run_length >= params.patience and chosen is None:
            chosen = float(mus[t - run_length + 1])
            if trace is None:
                break

    if chosen is None:
        logger.warning(
            "learning-rate test: gradient norm never settled; falling back to mu=%g",
            params.fallback_mu,
        )
        chosen = params.fallback_mu
    if use_cache:
        _LR_CACHE[key] = chosen
    return chosen
