"""Black-box baselines: CMA-ES tuning of the tanh schedule.

The evolution strategy is the standard covariance-matrix-adaptation loop
(rank-mu update, cumulation paths, step-size control with the usual
population-size-parameterized constants). It searches the unit cube;
candidates are projected onto the cube before evaluation, which also keeps
the mean inside. Schedule parameters (O, S, D) live in the cube through a
fixed monotone mapping: O and S exponential in [0.01, 10], D linear in
[-3, 3].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .problem import CouplingMatrix
from .schedules import TanhScheduleParams, row_sum_norm, tanh_p
from .simcim import SimCimConfig, run_batch
from .spectral import SpectralDecomposition

logger = logging.getLogger(__name__)

O_LOG_RANGE = (-2.0, 1.0)
S_LOG_RANGE = (-2.0, 1.0)
D_RANGE = (-3.0, 3.0)


@dataclass(frozen=True)
class CmaesConfig:
    population: int = 10
    max_evaluations: int = 500
    initial_step: float = 0.3

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.max_evaluations < self.population:
            raise ValueError("budget must cover at least one generation")
        if self.initial_step <= 0:
            raise ValueError("initial step size must be positive")


def unit_to_tanh_params(u: np.ndarray, jm: float) -> TanhScheduleParams:
    """Map a unit-cube point to schedule parameters (clipping to the cube)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    o = 10.0 ** (O_LOG_RANGE[0] + (O_LOG_RANGE[1] - O_LOG_RANGE[0]) * u[0])
    s = 10.0 ** (S_LOG_RANGE[0] + (S_LOG_RANGE[1] - S_LOG_RANGE[0]) * u[1])
    d = D_RANGE[0] + (D_RANGE[1] - D_RANGE[0]) * u[2]
    return TanhScheduleParams(o=float(o), s=float(s), d=float(d), jm=jm)


def tanh_params_to_unit(params: TanhScheduleParams) -> np.ndarray:
    """Inverse of unit_to_tanh_params (jm is carried separately)."""
    return np.array(
        [
            (np.log10(params.o) - O_LOG_RANGE[0]) / (O_LOG_RANGE[1] - O_LOG_RANGE[0]),
            (np.log10(params.s) - S_LOG_RANGE[0]) / (S_LOG_RANGE[1] - S_LOG_RANGE[0]),
            (params.d - D_RANGE[0]) / (D_RANGE[1] - D_RANGE[0]),
        ]
    )


def cmaes_minimize(
    objective,
    dim: int,
    config: CmaesConfig = CmaesConfig(),
    seed: int | np.random.Generator = 0,
) -> tuple[np.ndarray, float, list[dict]]:
    """Minimize `objective` over the unit cube [0, 1]^dim.

    Runs full generations until the evaluation budget is exhausted and
    returns (best point, best value, per-generation history). Non-finite
    objective values are assigned the worst possible rank and logged.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    lam = config.population
    mu = lam // 2
    raw_weights = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw_weights / raw_weights.sum()
    mueff = 1.0 / np.sum(weights**2)
    n = float(dim)
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 2.0 * mueff / lam + 0.3 + cs

    xmean = np.full(dim, 0.5)
    sigma = config.initial_step
    cov = np.eye(dim)
    pc = np.zeros(dim)
    ps = np.zeros(dim)
    evaluations = 0
    best_x = xmean.copy()
    best_value = np.inf
    history: list[dict] = []

    generations = config.max_evaluations // lam
    for gen in range(generations):
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-20)
        sqrt_cov = eigvecs * np.sqrt(eigvals)
        inv_sqrt_cov = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T

        z = rng.standard_normal((lam, dim))
        candidates = np.clip(xmean + sigma * z @ sqrt_cov.T, 0.0, 1.0)
        fitness = np.array([float(objective(x)) for x in candidates])
        evaluations += lam
        bad = ~np.isfinite(fitness)
        if bad.any():
            logger.warning(
                "generation %d: %d non-finite objective value(s) assigned worst rank",
                gen,
                int(bad.sum()),
            )
            fitness = np.where(bad, np.inf, fitness)

        order = np.argsort(fitness, kind="stable")
        if fitness[order[0]] < best_value:
            best_value = float(fitness[order[0]])
            best_x = candidates[order[0]].copy()

        xold = xmean
        selected = candidates[order[:mu]]
        xmean = weights @ selected

        y = (xmean - xold) / sigma
        ps = (1.0 - cs) * ps + np.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt_cov @ y)
        hsig = (ps @ ps) / n / (1.0 - (1.0 - cs) ** (2.0 * evaluations / lam)) < 2.0 + 4.0 / (
            n + 1.0
        )
        pc = (1.0 - cc) * pc + hsig * np.sqrt(cc * (2.0 - cc) * mueff) * y

        artmp = (selected - xold) / sigma
        cov = (
            (1.0 - c1 - cmu) * cov
            + c1 * (np.outer(pc, pc) + (1.0 - hsig) * cc * (2.0 - cc) * cov)
            + cmu * (artmp.T * weights) @ artmp
        )
        sigma *= np.exp(min(1.0, (cs / damps) * ((ps @ ps) / n - 1.0) / 2.0))

        history.append(
            {
                "generation": gen,
                "evaluations": evaluations,
                "candidates": candidates,
                "fitness": fitness,
                "best_value": best_value,
                "mean": xmean.copy(),
                "sigma": float(sigma),
            }
        )
    return best_x, best_value, history


def batch_objective(
    matrix: CouplingMatrix,
    decomp: SpectralDecomposition,
    params: TanhScheduleParams,
    config: SimCimConfig,
    seed: int,
) -> float:
    """-(C_max + q_max) of one tanh-scheduled batch, for minimization.

    C_max is the batch's maximum cut and q_max the fraction of episodes
    attaining it, so batches are ordered by cut first and by attainment
    probability among equal cuts.
    """
    value, _, _ = _tanh_batch_result(matrix, decomp, params, config, seed)
    return value


def _tanh_batch_result(matrix, decomp, params, config, seed):
    _, _, cuts = run_batch(
        matrix,
        decomp,
        lambda t: tanh_p(t, config.iterations, params),
        config,
        seed,
        normalized=False,
    )
    c_max = float(cuts.max())
    q_max = float((cuts == c_max).mean())
    return -(c_max + q_max), c_max, q_max


def tune_tanh(
    matrix: CouplingMatrix,
    decomp: SpectralDecomposition,
    simcim_config: SimCimConfig,
    cmaes_config: CmaesConfig = CmaesConfig(),
    seed: int = 0,
) -> tuple[TanhScheduleParams, dict, list[dict]]:
    """CMA-ES search over (O, S, D), then one fresh batch at the optimum.

    Returns (best parameters, fresh-batch statistics, evaluation history).
    Each candidate batch gets its own seed derived from the evaluation
    counter, and the fresh evaluation batch uses a seed never used during
    the search, so the reported statistics are out-of-sample.
    """
    jm = row_sum_norm(matrix)
    eval_history: list[dict] = []
    counter = [0]

    def objective(u: np.ndarray) -> float:
        params = unit_to_tanh_params(u, jm)
        # each evaluation gets a noise stream derived from its counter value
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, 1000 + counter[0]])
        )
        value, c_max, q_max = _tanh_batch_result(matrix, decomp, params, simcim_config, rng)
        eval_history.append(
            {
                "evaluation": counter[0],
                "o": params.o,
                "s": params.s,
                "d": params.d,
                "objective": value,
                "c_max": c_max,
                "q_max": q_max,
            }
        )
        counter[0] += 1
        return value

    rng_es = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    best_u, search_best_value, _ = cmaes_minimize(objective, 3, cmaes_config, rng_es)
    best_params = unit_to_tanh_params(best_u, jm)

    fresh_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    _, _, cuts = run_batch(
        matrix,
        decomp,
        lambda t: tanh_p(t, simcim_config.iterations, best_params),
        simcim_config,
        fresh_rng,
        normalized=False,
    )
    c_max = float(cuts.max())
    stats = {
        "max_cut": c_max,
        "median_cut": float(np.median(cuts)),
        "probability_max": float((cuts == c_max).mean()),
        "search_best_objective": float(search_best_value),
        "search_best_cut": max(h["c_max"] for h in eval_history),
        "cuts": cuts,
    }
    return best_params, stats, eval_history
