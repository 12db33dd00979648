"""Ising/Max-Cut solving with SimCIM and a learned regularization schedule.

The solver relaxes spins to bounded continuous amplitudes driven by noisy
momentum gradient steps; the time profile of the regularization term is
either a fixed baseline schedule (linear, tanh) or chosen step by step by a
PPO-trained actor-critic agent rewarded through a leaderboard percentile
scheme.
"""

from .agent import (
    AgentNetworks,
    FinetuneResult,
    PpoConfig,
    TrainConfig,
    TrainResult,
    actor_forward,
    build_networks,
    critic_forward,
    finetune,
    generate_episodes,
    load_checkpoint,
    ppo_loss,
    ppo_update,
    pretrain,
    sample_actions,
    save_checkpoint,
    trajectory_returns,
)
from .baselines import (
    CmaesConfig,
    batch_objective,
    cmaes_minimize,
    tune_tanh,
    unit_to_tanh_params,
)
from .cli import BatchStats, best_known_cuts, evaluate_batch_stats
from .environment import EnvConfig, ScheduleControlEnv, TrajectoryBatch
from .problem import (
    CouplingMatrix,
    GsetInstance,
    GsetParseError,
    batch_cut_values,
    brute_force_max_cut,
    cut_value,
    generate_erdos_renyi,
    ising_energy,
    parse_gset,
    serialize_gset,
)
from .rewards import Leaderboard, RewardConfig, assign_rewards, percentile, r2_rewards, r3_rewards
from .schedules import (
    PBAR_MAX,
    TanhScheduleParams,
    apply_action,
    linear_pbar,
    row_sum_norm,
    tanh_p,
)
from .simcim import (
    DivergenceError,
    LrTestParams,
    SimCimBatchState,
    SimCimConfig,
    find_learning_rate,
    init_state,
    run_batch,
    spins_from_amplitudes,
    step,
)
from .spectral import (
    ProblemFeatures,
    SpectralDecomposition,
    eigendecompose,
    eigendecompose_cached,
    problem_features,
    to_eigenbasis,
)

__version__ = "0.1.0"

__all__ = [
    "AgentNetworks",
    "BatchStats",
    "CmaesConfig",
    "CouplingMatrix",
    "DivergenceError",
    "EnvConfig",
    "FinetuneResult",
    "GsetInstance",
    "GsetParseError",
    "Leaderboard",
    "LrTestParams",
    "PBAR_MAX",
    "PpoConfig",
    "ProblemFeatures",
    "RewardConfig",
    "ScheduleControlEnv",
    "SimCimBatchState",
    "SimCimConfig",
    "SpectralDecomposition",
    "TanhScheduleParams",
    "TrainConfig",
    "TrainResult",
    "TrajectoryBatch",
    "actor_forward",
    "apply_action",
    "assign_rewards",
    "batch_cut_values",
    "batch_objective",
    "best_known_cuts",
    "brute_force_max_cut",
    "build_networks",
    "cmaes_minimize",
    "critic_forward",
    "cut_value",
    "eigendecompose",
    "eigendecompose_cached",
    "evaluate_batch_stats",
    "find_learning_rate",
    "finetune",
    "generate_episodes",
    "generate_erdos_renyi",
    "init_state",
    "ising_energy",
    "linear_pbar",
    "load_checkpoint",
    "parse_gset",
    "percentile",
    "ppo_loss",
    "ppo_update",
    "pretrain",
    "problem_features",
    "r2_rewards",
    "r3_rewards",
    "row_sum_norm",
    "run_batch",
    "sample_actions",
    "save_checkpoint",
    "serialize_gset",
    "spins_from_amplitudes",
    "step",
    "tanh_p",
    "to_eigenbasis",
    "trajectory_returns",
    "tune_tanh",
    "unit_to_tanh_params",
]
