"""Command-line harness: configuration, seeding, benchmarks, reports.

Configuration is layered: built-in defaults, then an INI file (sections per
module), then command-line flags. Every run writes `manifest.ini` with the
full effective configuration into its output directory; re-running any mode
with `--config <outdir>/manifest.ini` and no other flags reproduces the run
bit for bit. The output root can be moved with the SIMCIM_RL_OUTPUT
environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .agent import (
    PpoConfig,
    TrainConfig,
    finetune,
    load_checkpoint,
    pretrain,
    save_checkpoint,
)
from .baselines import CmaesConfig, tune_tanh
from .problem import GsetInstance, generate_erdos_renyi, parse_gset
from .rewards import RewardConfig
from .schedules import TanhScheduleParams, linear_pbar, row_sum_norm, tanh_p
from .seeding import component_rng, component_seed
from .simcim import SimCimConfig, find_learning_rate, run_batch
from .spectral import eigendecompose

OUTPUT_ROOT_VAR = "SIMCIM_RL_OUTPUT"

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {
        "mode": "",
        "seed": "0",
        "out": "run",
        "instance": "",
        "best_known": "",
        "label": "",
        "schedule": "linear",
        "batches": "1",
        "random_n": "0",
        "random_connect_prob": "0.5",
        "random_weights": "unit",
        "random_seed": "",
        "gset_dir": "",
        "instances": "",
        "runs": "",
        "updates": "100",
        "pretrain_instances": "300",
        "checkpoint": "",
        "checkpoint_every": "0",
    },
    "simcim": {
        "mu": "auto",
        "eta": "0.9",
        "sigma": "0.03",
        "iterations": "1000",
        "batch_size": "256",
    },
    "schedule_tanh": {"o": "1.0", "s": "1.0", "d": "0.0"},
    "agent": {
        "agent_interval": "10",
        "p_delta": "0.04",
        "pbar_init": "1.0",
        "hidden": "256",
    },
    "reward": {"scheme": "r3", "q": "99.0"},
    "ppo": {
        "epochs": "4",
        "gamma": "1.0",
        "clip_ratio": "0.2",
        "value_weight": "0.5",
        "entropy_weight": "0.01",
        "learning_rate": "0.0003",
        "max_grad_norm": "0.5",
    },
    "cmaes": {"population": "10", "max_evaluations": "500", "initial_step": "0.3"},
}


class ConfigError(ValueError):
    """Invalid or missing configuration value; message names the field."""


class BatchStats(NamedTuple):
    max_cut: float
    median_cut: float
    solved: bool
    probability: float


def evaluate_batch_stats(cuts, best_known: int) -> BatchStats:
    """Max and median cut, solved flag, and fraction of episodes at the max."""
    cuts = np.asarray(cuts, dtype=float)
    if cuts.size == 0:
        raise ValueError("cuts must be non-empty")
    max_cut = float(cuts.max())
    return BatchStats(
        max_cut=max_cut,
        median_cut=float(np.median(cuts)),
        solved=max_cut == best_known,
        probability=float((cuts == max_cut).mean()),
    )


def best_known_cuts() -> dict[str, int]:
    """Best published cut values shipped with the package (G1 through G10)."""
    text = resources.files("simcim_rl").joinpath("data/gset_best_known.csv").read_text()
    table = {}
    for row in csv.DictReader(text.splitlines()):
        table[row["instance"]] = int(row["best_known"])
    return table


def load_config(path: str | Path | None) -> dict[str, dict[str, str]]:
    """Defaults overlaid with an optional INI file."""
    cfg = {section: dict(values) for section, values in DEFAULTS.items()}
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in cfg:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser[section].items():
                if key not in cfg[section]:
                    raise ConfigError(f"unknown config field [{section}] {key}")
                cfg[section][key] = value
    return cfg


def write_manifest(cfg: dict[str, dict[str, str]], path: Path) -> None:
    parser = configparser.ConfigParser()
    for section, values in cfg.items():
        parser[section] = values
    with open(path, "w") as fh:
        parser.write(fh)


def _get_float(cfg, section, key) -> float:
    try:
        return float(cfg[section][key])
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {cfg[section][key]!r}")


def _get_int(cfg, section, key) -> int:
    try:
        return int(cfg[section][key])
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer, got {cfg[section][key]!r}")


def resolve_out(out: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_VAR, "")
    path = Path(root) / out if root and not Path(out).is_absolute() else Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_instance(cfg: dict) -> GsetInstance:
    """Instance from a Gset-format file or the seeded random generator."""
    run = cfg["run"]
    table = best_known_cuts()
    if run["instance"]:
        path = Path(run["instance"])
        if not path.exists():
            raise ConfigError(f"instance file not found: {path}")
        name = path.stem
        best = table.get(name)
        if run["best_known"]:
            best = _get_int(cfg, "run", "best_known")
        return parse_gset(path.read_text(), name=name, best_known_cut=best)
    n = _get_int(cfg, "run", "random_n")
    if n <= 0:
        raise ConfigError("[run] needs either instance=<path> or random_n=<n>")
    seed_text = run["random_seed"] or run["seed"]
    matrix = generate_erdos_renyi(
        n,
        _get_float(cfg, "run", "random_connect_prob"),
        weight_mode=run["random_weights"],
        seed=component_rng(int(seed_text), "cli/random-instance"),
    )
    best = _get_int(cfg, "run", "best_known") if run["best_known"] else None
    return GsetInstance(name=f"random-{n}", matrix=matrix, best_known_cut=best)


def simcim_config_from(cfg: dict) -> SimCimConfig:
    mu_text = cfg["simcim"]["mu"]
    mu = 1.0 if mu_text == "auto" else float(mu_text)
    return SimCimConfig(
        mu=mu,
        eta=_get_float(cfg, "simcim", "eta"),
        sigma=_get_float(cfg, "simcim", "sigma"),
        iterations=_get_int(cfg, "simcim", "iterations"),
        batch_size=_get_int(cfg, "simcim", "batch_size"),
    )


def _resolved_mu(cfg, matrix, decomp, seed) -> float:
    """Honor an explicit mu; otherwise run the range test."""
    base = simcim_config_from(cfg)
    if cfg["simcim"]["mu"] != "auto":
        return base.mu
    return find_learning_rate(matrix, decomp, base, seed=component_seed(seed, "cli/lr-test"))


def train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(
        eta=_get_float(cfg, "simcim", "eta"),
        sigma=_get_float(cfg, "simcim", "sigma"),
        iterations=_get_int(cfg, "simcim", "iterations"),
        batch_size=_get_int(cfg, "simcim", "batch_size"),
        agent_interval=_get_int(cfg, "agent", "agent_interval"),
        p_delta=_get_float(cfg, "agent", "p_delta"),
        pbar_init=_get_float(cfg, "agent", "pbar_init"),
        reward=RewardConfig(
            q=_get_float(cfg, "reward", "q"), scheme=cfg["reward"]["scheme"]
        ),
        hidden=_get_int(cfg, "agent", "hidden"),
    )


def ppo_config_from(cfg: dict) -> PpoConfig:
    return PpoConfig(
        epochs=_get_int(cfg, "ppo", "epochs"),
        gamma=_get_float(cfg, "ppo", "gamma"),
        clip_ratio=_get_float(cfg, "ppo", "clip_ratio"),
        value_weight=_get_float(cfg, "ppo", "value_weight"),
        entropy_weight=_get_float(cfg, "ppo", "entropy_weight"),
        learning_rate=_get_float(cfg, "ppo", "learning_rate"),
        max_grad_norm=_get_float(cfg, "ppo", "max_grad_norm"),
    )


def cmaes_config_from(cfg: dict) -> CmaesConfig:
    return CmaesConfig(
        population=_get_int(cfg, "cmaes", "population"),
        max_evaluations=_get_int(cfg, "cmaes", "max_evaluations"),
        initial_step=_get_float(cfg, "cmaes", "initial_step"),
    )


def _schedule_fn(cfg: dict, matrix, iterations: int):
    """(schedule callable, normalized flag, label) from the config."""
    kind = cfg["run"]["schedule"]
    if kind == "linear":
        return lambda t: linear_pbar(t, iterations), True, "Linear"
    if kind == "tanh":
        params = TanhScheduleParams(
            o=_get_float(cfg, "schedule_tanh", "o"),
            s=_get_float(cfg, "schedule_tanh", "s"),
            d=_get_float(cfg, "schedule_tanh", "d"),
            jm=row_sum_norm(matrix),
        )
        return lambda t: tanh_p(t, iterations, params), False, "Tanh"
    raise ConfigError(f"[run] schedule must be linear or tanh, got {kind!r}")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def render_table(headers: list[str], rows: list[list]) -> str:
    """Fixed-width plain-text table."""
    cells = [[str(h) for h in headers]] + [[str(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for idx, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def _instance_rows(instance, cuts, label) -> list:
    best = instance.best_known_cut
    stats = evaluate_batch_stats(cuts, best if best is not None else -1)
    solved = stats.solved if best is not None else ""
    norm_max = stats.max_cut / best if best else ""
    norm_median = stats.median_cut / best if best else ""
    difference = stats.max_cut - best if best is not None else ""
    return [
        label,
        instance.name,
        best if best is not None else "",
        stats.max_cut,
        stats.median_cut,
        difference,
        solved,
        stats.probability,
        norm_max,
        norm_median,
    ]


BENCH_HEADER = [
    "label",
    "instance",
    "best_known",
    "max_cut",
    "median_cut",
    "difference",
    "solved",
    "probability",
    "normalized_max",
    "normalized_median",
]


def cmd_solve(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    instance = load_instance(cfg)
    decomp = eigendecompose(instance.matrix)
    mu = _resolved_mu(cfg, instance.matrix, decomp, seed)
    config = replace(simcim_config_from(cfg), mu=mu)
    schedule, normalized, label = _schedule_fn(cfg, instance.matrix, config.iterations)
    batches = _get_int(cfg, "run", "batches")
    all_cuts = []
    for b in range(batches):
        _, _, cuts = run_batch(
            instance.matrix,
            decomp,
            schedule,
            config,
            seed=component_rng(seed, "cli/solve-batch", b),
            normalized=normalized,
        )
        all_cuts.append(cuts)
    cuts = np.concatenate(all_cuts)
    row = _instance_rows(instance, cuts, label)
    _write_csv(out / "solve.csv", BENCH_HEADER, [row])
    report = render_table(BENCH_HEADER, [row])
    (out / "report.txt").write_text(report)
    write_manifest(cfg, out / "manifest.ini")
    print(report, end="")
    return 0


def cmd_lr_test(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    instance = load_instance(cfg)
    decomp = eigendecompose(instance.matrix)
    trace: list = []
    mu = find_learning_rate(
        instance.matrix,
        decomp,
        simcim_config_from(cfg),
        seed=component_seed(seed, "cli/lr-test"),
        trace=trace,
        use_cache=False,
    )
    _write_csv(
        out / "lr_trace.csv",
        ["t", "mu", "grad_norm", "ema_grad_norm"],
        [list(r) for r in trace],
    )
    (out / "report.txt").write_text(f"selected mu = {mu!r}\n")
    write_manifest(cfg, out / "manifest.ini")
    print(f"selected mu = {mu!r}")
    return 0


_HISTORY_COLUMNS = [
    "index",
    "mu",
    "mean_reward",
    "mean_cut",
    "max_cut",
    "median_cut",
    "threshold",
    "beat_fraction",
    "policy_loss",
    "value_loss",
    "entropy",
    "loss",
    "grad_norm",
]


def _write_history(path: Path, history: list[dict], extra_cols: tuple[str, ...] = ()) -> None:
    cols = _HISTORY_COLUMNS + list(extra_cols)
    rows = [[entry.get(c, "") for c in cols] for entry in history]
    _write_csv(path, cols, rows)


def cmd_pretrain(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    n = _get_int(cfg, "run", "random_n")
    if n <= 0:
        raise ConfigError("[run] random_n must be set for pretraining")
    prob = _get_float(cfg, "run", "random_connect_prob")
    weights = cfg["run"]["random_weights"]

    def sampler(rng: np.random.Generator):
        return generate_erdos_renyi(n, prob, weight_mode=weights, seed=rng)

    result = pretrain(
        sampler,
        _get_int(cfg, "run", "pretrain_instances"),
        seed,
        train=train_config_from(cfg),
        ppo=ppo_config_from(cfg),
        checkpoint_path=out / "checkpoint.npz",
        checkpoint_every=_get_int(cfg, "run", "checkpoint_every"),
        log=lambda e: print(
            f"instance {e['index']}: mean_reward={e['mean_reward']:+.4f} "
            f"beat_fraction={e['beat_fraction']:.3f} max_cut={e['max_cut']:.0f}"
        ),
    )
    save_checkpoint(result.networks, out / "checkpoint.npz", extra={"seed": seed})
    _write_history(out / "history.csv", result.history)
    result.board.to_csv(out / "leaderboard.csv")
    write_manifest(cfg, out / "manifest.ini")
    return 0


def cmd_finetune(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    instance = load_instance(cfg)
    networks = None
    if cfg["run"]["checkpoint"]:
        networks, _ = load_checkpoint(cfg["run"]["checkpoint"])
    result = finetune(
        instance.matrix,
        _get_int(cfg, "run", "updates"),
        seed,
        train=train_config_from(cfg),
        ppo=ppo_config_from(cfg),
        networks=networks,
        log=lambda e: print(
            f"update {e['index']}: median_cut={e['median_cut']:.0f} best_cut={e['best_cut']:.0f}"
        ),
    )
    save_checkpoint(result.networks, out / "checkpoint.npz", extra={"seed": seed})
    _write_history(out / "history.csv", result.history, extra_cols=("best_cut",))
    label = cfg["run"]["label"] or f"Agent-{_get_int(cfg, 'run', 'updates')}"
    row = _instance_rows(instance, result.final_cuts, label)
    _write_csv(out / "bench.csv", BENCH_HEADER, [row])
    (out / "report.txt").write_text(
        render_table(BENCH_HEADER, [row]) + f"best cut ever seen: {result.best_cut:.0f}\n"
    )
    write_manifest(cfg, out / "manifest.ini")
    print(f"best cut: {result.best_cut:.0f}")
    return 0


def cmd_tune_cmaes(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    instance = load_instance(cfg)
    decomp = eigendecompose(instance.matrix)
    mu = _resolved_mu(cfg, instance.matrix, decomp, seed)
    config = replace(simcim_config_from(cfg), mu=mu)
    params, stats, history = tune_tanh(
        instance.matrix, decomp, config, cmaes_config_from(cfg), seed=seed
    )
    _write_csv(
        out / "tuning_history.csv",
        ["evaluation", "o", "s", "d", "objective", "c_max", "q_max"],
        [[h[c] for c in ("evaluation", "o", "s", "d", "objective", "c_max", "q_max")] for h in history],
    )
    label = cfg["run"]["label"] or "Tanh-CMAES"
    row = _instance_rows(instance, stats["cuts"], label)
    _write_csv(out / "bench.csv", BENCH_HEADER, [row])
    report = render_table(BENCH_HEADER, [row]) + (
        f"best parameters: O={params.o!r} S={params.s!r} D={params.d!r}\n"
        f"search-time best cut: {stats['search_best_cut']:.0f}\n"
    )
    (out / "report.txt").write_text(report)
    write_manifest(cfg, out / "manifest.ini")
    print(report, end="")
    return 0


def cmd_bench(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    seed = _get_int(cfg, "run", "seed")
    gset_dir = Path(cfg["run"]["gset_dir"])
    names = [s.strip() for s in cfg["run"]["instances"].split(",") if s.strip()]
    if not names:
        raise ConfigError("[run] instances must list instance names for bench mode")
    table = best_known_cuts()
    rows = []
    label = cfg["run"]["label"]
    for name in names:
        path = gset_dir / name
        if not path.exists() and (gset_dir / f"{name}.txt").exists():
            path = gset_dir / f"{name}.txt"
        if not path.exists():
            raise ConfigError(f"instance file not found: {gset_dir / name}")
        instance = parse_gset(path.read_text(), name=name, best_known_cut=table.get(name))
        decomp = eigendecompose(instance.matrix)
        mu = _resolved_mu(cfg, instance.matrix, decomp, seed)
        config = replace(simcim_config_from(cfg), mu=mu)
        schedule, normalized, default_label = _schedule_fn(cfg, instance.matrix, config.iterations)
        all_cuts = []
        for b in range(_get_int(cfg, "run", "batches")):
            _, _, cuts = run_batch(
                instance.matrix,
                decomp,
                schedule,
                config,
                seed=component_rng(seed, f"cli/bench/{name}", b),
                normalized=normalized,
            )
            all_cuts.append(cuts)
        rows.append(_instance_rows(instance, np.concatenate(all_cuts), label or default_label))
    norm_max = [r[8] for r in rows if r[8] != ""]
    norm_median = [r[9] for r in rows if r[9] != ""]
    solved = [r[6] for r in rows if r[6] != ""]
    if norm_max:
        rows.append(
            [
                rows[0][0],
                "AVERAGE",
                "",
                "",
                "",
                "",
                float(np.mean(solved)) if solved else "",
                "",
                float(np.mean(norm_max)),
                float(np.mean(norm_median)),
            ]
        )
    _write_csv(out / "bench.csv", BENCH_HEADER, rows)
    report = render_table(BENCH_HEADER, rows)
    (out / "report.txt").write_text(report)
    write_manifest(cfg, out / "manifest.ini")
    print(report, end="")
    return 0


def cmd_report(cfg: dict) -> int:
    out = resolve_out(cfg["run"]["out"])
    run_dirs = [s.strip() for s in cfg["run"]["runs"].split(",") if s.strip()]
    if not run_dirs:
        raise ConfigError("[run] runs must list prior run directories for report mode")
    rows = []
    for run_dir in run_dirs:
        found = False
        for candidate in ("bench.csv", "solve.csv"):
            path = Path(run_dir) / candidate
            if path.exists():
                with open(path, newline="") as fh:
                    for row in csv.DictReader(fh):
                        rows.append([row.get(c, "") for c in BENCH_HEADER])
                found = True
                break
        if not found:
            raise ConfigError(f"no bench.csv or solve.csv under {run_dir}")
    _write_csv(out / "combined.csv", BENCH_HEADER, rows)
    report = render_table(BENCH_HEADER, rows)
    (out / "report.txt").write_text(report)
    write_manifest(cfg, out / "manifest.ini")
    print(report, end="")
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "lr-test": cmd_lr_test,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "tune-cmaes": cmd_tune_cmaes,
    "bench": cmd_bench,
    "report": cmd_report,
}

# (flag, section, key) triples; every flag simply overrides one config field.
_FLAG_MAP = [
    ("--seed", "run", "seed"),
    ("--out", "run", "out"),
    ("--instance", "run", "instance"),
    ("--best-known", "run", "best_known"),
    ("--label", "run", "label"),
    ("--schedule", "run", "schedule"),
    ("--batches", "run", "batches"),
    ("--random-n", "run", "random_n"),
    ("--random-connect-prob", "run", "random_connect_prob"),
    ("--random-weights", "run", "random_weights"),
    ("--random-seed", "run", "random_seed"),
    ("--gset-dir", "run", "gset_dir"),
    ("--instances", "run", "instances"),
    ("--runs", "run", "runs"),
    ("--updates", "run", "updates"),
    ("--pretrain-instances", "run", "pretrain_instances"),
    ("--checkpoint", "run", "checkpoint"),
    ("--checkpoint-every", "run", "checkpoint_every"),
    ("--mu", "simcim", "mu"),
    ("--eta", "simcim", "eta"),
    ("--sigma", "simcim", "sigma"),
    ("--iterations", "simcim", "iterations"),
    ("--batch-size", "simcim", "batch_size"),
    ("--tanh-o", "schedule_tanh", "o"),
    ("--tanh-s", "schedule_tanh", "s"),
    ("--tanh-d", "schedule_tanh", "d"),
    ("--agent-interval", "agent", "agent_interval"),
    ("--p-delta", "agent", "p_delta"),
    ("--hidden", "agent", "hidden"),
    ("--reward-scheme", "reward", "scheme"),
    ("--reward-q", "reward", "q"),
    ("--ppo-epochs", "ppo", "epochs"),
    ("--ppo-learning-rate", "ppo", "learning_rate"),
    ("--population", "cmaes", "population"),
    ("--max-evaluations", "cmaes", "max_evaluations"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simcim-rl",
        description="Ising/Max-Cut solving with SimCIM and a learned regularization schedule.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _COMMANDS:
        p = sub.add_parser(mode)
        p.add_argument("--config", default=None, help="INI config file (flags override it)")
        for flag, _, _ in _FLAG_MAP:
            p.add_argument(flag, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg["run"]["mode"] = args.mode
        for flag, section, key in _FLAG_MAP:
            value = getattr(args, flag.lstrip("-").replace("-", "_"))
            if value is not None:
                cfg[section][key] = value
        return _COMMANDS[args.mode](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
