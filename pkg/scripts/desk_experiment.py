"""Desk-scale end-to-end experiment: learned schedule vs fixed baselines.

Pre-trains the schedule-control agent on a stream of random instances, then
compares four methods on one held-out instance of the same family:

  * Linear    - the default ramp, auto-tuned learning rate
  * Tanh-CMAES - tanh schedule with CMA-ES-tuned (O, S, D)
  * Agent-0   - the pre-trained agent, no fine-tuning
  * Agent-K   - the same agent after K fine-tuning updates

Writes history CSVs, the checkpoint, and a comparison table under --out.
Runs in roughly half an hour with the defaults; shrink --pretrain-instances
and --updates for a quick look.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from simcim_rl import (
    CmaesConfig,
    SimCimConfig,
    TrainConfig,
    eigendecompose,
    evaluate_batch_stats,
    find_learning_rate,
    finetune,
    generate_erdos_renyi,
    linear_pbar,
    pretrain,
    run_batch,
    save_checkpoint,
    tune_tanh,
)
from simcim_rl.cli import render_table, _write_csv, _write_history


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=60)
    parser.add_argument("--connect-prob", type=float, default=0.06)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--pretrain-instances", type=int, default=300)
    parser.add_argument("--updates", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/desk-experiment")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = TrainConfig(batch_size=args.batch_size)

    def sampler(rng):
        return generate_erdos_renyi(args.n, args.connect_prob, seed=rng)

    print(f"pretraining on {args.pretrain_instances} random instances ...")
    t0 = time.time()
    pre = pretrain(
        sampler,
        args.pretrain_instances,
        seed=args.seed,
        train=train,
        log=lambda e: print(
            f"  instance {e['index']:4d}: mean_reward={e['mean_reward']:+.4f} "
            f"beat_fraction={e['beat_fraction']:.3f}"
        )
        if e["index"] % 25 == 0
        else None,
    )
    print(f"pretraining took {time.time() - t0:.0f}s")
    save_checkpoint(pre.networks, out / "pretrained.npz", extra={"seed": args.seed})
    _write_history(out / "pretrain_history.csv", pre.history)

    # held-out instance: a seed the pretraining stream never sees
    held_out = generate_erdos_renyi(args.n, args.connect_prob, seed=args.seed + 10_000)
    decomp = eigendecompose(held_out)
    _, best_spins = None, None

    rows = []

    def bench(label, cuts):
        stats = evaluate_batch_stats(cuts, best_known=-1)
        rows.append([label, stats.max_cut, stats.median_cut, stats.probability])
        print(f"  {label}: max={stats.max_cut:.0f} median={stats.median_cut:.0f}")

    print("evaluating baselines on the held-out instance ...")
    mu = find_learning_rate(
        held_out, decomp, SimCimConfig(mu=1.0, batch_size=args.batch_size), seed=args.seed
    )
    sim = SimCimConfig(mu=mu, batch_size=args.batch_size)
    _, _, cuts = run_batch(
        held_out, decomp, lambda t: linear_pbar(t, sim.iterations), sim, seed=args.seed
    )
    bench("Linear", cuts)

    params, stats, _ = tune_tanh(held_out, decomp, sim, CmaesConfig(), seed=args.seed)
    bench("Tanh-CMAES", stats["cuts"])
    print(f"  tuned tanh parameters: O={params.o:.4f} S={params.s:.4f} D={params.d:.4f}")

    agent0 = finetune(held_out, 0, seed=args.seed, train=train, networks=pre.networks)
    bench("Agent-0", agent0.final_cuts)

    print(f"fine-tuning for {args.updates} updates ...")
    agentk = finetune(
        held_out, args.updates, seed=args.seed, train=train, networks=pre.networks
    )
    bench(f"Agent-{args.updates}", agentk.final_cuts)
    _write_history(out / "finetune_history.csv", agentk.history, extra_cols=("best_cut",))

    header = ["method", "max_cut", "median_cut", "probability_max"]
    _write_csv(out / "comparison.csv", header, rows)
    table = render_table(header, rows)
    (out / "comparison.txt").write_text(table)
    print()
    print(table, end="")


if __name__ == "__main__":
    main()
