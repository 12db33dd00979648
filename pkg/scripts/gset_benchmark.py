"""Gset benchmark sweep: linear schedule over G1-G10, many batches.

Needs the instance files on disk (see scripts/fetch_gset.py). For each
instance this runs the learning-rate range test once, then `--batches`
independent SimCIM batches, and reports max/median cut against the
best-known value. This is the long-running counterpart of the desk-scale
acceptance checks; expect minutes per instance at n=800.

Usage:
    python3 scripts/gset_benchmark.py --gset-dir data/gset [--instances G1,G2]
"""

import argparse
import sys
import time
from pathlib import Path

from simcim_rl.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gset-dir", default="data/gset")
    parser.add_argument("--instances", default=",".join(f"G{i}" for i in range(1, 11)))
    parser.add_argument("--batches", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/gset-benchmark")
    args = parser.parse_args()

    gset_dir = Path(args.gset_dir)
    missing = [
        name
        for name in args.instances.split(",")
        if not (gset_dir / name).exists() and not (gset_dir / f"{name}.txt").exists()
    ]
    if missing:
        print(
            f"missing instance files under {gset_dir}: {', '.join(missing)}\n"
            "run scripts/fetch_gset.py first",
            file=sys.stderr,
        )
        return 1

    t0 = time.time()
    code = cli_main(
        [
            "bench",
            "--gset-dir", str(gset_dir),
            "--instances", args.instances,
            "--batches", str(args.batches),
            "--seed", str(args.seed),
            "--out", args.out,
        ]
    )
    print(f"total {time.time() - t0:.0f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
