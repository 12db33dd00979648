"""Download the G1-G10 Max-Cut benchmark instances.

The instances are Stanford's Gset collection, hosted by the original author.
They are not bundled with the package; run this once on a machine with
network access, then point the benchmark commands (or the acceptance tests,
via SIMCIM_RL_GSET_DIR) at the output directory.

Usage:
    python3 scripts/fetch_gset.py [--dest data/gset] [--instances G1,G2,...]
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

BASE_URL = "https://web.stanford.edu/~yyye/yyye/Gset"
DEFAULT_INSTANCES = [f"G{i}" for i in range(1, 11)]


def fetch(name: str, dest: Path, timeout: float) -> None:
    url = f"{BASE_URL}/{name}"
    target = dest / name
    if target.exists():
        print(f"{name}: already present, skipping")
        return
    print(f"{name}: downloading {url}")
    with urllib.request.urlopen(url, timeout=timeout) as response:
        text = response.read().decode("ascii")
    header = text.splitlines()[0].split()
    if len(header) != 2 or not all(part.isdigit() for part in header):
        raise ValueError(f"{name}: unexpected file header {header!r}")
    target.write_text(text)
    print(f"{name}: saved {len(text.splitlines()) - 1} edges to {target}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", default="data/gset", help="output directory")
    parser.add_argument(
        "--instances",
        default=",".join(DEFAULT_INSTANCES),
        help="comma-separated instance names",
    )
    parser.add_argument("--timeout", type=float, default=60.0)
    args = parser.parse_args()

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    names = [s.strip() for s in args.instances.split(",") if s.strip()]
    failures = []
    for name in names:
        try:
            fetch(name, dest, args.timeout)
        except (urllib.error.URLError, TimeoutError, ValueError, OSError) as exc:
            print(f"{name}: FAILED ({exc})", file=sys.stderr)
            failures.append(name)
    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
