#!/usr/bin/env python3
"""Convenience driver: generate the cora-sim dataset if missing, run the full
method plus the two main baselines with paired seeds, and print the table.

Usage:
    python scripts/run_benchmark.py [--seeds 10] [--out reports/]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gclreplay.cli import main as cli_main
from gclreplay.datasets import save_dataset
from gclreplay.synthetic import SPECS, make_benchmark


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--data", default="data/cora-sim")
    ap.add_argument("--out", default="reports")
    args = ap.parse_args()

    data = Path(args.data)
    if not data.is_dir():
        print(f"building dataset at {data} ...")
        save_dataset(data, make_benchmark(SPECS["cora-sim"], 0), "cora-sim")

    out_root = Path(args.out)
    for method in ("dslr", "cd_only", "mf"):
        out = out_root / f"{method}.json"
        print(f"\n=== {method} ===")
        code = cli_main([
            "run", "--dataset", str(data), "--method", method,
            "--seeds", str(args.seeds), "--output", str(out),
        ])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
