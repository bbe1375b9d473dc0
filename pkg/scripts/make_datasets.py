#!/usr/bin/env python3
"""Generate the bundled synthetic benchmark directories under data/.

Usage:
    python scripts/make_datasets.py [--out data] [--seed 0]

Writes one dataset directory per benchmark spec (cora-sim, citeseer-sim) in
the documented manifest/edges/features/labels format. Generation is
deterministic for a fixed seed.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gclreplay.datasets import save_dataset, validate_dataset
from gclreplay.synthetic import SPECS, make_benchmark


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output root directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", choices=sorted(SPECS), help="build one dataset")
    args = ap.parse_args()

    names = [args.only] if args.only else sorted(SPECS)
    for name in names:
        spec = SPECS[name]
        root = Path(args.out) / name
        print(f"generating {name} (n={spec.num_nodes}, m={spec.num_edges}, "
              f"d={spec.num_features}) ...")
        graph = make_benchmark(spec, args.seed)
        save_dataset(root, graph, name)
        counts = validate_dataset(root)
        print(f"  wrote {root}: {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
