#!/usr/bin/env python3
"""Run every canned experiment spec in this directory.

Usage: python3 scripts/run_all.py [--out DIR] [--seed S]
"""

import argparse
import pathlib
import sys
import time

from peergraph import experiment


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    here = pathlib.Path(__file__).parent
    for spec_path in sorted(here.glob("*.toml")):
        spec = experiment.load_spec(spec_path)
        if args.seed is not None:
            from dataclasses import replace

            spec = replace(spec, seed=args.seed)
        out_dir = pathlib.Path(args.out) / spec_path.stem
        t0 = time.time()
        written = experiment.run(spec, str(out_dir))
        print(f"{spec_path.name}: {len(written)} files in {time.time() - t0:.1f}s")
        for path in written:
            print(f"  {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
