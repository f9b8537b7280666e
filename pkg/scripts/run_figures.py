"""Run the simulation grids behind the risk figures.

    python3 scripts/run_figures.py                 # all four grids, 100 reps each
    python3 scripts/run_figures.py --only figure1_p --reps 20 --jobs 4

Each grid writes results.csv, summary.csv, errors.csv, timings.csv and an
SVG chart into results/<name>/. Lowering --reps writes a copy of the config
with the new count, so the hash in the outputs reflects what was run.
"""

import argparse
import json
import os
import sys
import tempfile
import time

from factorpred.cli import main as cli_main

HERE = os.path.dirname(os.path.abspath(__file__))
GRIDS = ("figure1_p", "figure2_k", "figure3_snr", "figure4_er_k")


def run(name: str, out_root: str, reps, jobs: int, seed) -> int:
    path = os.path.join(HERE, "configs", f"{name}.json")
    with open(path) as fh:
        cfg = json.load(fh)
    if reps is not None:
        cfg["reps"] = reps
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as tmp:
        json.dump(cfg, tmp)
    argv = ["benchmark", "--config", tmp.name, "--out", os.path.join(out_root, name),
            "--jobs", str(jobs)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    t0 = time.perf_counter()
    try:
        code = cli_main(argv)
    finally:
        os.unlink(tmp.name)
    print(f"{name}: exit {code} after {time.perf_counter() - t0:.0f} s", file=sys.stderr)
    return code


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", choices=GRIDS, action="append")
    ap.add_argument("--reps", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default=os.path.join(HERE, "..", "results"))
    args = ap.parse_args()
    codes = [run(name, args.out, args.reps, args.jobs, args.seed) for name in args.only or GRIDS]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
