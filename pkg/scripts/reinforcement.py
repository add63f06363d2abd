"""Maximal displacement of one benchmark under each of its reinforcement options.

Usage: python3 scripts/reinforcement.py 2 [--divisions 50 10 3] [--order 2] [--out results/example2.csv]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from cosserat_mixdim.app import Problem, example_config, load_config, run, write_csv
from cosserat_mixdim.app.benchmarks import REINFORCEMENTS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("number", type=int, choices=(1, 2, 3))
    ap.add_argument("--divisions", type=int, nargs=3)
    ap.add_argument("--order", type=int)
    ap.add_argument("--out")
    args = ap.parse_args()
    out = Path(args.out or f"results/example{args.number}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    problem = None
    rows = []
    for i, reinforce in enumerate(REINFORCEMENTS[args.number]):
        cfg = load_config(example_config(args.number, reinforce, args.divisions, args.order))
        if problem is None:
            problem = Problem.from_config(cfg)
        t0 = time.perf_counter()
        rep = run(cfg, problem)
        row = {"reinforcement": float(i), "n_dofs": rep["n_dofs"], "max_u": rep["max_u"], "energy": rep["energy"], **{f"{k}": v for k, v in rep["metrics"].items()}}
        rows.append(row)
        print(f"{reinforce:9s} dofs {rep['n_dofs']:8d}  max|u| {rep['max_u']:.6g} mm  ({time.perf_counter() - t0:.1f} s)")
    write_csv(rows, out)


if __name__ == "__main__":
    main()
