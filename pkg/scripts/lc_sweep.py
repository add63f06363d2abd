"""Relative energy and L2 gaps of the Cosserat slab to the classical solid over Lc.

Usage: python3 scripts/lc_sweep.py [--divisions 16 5 2] [--order 3] [--out results/lc_sweep.csv]
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from cosserat_mixdim.app import lc_sweep, load_config, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divisions", type=int, nargs=3, default=(16, 5, 2))
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--out", default="results/lc_sweep.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    doc, spec = lc_sweep(args.divisions, args.order)
    rows = sweep(load_config(doc), spec, args.out)
    for r in rows:
        print(f"Lc = {r['value']:10.4g}   energy gap {r['energy_gap']:.5f}   L2 gap {r['l2_gap']:.5f}")


if __name__ == "__main__":
    main()
