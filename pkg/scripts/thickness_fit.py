"""Extrapolate max|u| of the fully volumetric cantilever to zero plate thickness.

The four (h, max|u|) pairs are the published volumetric results; the fit
``a exp(b h) + c`` gives the h -> 0 limit compared with the plate model value.

Usage: python3 scripts/thickness_fit.py [--plate-value 16.71]
"""

from __future__ import annotations

import argparse

from cosserat_mixdim.app import fit_exponential

VOLUMETRIC = [(1.6, 15.44137668137552), (1.2, 15.702873763963943), (0.8, 15.966197152533859), (0.4, 16.166876867190897)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--plate-value", type=float, default=16.71)
    args = ap.parse_args()
    f = fit_exponential(VOLUMETRIC)
    gap = 100 * (args.plate_value - f.f0) / args.plate_value
    print(f"a = {f.a:.6g}, b = {f.b:.6g}, c = {f.c:.6g}, residual {f.residual:.3g}")
    print(f"f(0) = {f.f0:.4f} mm; relative gap to {args.plate_value} mm: {gap:.2f} %")


if __name__ == "__main__":
    main()
