#!/usr/bin/env python3
"""Cutoff indicators for Moran mutation families over a geometric N-sweep.

Usage: python3 scripts/cutoff_table.py [a1] [a2] [N1 N2 ...]
"""
import math
import sys

from dualchain.spectra import moran_mutation_spectrum
from dualchain.stationary_times import cutoff_report


def main(argv):
    a1 = float(argv[1]) if len(argv) > 1 else 0.5
    a2 = float(argv[2]) if len(argv) > 2 else 0.5
    Ns = [int(v) for v in argv[3:]] or [25, 50, 100, 200, 400, 800]
    a = a1 + a2

    out = cutoff_report(lambda N: moran_mutation_spectrum(N, a1, a2), Ns)
    print(f"# Moran mutation a1={a1} a2={a2} (a={a})")
    print(f"{'N':>6} {'E(T)':>14} {'Var(T)':>14} {'Var/E^2':>10} "
          f"{'(1-t1)E':>10} {'E/asymptote':>12}")
    for row in out["rows"]:
        N = row["N"]
        asym = N * (math.log(N) + math.log(a)) / a if a > 0 else float("nan")
        print(f"{N:>6} {row['mean']:>14.6f} {row['variance']:>14.6f} "
              f"{row['relative_variance']:>10.6f} {row['gap_times_mean']:>10.4f} "
              f"{row['mean'] / asym:>12.6f}")
    print(f"# cutoff flag: {out['cutoff_flag']}")


if __name__ == "__main__":
    main(sys.argv)
