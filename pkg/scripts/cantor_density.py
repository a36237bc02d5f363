"""Density of the admissible delta-set in (0, eta) for a list of eta.

    python scripts/cantor_density.py --M 2.6537 --etas 0.2 0.1 0.05
"""

import argparse
import math

from resonant_wave.cantor_measure import density_curve, exclusion_bound
from resonant_wave.nash_moser import DiophantineParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--s-star", type=int, default=1, choices=(-1, 1))
    ap.add_argument("--gamma", type=float, default=1e-3)
    ap.add_argument("--tau", type=float, default=1.5)
    ap.add_argument("--M", type=float, default=0.0, help="constant Melnikov surrogate")
    ap.add_argument("--etas", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    ap.add_argument("--n", type=int, default=100_000, help="stratified samples per eta")
    ap.add_argument("--K-max", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    dp = DiophantineParams(args.gamma, args.tau)
    ests = density_curve(dp, args.p, args.s_star, args.M, args.etas, args.n, args.K_max, args.seed)
    print(f"{'eta':>8} {'interval':>12} {'sampled':>12} {'2/sqrt(n)':>10} {'lower bnd':>10} intervals")
    for e in ests:
        lb = 1 - exclusion_bound(dp, args.p, args.s_star, args.M, e.eta, args.K_max) / e.eta
        print(
            f"{e.eta:8.4g} {e.density_interval:12.8f} {e.density_sampled:12.8f} "
            f"{2 / math.sqrt(args.n):10.1e} {lb:10.4f} {len(e.excluded_intervals)}"
        )
        if e.warning:
            print("  warning:", e.warning)


if __name__ == "__main__":
    main()
