"""Continue the u^3 branch over a decade of delta and print the amplitude law.

    python scripts/run_branch.py --deltas 0.01 0.1 --n 7 --out branch.csv
"""

import argparse
import logging

import numpy as np

from resonant_wave.bifurcation import continue_branch, find_critical_point
from resonant_wave.nash_moser import NashMoserSchedule
from resonant_wave.nonlinearity import CoeffProfile, Nonlinearity
from resonant_wave.q2_solver import Q2Config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--deltas", type=float, nargs=2, default=(0.01, 0.1), metavar=("LO", "HI"))
    ap.add_argument("--n", type=int, default=7, help="number of log-spaced deltas")
    ap.add_argument("--L0", type=int, default=8)
    ap.add_argument("--p-max", type=int, default=2)
    ap.add_argument("--J", type=int, default=48)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    nl = Nonlinearity(3, {3: CoeffProfile.constant(1.0)})
    sched = NashMoserSchedule(L0=args.L0, p_max=args.p_max)
    cp = find_critical_point(nl, sched.L_max, args.J, Q2Config(N=1), N="auto")
    print(f"critical point: N={cp.N} |u_1|={abs(cp.v1bar.amps[0]):.8f} level={cp.level:.6f}")

    deltas = np.geomspace(*args.deltas, args.n)
    br = continue_branch(nl, cp, sched, deltas, Q2Config(N=cp.N))
    print(f"{'delta':>10} {'omega':>12} {'residual':>10} {'amp_dev':>10} accepted")
    for p in br.points:
        print(f"{p.delta:10.4g} {p.omega:12.9f} {p.residual:10.2e} {p.amp_dev:10.3e} {p.accepted}")
    ok = [p for p in br.points if p.accepted]
    if len(ok) >= 2:
        slope = np.polyfit(np.log([p.delta for p in ok]), np.log([p.amp_dev for p in ok]), 1)[0]
        print(f"log-log slope of ||u~ - delta u0||: {slope:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(br.csv())


if __name__ == "__main__":
    main()
