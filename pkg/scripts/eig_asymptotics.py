"""Normalized eigenvalue deviation r_j = j |lambda_kj - j^2 - eps M| / (|eps| ||a0||)
for a few potentials, to check that it stays bounded as j grows.

    python scripts/eig_asymptotics.py --eps 0.02 --J 200
"""

import argparse

import numpy as np

from resonant_wave.linearized_inverse import check_asymptotics, sl_spectrum
from resonant_wave.nonlinearity import CoeffProfile, melnikov_M

POTENTIALS = {
    "0": CoeffProfile(),
    "1": CoeffProfile.constant(1.0),
    "sin x": CoeffProfile(sin=(1.0,)),
    "cos 2x": CoeffProfile(cos=(0.0, 0.0, 1.0)),
    "x": CoeffProfile(poly=(0.0, 1.0)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.02)
    ap.add_argument("--J", type=int, default=200)
    ap.add_argument("--k", type=int, nargs="+", default=[0, 1, 2, 3])
    args = ap.parse_args()

    print(f"{'a0':>8} {'k':>3} {'sup r':>10} {'slope':>8} {'r_J/2':>10} {'r_0.9J':>10} passed")
    for name, a0 in POTENTIALS.items():
        M = 0.0 if a0.is_zero() else melnikov_M(a0)
        for k in args.k:
            rep = check_asymptotics(sl_spectrum(args.eps, a0, k, args.J), args.eps, M, a0)
            lo, hi = rep.window
            r_lo = rep.r[np.argmin(np.abs(rep.j - lo))]
            r_hi = rep.r[np.argmin(np.abs(rep.j - hi))]
            print(f"{name:>8} {k:3d} {rep.sup:10.3e} {rep.slope:8.3f} {r_lo:10.3e} {r_hi:10.3e} {rep.passed}")


if __name__ == "__main__":
    main()
