"""Ladder heights of the skip-free lattice walk {+2: 2/3, -1: 1/3}.

    python scripts/ladder_demo.py [--npaths 200000] [--seed 1]

Compares the Monte Carlo ladder constant and occupation measure with the
exact dynamic-programming values (C = √3 for this walk).
"""

import argparse
import math

import numpy as np

from renewal_remainder.ladder import SignedLattice, ladder_lattice_exact, simulate_ladders


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--npaths", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--nmax", type=int, default=50)
    args = p.parse_args()

    walk = SignedLattice({2: 2 / 3, -1: 1 / 3})
    exact = ladder_lattice_exact(walk, args.nmax)
    est = simulate_ladders(walk, args.npaths, seed=args.seed, occ_max=args.nmax)

    print(f"C exact      {exact.C:.8f}   (sqrt 3 = {math.sqrt(3):.8f})")
    print(f"C Monte Carlo {est.C:.5f} ± {est.stderr_C:.5f}")
    print(f"m_up exact   {exact.m_up:.8f}   C·m = {exact.C * walk.mean:.8f}")
    print(f"identity residual max {exact.identity_residual().max():.2e}")
    n = np.arange(1, args.nmax + 1)
    z = (est.U_hat[n] - np.cumsum(exact.u)[n]) / est.U_hat_stderr[n]
    print(f"occupation z-scores: max |z| = {np.abs(z).max():.2f} over n <= {args.nmax}")


if __name__ == "__main__":
    main()
