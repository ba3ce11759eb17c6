"""Higher-order terms G̅_r and the series for the transform of U.

    python scripts/expansion_demo.py [--alpha 1.5] [--rmax 4] [--xmax 4000]

Prints the transform residuals |λ∫e^{-λx}G̅_r - (1 - φ̂(λ))^r| per term and
the partial sums of the transform series with their gap to the limit.
"""

import argparse

from renewal_remainder.gridconv import Grid, expansion_terms, sample_fn
from renewal_remainder.laplace import term_residuals, u_hat_expansion
from renewal_remainder.tailmodel import Pareto


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--rmax", type=int, default=4)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--xmax", type=float, default=4000.0)
    args = p.parse_args()

    model = Pareto(args.alpha, 1.0)
    grid = Grid.for_model(model, args.h, args.xmax)
    lams = [0.01, 0.1, 1.0]
    terms = [sample_fn(model, grid, "phi_bar")] + [gb for _, gb in expansion_terms(model, grid, args.rmax)]
    resid = term_residuals(terms, model, lams)
    print("lambda  " + "  ".join(f"r={r:<7d}" for r in range(1, args.rmax + 1)))
    for lam, row in zip(lams, resid):
        print(f"{lam:<7g} " + "  ".join(f"{v:.2e}" for v in row))
    for lam in lams:
        e = u_hat_expansion(model, lam, args.rmax)
        gaps = ", ".join(f"{g:.3g}" for g in e.limit - e.partial)
        print(f"lambda={lam:g}: limit {e.limit:.6g}, gaps by R {gaps}")


if __name__ == "__main__":
    main()
