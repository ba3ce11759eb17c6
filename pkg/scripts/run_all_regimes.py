"""Remainder ratio curves for every model config, one summary row each.

    python scripts/run_all_regimes.py [--h 0.05] [--xmax 2e4] [--out out/regimes]

Writes one ratio CSV per model and prints the ratio at x_max/10 and x_max
next to the limiting constant.
"""

import argparse
from pathlib import Path

from renewal_remainder.config import read_kv
from renewal_remainder.gridconv import Grid
from renewal_remainder.laplace import m4_constant
from renewal_remainder.renewal import classify_regime, renewal_grid, theorem1_report
from renewal_remainder.tailmodel import Lattice, model_from_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
MODELS = ("exponential", "pareto_b025", "pareto_b05", "pareto_b075", "log_pareto_p1")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--xmax", type=float, default=None, help="default: the value in each config")
    p.add_argument("--out", type=Path, default=Path("out/regimes"))
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    print(f"{'model':<16}{'regime':<8}{'x_max':>10}{'ratio@x_max/10':>16}{'ratio@x_max':>14}{'target':>10}")
    for name in MODELS:
        cfg = read_kv(CONFIGS / f"{name}.cfg")
        model = model_from_config(cfg)
        if isinstance(model, Lattice):
            continue
        x_max = args.xmax or float(cfg.get("x_max", 1e4))
        grid = Grid.for_model(model, args.h, x_max)
        regime = classify_regime(model)
        target = m4_constant(model).value if regime == "m4" else None
        rep = theorem1_report(model, grid, solution=renewal_grid(model, grid), m4_target=target)
        rep.to_csv(args.out / f"{name}.csv", stride=max(1, grid.n // 2000))
        early = rep.ratio[grid.index(grid.x_max / 10)]
        print(f"{name:<16}{rep.regime:<8}{grid.x_max:>10.4g}{early:>16.5g}{rep.ratio[-1]:>14.5g}{rep.target:>10.4g}")


if __name__ == "__main__":
    main()
