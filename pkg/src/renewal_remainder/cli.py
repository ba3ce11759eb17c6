"""Command-line front end.

    renewal-remainder constants  [--betas 0.1,0.25,...]
    renewal-remainder remainder  --config model.cfg [--h H] [--xmax X]
    renewal-remainder ladder     --config walk.cfg  [--seed N] [--npaths N] [--horizon T] [--strict]
    renewal-remainder expansion  --config model.cfg [--h H] [--xmax X]

Configs are ``key = value`` files; flags override config keys.  Each run
writes CSV tables and ``manifest.json`` into ``--out``.  The manifest holds
every parameter, the package version and the tolerances achieved; it carries
no timestamps, so identical inputs give byte-identical output.

Grid defaults when ``h``/``x_max`` are not given:

    light tails            h = 0.05, x_max = 100
    regime m2              h = 0.05, x_max = 1e4
    regimes m3, m4         h = 0.05, x_max = 2e4
    expansion              h = 0.05, x_max = 4000

Exit codes: 2 parse/config error, 3 domain error, 4 solver instability or
overflow, 5 horizon warning under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _kernels, laplace, ladder, renewal, specfun
from .config import ConfigError, as_float, as_int, parse_pmf, read_kv
from .gridconv import Grid, GridOverflow, expansion_terms, normalization_check, sample_fn
from .tailmodel import Lattice, model_from_config

EXIT_PARSE, EXIT_DOMAIN, EXIT_UNSTABLE, EXIT_HORIZON = 2, 3, 4, 5

DEFAULT_BETAS = "0.1,0.2,0.25,0.3,0.4,0.5,0.6,0.7,0.75,0.8,0.9"
GRID_DEFAULTS = {"light": (0.05, 100.0), "m2": (0.05, 1e4), "m3": (0.05, 2e4), "m4": (0.05, 2e4)}
MAX_ROWS = 2000


class StrictHorizon(RuntimeError):
    pass


def version() -> str:
    try:
        return metadata.version("renewal-remainder")
    except metadata.PackageNotFoundError:
        return "unknown"


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _load(args) -> dict[str, str]:
    cfg = read_kv(args.config) if getattr(args, "config", None) else {}
    overrides = {"h": "h", "xmax": "x_max", "seed": "seed", "npaths": "n_paths", "horizon": "horizon"}
    for flag, key in overrides.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def _write(out: Path, name: str, text: str, written: list[str]) -> None:
    (out / name).write_text(text)
    written.append(name)


def _manifest(out: Path, command: str, params: dict, results: dict, written: list[str]) -> None:
    doc = {"command": command, "version": version(), "parameters": params,
           "results": results, "outputs": sorted(written)}
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True, default=_jsonable) + "\n"
    (out / "manifest.json").write_text(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _grid_params(cfg, regime_key: str) -> tuple[float, float]:
    h0, x0 = GRID_DEFAULTS.get(regime_key, (0.05, 4000.0))
    return as_float(cfg, "h", h0), as_float(cfg, "x_max", x0)


# ---------------------------------------------------------------- commands


def cmd_constants(args, out: Path) -> dict:
    betas = _floats(args.betas)
    rows = []
    for b in betas:
        c = specfun.c_alpha(b)
        resid = max(abs(c - specfun.c_alpha_quadrature(b)), abs(c - specfun.c_alpha_identity(b)))
        rows.append([b, c, specfun.i_alpha(b), specfun.j_alpha(b), resid])
    written: list[str] = []
    _write(out, "constants.csv", ladder._write_csv(np.array(rows), (
        "beta", "c_alpha", "I_alpha", "J_alpha", "identity_residual")), written)
    results = {"max_identity_residual": max(r[-1] for r in rows)}
    _manifest(out, "constants", {"betas": betas}, results, written)
    return results


def _lattice_remainder(model: Lattice, cfg, out: Path) -> dict:
    n_max = as_int(cfg, "n_max", 1000)
    u = renewal.renewal_lattice(model.as_dict(), n_max)
    x = np.arange(n_max + 1, dtype=float)
    U = np.cumsum(u)
    V = model.mean * U - x - np.asarray(model.phi_bar_int(x))
    written: list[str] = []
    _write(out, "remainder.csv", ladder._write_csv(np.column_stack([x, U, V]), ("x", "U", "V15")), written)
    results = {"regime": "light", "u_last": float(u[-1]), "inverse_mean": 1.0 / model.mean}
    params = {**model.config_items(), "n_max": n_max}
    _manifest(out, "remainder", params, results, written)
    return results


def cmd_remainder(args, out: Path) -> dict:
    cfg = _load(args)
    model = model_from_config(cfg)
    if isinstance(model, Lattice):
        return _lattice_remainder(model, cfg, out)
    regime = renewal.classify_regime(model)
    h, x_max = _grid_params(cfg, regime)
    grid = Grid.for_model(model, h, x_max)
    sol = renewal.renewal_grid(model, grid)
    m4_target = None
    if regime == "m4":
        m4_target = laplace.m4_constant(model).value
    rep = renewal.theorem1_report(model, grid, solution=sol, m4_target=m4_target)
    stride = as_int(cfg, "stride", max(1, grid.n // MAX_ROWS))
    written: list[str] = []
    _write(out, "remainder.csv", rep.to_csv(stride=stride), written)
    i_end, i_dec = grid.n, grid.index(grid.x_max / 10.0)
    results = {
        "regime": rep.regime,
        "target": rep.target,
        "ratio_at_x_max": float(rep.ratio[i_end]),
        "ratio_one_decade_earlier": float(rep.ratio[i_dec]),
        "route_gap": sol.route_gap,
        "route_constant": sol.route_constant,
        "grid_h": grid.h,
        "grid_n": grid.n,
    }
    params = {**model.config_items(), "h": h, "x_max": x_max, "stride": stride}
    _manifest(out, "remainder", params, results, written)
    return results


def _walk_from_config(cfg):
    kind = cfg.get("walk", "shifted")
    if kind == "lattice":
        if "pmf" not in cfg:
            raise ConfigError("lattice walk needs a pmf")
        return ladder.SignedLattice(parse_pmf(cfg["pmf"]))
    if kind != "shifted":
        raise ConfigError(f"walk must be 'shifted' or 'lattice', got {kind!r}")
    return ladder.ShiftedTail(model_from_config(cfg), as_float(cfg, "shift", 0.0))


def cmd_ladder(args, out: Path) -> dict:
    cfg = _load(args)
    walk = _walk_from_config(cfg)
    n_paths = as_int(cfg, "n_paths", 100_000)
    seed = as_int(cfg, "seed", 0)
    horizon = as_int(cfg, "horizon") if "horizon" in cfg else None
    occ_step = as_float(cfg, "occ_step", 1.0)
    occ_max = as_float(cfg, "occ_max", 100.0)
    k_mode = cfg.get("K_mode", "auto")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = ladder.simulate_ladders(walk, n_paths, horizon=horizon, seed=seed,
                                      occ_step=occ_step, occ_max=occ_max)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    horizon_msgs = [str(w.message) for w in caught if issubclass(w.category, ladder.HorizonWarning)]
    if horizon_msgs and args.strict:
        raise StrictHorizon(horizon_msgs[0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = ladder.v_tilde_report(est, K_mode=k_mode)
    other_msgs = [str(w.message) for w in caught]
    for msg in other_msgs:
        print(f"warning: {msg}", file=sys.stderr)

    written: list[str] = []
    _write(out, "ladder_summary.csv", est.summary_csv(), written)
    _write(out, "occupation.csv", est.occupation_csv(), written)
    _write(out, "v_tilde.csv", rep.to_csv(), written)
    results = {
        "C": est.C, "stderr_C": est.stderr_C, "m_up": est.m_up, "m_up_from_C": est.m_up_from_C,
        "defect_prob": est.defect_prob, "horizon": est.horizon,
        "horizon_bound": est.horizon_bound, "regime": rep.regime, "K": rep.K, "K_mode": rep.K_mode,
        "warnings": horizon_msgs + other_msgs,
    }
    if not walk.lattice:
        z = np.geomspace(as_float(cfg, "z_min", 1.0), as_float(cfg, "z_max", 1000.0), 25)
        up = np.asarray(ladder.phi_bar_up(est, z))
        base = np.asarray(walk.phi_bar(z))
        _write(out, "phi_bar_up.csv",
               ladder._write_csv(np.column_stack([z, up, base, up / base]),
                                 ("z", "phi_bar_up", "phi_bar", "ratio")), written)
    else:
        n_max = min(as_int(cfg, "n_max", 200), int(occ_max))
        exact = ladder.ladder_lattice_exact(walk, n_max)
        _write(out, "identity_residual.csv", exact.residual_csv(), written)
        U_dp = np.cumsum(exact.u)
        k = np.arange(n_max + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(est.U_hat[k] - U_dp) / est.U_hat_stderr[k]
        results.update({
            "identity_residual_max": float(exact.identity_residual().max()),
            "C_exact": exact.C, "m_up_exact": exact.m_up,
            "C_identity_gap": abs(exact.C * walk.mean - exact.m_up),
            "occupation_max_z": float(np.nanmax(z[1:])),
        })
    params = {key: cfg[key] for key in sorted(cfg)}
    params.update({"n_paths": n_paths, "seed": seed, "horizon": est.horizon,
                   "occ_step": est.occ_step, "occ_max": occ_max, "K_mode": k_mode})
    _manifest(out, "ladder", params, results, written)
    return results


def cmd_expansion(args, out: Path) -> dict:
    cfg = _load(args)
    model = model_from_config(cfg)
    if isinstance(model, Lattice):
        raise ValueError("the expansion runs on continuous models")
    r_max = as_int(cfg, "r_max", 4)
    if not 2 <= r_max <= 6:
        raise ValueError(f"r_max must lie in [2, 6], got {r_max}")
    lambdas = _floats(cfg.get("lambdas", "0.01,0.1,1"))
    h, x_max = _grid_params(cfg, "expansion")
    grid = Grid.for_model(model, h, x_max)
    terms = expansion_terms(model, grid, r_max)
    gbars = [sample_fn(model, grid, "phi_bar")] + [gb for _, gb in terms]
    resid = laplace.term_residuals(gbars, model, lambdas)
    stride = as_int(cfg, "stride", max(1, grid.n // MAX_ROWS))
    keep = ladder._stride_index(grid.n + 1, stride)
    written: list[str] = []
    cols = ("x",) + tuple(f"gbar_{r}" for r in range(2, r_max + 1))
    rows = np.column_stack([grid.x] + [gb.values for _, gb in terms])[keep]
    _write(out, "gbar_r.csv", ladder._write_csv(rows, cols), written)
    cols = ("lambda",) + tuple(f"residual_{r}" for r in range(1, r_max + 1))
    _write(out, "transform_residuals.csv",
           ladder._write_csv(np.column_stack([lambdas, resid]), cols), written)
    exp_rows = []
    monotone, within = True, True
    for lam in lambdas:
        e = laplace.u_hat_expansion(model, lam, r_max)
        monotone &= e.monotone()
        within &= e.within_gap()
        for R, (part, gap) in enumerate(zip(e.partial, e.gap_bound)):
            exp_rows.append([lam, R, part, e.limit, gap])
    _write(out, "u_hat_partial_sums.csv", ladder._write_csv(
        np.array(exp_rows), ("lambda", "R", "partial_sum", "limit", "gap_bound")), written)
    results = {
        "gbar_r_at_0": [float(gb.values[0]) for _, gb in terms],
        "normalization_error": [abs(normalization_check(g, gb) - 1.0) for g, gb in terms],
        "max_transform_residual": float(resid.max()),
        "partial_sums_monotone": bool(monotone),
        "partial_sums_within_gap": bool(within),
        "grid_h": grid.h, "grid_n": grid.n,
    }
    params = {**model.config_items(), "h": h, "x_max": x_max, "r_max": r_max,
              "lambdas": lambdas, "stride": stride}
    _manifest(out, "expansion", params, results, written)
    return results


COMMANDS = {"constants": cmd_constants, "remainder": cmd_remainder,
            "ladder": cmd_ladder, "expansion": cmd_expansion}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renewal-remainder", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--out", default=f"out/{name}", help="output directory")
        if name == "constants":
            s.add_argument("--betas", default=DEFAULT_BETAS, help="comma-separated tail indices")
            continue
        s.add_argument("--config", required=True, help="key = value config file")
        if name in ("remainder", "expansion"):
            s.add_argument("--h", type=float)
            s.add_argument("--xmax", type=float)
        if name == "ladder":
            s.add_argument("--seed", type=int)
            s.add_argument("--npaths", type=int)
            s.add_argument("--horizon", type=int)
            s.add_argument("--strict", action="store_true",
                           help="treat horizon warnings as errors (exit 5)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _kernels.set_threads()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except StrictHorizon as e:
        print(f"horizon warning (strict): {e}", file=sys.stderr)
        return EXIT_HORIZON
    except (renewal.SolverInstability, GridOverflow, ladder.TruncationError,
            specfun.QuadratureError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ValueError, OSError) as e:
        print(f"domain error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())
