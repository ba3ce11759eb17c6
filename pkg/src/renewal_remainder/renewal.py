"""Renewal function U, the remainder V and its ratio curves.

On a grid the step law is mapped to a lattice law by linear (hat) weights.
The weights preserve mass and mean exactly and need only Φ̄, since
E(X - a)^+ = mΦ̄(a).  The lattice renewal measure is then solved exactly,
and U at grid points takes half the mass sitting on the point itself.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .gridconv import Grid, GridError, GridFn, cumulative_integral, gbar as gbar_fn
from .specfun import c_alpha
from .tailmodel import Lattice, TailModel


class SolverInstability(RuntimeError):
    def __init__(self, index: int, what: str = "negative increment of U"):
        super().__init__(f"{what} at grid index {index}")
        self.index = index


class RegimeError(ValueError):
    pass


def renewal_lattice(pmf: dict[int, float], n_max: int) -> np.ndarray:
    """Renewal masses u_0..u_{n_max} of a pmf on the positive integers."""
    lat = Lattice(pmf)
    ks = np.array([k for k, _ in lat.pmf], dtype=np.int64)
    ps = np.array([p for _, p in lat.pmf])
    return _kernels.pmf_renewal(ks, ps, int(n_max))


def hat_weights(model: TailModel, grid: Grid) -> np.ndarray:
    """w_k = E max(0, 1 - |X/h - k|) for k = 0..n."""
    h, m = grid.h, model.mean
    pb = np.asarray(model.phi_bar(np.arange(grid.n + 2) * h))
    w = np.empty(grid.n + 1)
    w[0] = (h - m * (1.0 - pb[1])) / h
    w[1:] = (m / h) * ((pb[:-2] - pb[1:-1]) - (pb[1:-1] - pb[2:]))[: grid.n]
    return w


@dataclass(frozen=True, eq=False)
class RenewalSolution:
    grid: Grid
    model: TailModel
    U: np.ndarray
    V15: np.ndarray
    Vb: np.ndarray | None = None

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def route_gap(self) -> float:
        """max |V15 - Vb|."""
        if self.Vb is None:
            return math.nan
        return float(np.max(np.abs(self.V15 - self.Vb)))

    @property
    def route_constant(self) -> float:
        """Smallest C with |V15 - Vb| <= C h² (1 + x) on the grid."""
        if self.Vb is None:
            return math.nan
        return float(np.max(np.abs(self.V15 - self.Vb) / (self.grid.h**2 * (1.0 + self.x))))


def stieltjes_against_u(U: np.ndarray, q: np.ndarray) -> np.ndarray:
    """∫_[0,x_i] q(x_i - y) U(dy): atom U(0) plus increments against midpoints of q."""
    dU = np.diff(U)
    qm = 0.5 * (q[1:] + q[:-1])
    out = U[0] * q.astype(float)
    out[1:] += _kernels.causal_conv(dU, qm)
    return out


def renewal_u(model: TailModel, grid: Grid) -> np.ndarray:
    if isinstance(model, Lattice):
        raise GridError("use renewal_lattice for lattice models")
    w = hat_weights(model, grid)
    bad = w < -1e-12
    if bad.any():
        raise SolverInstability(int(np.flatnonzero(bad)[0]), "negative lattice weight")
    # rounding residue of exact zeros (no mass near 0)
    w = np.maximum(w, 0.0)
    r = _kernels.lattice_renewal(w)
    U = np.cumsum(r) - 0.5 * r
    U[0] = 1.0
    bad = ~np.isfinite(U)
    if bad.any():
        raise SolverInstability(int(np.flatnonzero(bad)[0]), "overflow in U")
    dec = np.diff(U) < 0
    if dec.any():
        raise SolverInstability(int(np.flatnonzero(dec)[0]) + 1)
    return U


def remainder_v15(sol_or_model, grid: Grid | None = None, U: np.ndarray | None = None) -> np.ndarray:
    """V(x) = m U(x) - x - Φ̄̄(x)."""
    if isinstance(sol_or_model, RenewalSolution):
        model, grid, U = sol_or_model.model, sol_or_model.grid, sol_or_model.U
    else:
        model = sol_or_model
    x = grid.x
    return model.mean * U - x - np.asarray(model.phi_bar_int(x))


def remainder_vb(sol: RenewalSolution, gbar: GridFn) -> np.ndarray:
    """V(x) = m ∫_[0,x) G̅(x - y) U(dy)."""
    if gbar.grid != sol.grid:
        raise GridError(f"grid mismatch: {gbar.grid} vs {sol.grid}")
    return sol.model.mean * stieltjes_against_u(sol.U, gbar.values)


def renewal_grid(model: TailModel, grid: Grid, gbar: GridFn | None = None,
                 with_vb: bool = True) -> RenewalSolution:
    U = renewal_u(model, grid)
    sol = RenewalSolution(grid, model, U, remainder_v15(model, grid, U))
    if not with_vb:
        return sol
    gb = gbar if gbar is not None else gbar_fn(model, grid)
    return RenewalSolution(grid, model, U, sol.V15, remainder_vb(sol, gb))


def sgibnev_ratio(sol: RenewalSolution, Q: GridFn, min_growth: float = 100.0) -> np.ndarray:
    """m ∫_0^x Q(x-y) dU(y) / ∫_0^x Q, per grid point (NaN at 0)."""
    if Q.grid != sol.grid:
        raise GridError(f"grid mismatch: {Q.grid} vs {sol.grid}")
    q = Q.values
    if np.any(q < 0) or np.any(np.diff(q) > 1e-15 * max(1.0, q[0])):
        raise ValueError("Q must be non-negative and non-increasing")
    A = cumulative_integral(Q).values
    if A[-1] < min_growth * q[0]:
        warnings.warn(
            f"A(x_max) = {A[-1]:.3g} is not large against Q(0) = {q[0]:.3g}; "
            "divergence of A cannot be checked on this grid",
            RuntimeWarning, stacklevel=2,
        )
    num = sol.model.mean * stieltjes_against_u(sol.U, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / A
    out[0] = np.nan
    return out


def second_order_ratio(sol: RenewalSolution) -> np.ndarray:
    """V(x)/Φ̄̄(x), which tends to 0 for every heavy-tailed family."""
    pbi = np.asarray(sol.model.phi_bar_int(sol.x))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sol.V15 / pbi
    out[0] = np.nan
    return out


REGIMES = ("m2", "m3", "m4", "light")


def classify_regime(model: TailModel) -> str:
    beta = model.beta
    if beta is None:
        return "light"
    if beta != 0.5:
        return "m2"
    return "m4" if model.phi_bar_sq_integrable else "m3"


def phi_bar_sq_integral(model: TailModel, grid: Grid) -> np.ndarray:
    """x_i ↦ ∫_0^{x_i} Φ̄²."""
    x = grid.x
    pb = np.asarray(model.phi_bar(x))
    f = GridFn(grid, pb * pb, -2.0 * pb * np.asarray(model.phi(x)))
    return cumulative_integral(f).values


@dataclass(frozen=True, eq=False)
class Theorem1Report:
    regime: str
    target: float
    solution: RenewalSolution
    normalizer: np.ndarray
    ratio: np.ndarray

    COLUMNS = ("x", "U", "V15", "Vb", "normalizer", "ratio", "target")

    def table(self) -> np.ndarray:
        s = self.solution
        vb = s.Vb if s.Vb is not None else np.full_like(s.U, np.nan)
        return np.column_stack([s.x, s.U, s.V15, vb, self.normalizer, self.ratio,
                                np.full_like(s.U, self.target)])

    def to_csv(self, path: str | Path | None = None, stride: int = 1) -> str:
        buf = io.StringIO()
        rows = self.table()
        keep = np.arange(0, rows.shape[0], max(1, stride))
        if keep[-1] != rows.shape[0] - 1:
            keep = np.append(keep, rows.shape[0] - 1)
        np.savetxt(buf, rows[keep], fmt="%.17g", delimiter=",",
                   header=",".join(self.COLUMNS), comments="")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def theorem1_report(model: TailModel, grid: Grid, regime: str | None = None,
                    solution: RenewalSolution | None = None,
                    m4_target: float | None = None) -> Theorem1Report:
    """Ratio of V to the regime's normaliser, with the limiting constant.

    m2: x Φ̄² with target c_α/(1-2β); m3: ∫_0^x Φ̄² with target 0;
    m4: V itself against ∫_0^∞ G̅; light tails: V itself against 0.
    """
    actual = classify_regime(model)
    if regime is not None and regime != actual:
        raise RegimeError(f"model is in regime {actual}, not {regime}")
    sol = solution if solution is not None else renewal_grid(model, grid)
    if sol.grid != grid or sol.model != model:
        raise GridError("solution was computed for a different model or grid")
    x = grid.x
    if actual == "m2":
        beta = model.beta
        norm = x * np.asarray(model.phi_bar(x)) ** 2
        target = c_alpha(beta) / (1.0 - 2.0 * beta)
    elif actual == "m3":
        norm = phi_bar_sq_integral(model, grid)
        target = 0.0
    else:
        norm = np.ones_like(x)
        if actual == "m4":
            if m4_target is None:
                from .laplace import m4_constant

                m4_target = m4_constant(model).value
            target = float(m4_target)
        else:
            target = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = sol.V15 / norm
    ratio[norm == 0] = np.nan
    return Theorem1Report(actual, target, sol, norm, ratio)
