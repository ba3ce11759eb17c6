"""Laplace transforms of φ, g and the expansion terms G̅_r.

Transforms of φ go through 1 - φ̂(λ) = λ∫ e^{-λx} Φ̄(x) dx, which stays well
conditioned as λ → 0.  Write q(λ) = 1 - φ̂(λ); then 1 - ĝ_r = q^r and
λ∫ e^{-λx} G̅_r = q^r.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import singledispatch
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .gridconv import GridFn
from .specfun import QuadratureError
from .tailmodel import Exponential, Lattice, LogPareto, Pareto, TailModel


@dataclass(frozen=True)
class TransformPoint:
    lam: float
    value: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    return lam


def _one_minus_exp_over(z: float) -> float:
    """(1 - e^-z)/z."""
    return 1.0 if z == 0 else -math.expm1(-z) / z


def _second_order_exp(z: float) -> float:
    """(1 - e^-z (1 + z))/z², by series for small z."""
    if z < 0.1:
        term, total = 0.5, 0.0
        for k in range(25):
            total += term * (k + 1)
            term *= -z / (k + 3)
        return total
    return -(math.expm1(-z) + z * math.exp(-z)) / (z * z)


def _exp_excess(z):
    """e^-z - 1 + z, accurate for small z."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(zs)
    term = zs * zs / 2.0
    for k in range(2, 20):
        series += term
        term = -term * zs / (k + 1)
    direct = np.expm1(-np.where(small, 0.0, z)) + np.where(small, 0.0, z)
    return np.where(small, series, direct)


def _below_scale(lam: float, x0: float, m: float) -> float:
    """λ ∫_0^{x0} e^{-λx}(1 - x/m) dx."""
    z = lam * x0
    return z * _one_minus_exp_over(z) - (z * x0 / m) * _second_order_exp(z)


@singledispatch
def one_minus_phi_hat(model: TailModel, lam: float) -> float:
    """q(λ) = 1 - φ̂(λ)."""
    raise TypeError(f"no transform for {type(model).__name__}")


@one_minus_phi_hat.register
def _(model: Exponential, lam: float) -> float:
    lam = _check_lam(lam)
    return lam / (model.rate + lam)


@one_minus_phi_hat.register
def _(model: Pareto, lam: float) -> float:
    lam = _check_lam(lam)
    a, x0, m = model.alpha, model.x0, model.mean
    b = a - 1.0
    # above x0: λ x0^α/(m b) ∫_{x0}^∞ e^{-λx} x^{-b} dx
    upper = special.gammaincc(1.0 - b, lam * x0) * special.gamma(1.0 - b)
    above = x0**a / (m * b) * lam**b * upper
    return _below_scale(lam, x0, m) + above


@one_minus_phi_hat.register
def _(model: LogPareto, lam: float) -> float:
    lam = _check_lam(lam)
    x0, m = model.x0, model.mean
    z0 = lam * x0

    def f(t):
        return math.exp(-t) * float(model.phi_bar(t / lam))

    total, err = 0.0, 0.0
    edges = [z0] + [e for e in (1.0, 10.0) if e > z0] + [math.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=400)
        total += v
        err += e
    if err > 1e-10 * total:
        raise QuadratureError("log-pareto transform", err, 1e-10 * total)
    return _below_scale(lam, x0, m) + total


@one_minus_phi_hat.register
def _(model: Lattice, lam: float) -> float:
    lam = _check_lam(lam)
    ks = np.array([k for k, _ in model.pmf], dtype=float)
    ps = np.array([p for _, p in model.pmf])
    return float(np.dot(ps, _exp_excess(lam * ks)) / (model.mean * lam))


def phi_hat(model: TailModel, lam: float) -> float:
    return 1.0 - one_minus_phi_hat(model, lam)


def step_mgf_negative(model: TailModel, theta: float) -> float:
    """E e^{-θX} = 1 - θ m φ̂(θ)."""
    return 1.0 - theta * model.mean * phi_hat(model, theta)


def grid_transform(f: GridFn, lam: float, tail_tol: float = 1e-9) -> float:
    """∫_0^{x_max} e^{-λx} f(x) dx, with the h² correction when slopes are known.

    Raises if e^{-λ x_max} is too large for the truncation to be harmless.
    """
    lam = _check_lam(lam)
    grid = f.grid
    if math.exp(-lam * grid.x_max) > tail_tol:
        raise ValueError(f"grid too short for lambda={lam}: e^(-lambda x_max) > {tail_tol}")
    h, x = grid.h, grid.x
    e = np.exp(-lam * x)
    F = e * f.values
    total = h * (math.fsum(F) - 0.5 * (F[0] + F[-1]))
    if f.slope is not None:
        d = e * (f.slope - lam * f.values)
        jumps = sum(math.exp(-lam * x[c]) * dj for c, dj in f.kinks if 0 < c < grid.n)
        total -= h * h / 12.0 * (d[-1] - d[0] - jumps)
    return total


@singledispatch
def one_minus_g_hat_closed(model: TailModel, lam: float) -> float:
    raise NotImplementedError(f"no closed-form ĝ for {type(model).__name__}")


@one_minus_g_hat_closed.register
def _(model: Exponential, lam: float) -> float:
    # ĝ = 2φ̂ - φ̂² with φ̂ = μ/(μ+λ)
    mu = model.rate
    lam = _check_lam(lam)
    return 1.0 - (2.0 * mu / (mu + lam) - mu * mu / (mu + lam) ** 2)


def g_hat_identity_residual(model: TailModel, lambdas, g: GridFn | None = None) -> float:
    """max over λ of |(1 - ĝ(λ)) - (1 - φ̂(λ))²|.

    ĝ comes from the grid function ``g`` when given, otherwise from a
    closed form (exponential only).
    """
    worst = 0.0
    for lam in np.atleast_1d(lambdas):
        lam = float(lam)
        lhs = 1.0 - grid_transform(g, lam) if g is not None else one_minus_g_hat_closed(model, lam)
        worst = max(worst, abs(lhs - one_minus_phi_hat(model, lam) ** 2))
    return worst


@dataclass(frozen=True)
class CriterionSequence:
    lambdas: np.ndarray
    values: np.ndarray
    trend: str
    in_regime: bool

    def points(self) -> list[TransformPoint]:
        return [TransformPoint(float(a), float(b)) for a, b in zip(self.lambdas, self.values)]


def classify_trend(values, flat_tol: float = 0.02) -> str:
    """'to-zero', 'to-positive-constant' or 'diverging' for a sequence at decreasing λ.

    The last step decides: relative change under ``flat_tol`` reads as
    settling on a constant; otherwise the sign of the change decides.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("need at least three values to classify a trend")
    last = (v[-1] - v[-2]) / abs(v[-2])
    if abs(last) <= flat_tol and v[-1] > 0:
        return "to-positive-constant"
    if last < 0 and np.all(np.diff(v[-3:]) < 0):
        return "to-zero"
    if last > 0:
        return "diverging"
    return "to-positive-constant"


def remark1_criterion(model: TailModel, lambdas) -> CriterionSequence:
    """(1 - φ̂(λ))/√λ along decreasing λ."""
    lams = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lams) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    vals = np.array([one_minus_phi_hat(model, lam) / math.sqrt(lam) for lam in lams])
    return CriterionSequence(lams, vals, classify_trend(vals), model.beta == 0.5)


@dataclass(frozen=True)
class M4Estimate:
    value: float
    by_order: tuple[float, ...]
    variable: str
    lambdas: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    stable: bool = True
    spread: float = 0.0


def _extrapolation_variable(model: TailModel):
    beta = model.beta
    if beta is None:
        return "lambda", lambda lam: lam
    if beta < 0.5:
        from .renewal import RegimeError

        raise RegimeError(f"(1-ĝ(λ))/λ diverges for beta = {beta} < 1/2")
    if beta > 0.5:
        e = 2.0 * beta - 1.0
        return f"lambda^{e!r}", lambda lam: lam**e
    p = model.log_power
    if p > 0:
        return f"log(1/lambda)^-{2 * p!r}", lambda lam: math.log(1.0 / lam) ** (-2.0 * p)
    return "lambda^0.5", math.sqrt


def m4_constant(model: TailModel, lambdas=None, orders=(1, 2, 3), rel_tol: float = 0.01,
                abs_tol: float = 1e-12) -> M4Estimate:
    """λ → 0 limit of q(λ)²/λ = ∫_0^∞ e^{-λx} G̅(x) dx, by polynomial extrapolation.

    The extrapolation variable t(λ) follows the leading correction for the
    family.  Each order d interpolates the d + 1 smallest-λ samples as a
    polynomial in t and reads off t = 0; the spread across orders is the
    stability check.
    """
    lams = np.geomspace(1e-2, 1e-8, 13) if lambdas is None else np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lams) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    name, tfun = _extrapolation_variable(model)
    samples = np.array([one_minus_phi_hat(model, lam) ** 2 / lam for lam in lams])
    t = np.array([tfun(lam) for lam in lams])
    values = []
    for d in orders:
        if d + 1 > lams.size:
            raise ValueError(f"order {d} needs {d + 1} samples")
        tt, yy = t[-(d + 1):], samples[-(d + 1):]
        coef = np.polyfit(tt, yy, d)
        values.append(float(coef[-1]))
    best = values[-1]
    spread = max(values) - min(values)
    stable = spread <= max(rel_tol * abs(best), abs_tol)
    return M4Estimate(best, tuple(values), name, lams, samples, stable, spread)


@dataclass(frozen=True)
class TailFit:
    integral: float
    grid_part: float
    tail_part: float
    exponent: float
    amplitude: float


def direct_gbar_integral(gbar: GridFn, fit_from: float | None = None) -> TailFit:
    """∫_0^∞ G̅: grid integral to x_max plus a power-law tail a·x^-γ fitted on the last decade."""
    from .gridconv import cumulative_integral

    grid = gbar.grid
    x = grid.x
    grid_part = float(cumulative_integral(gbar).values[-1])
    lo = fit_from if fit_from is not None else grid.x_max / 10.0
    sel = x >= lo
    y = gbar.values[sel]
    if np.any(y == 0) or not (np.all(y > 0) or np.all(y < 0)):
        return TailFit(math.nan, grid_part, math.nan, math.nan, math.nan)
    sign = 1.0 if y[0] > 0 else -1.0
    slope, icpt = np.polyfit(np.log(x[sel]), np.log(sign * y), 1)
    gamma = -slope
    amp = sign * math.exp(icpt)
    if gamma <= 1.0:
        return TailFit(math.nan, grid_part, math.inf * sign, gamma, amp)
    X = grid.x_max
    tail = amp * X ** (1.0 - gamma) / (gamma - 1.0)
    return TailFit(grid_part + tail, grid_part, tail, gamma, amp)


@dataclass(frozen=True)
class Expansion:
    lam: float
    partial: np.ndarray  # Û_R for R = 0..R_max
    limit: float
    gap_bound: np.ndarray

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.partial) > 0))

    def within_gap(self) -> bool:
        gap = self.limit - self.partial
        slack = 1e-12 * self.limit
        return bool(np.all(gap >= -slack) and np.all(gap <= self.gap_bound + slack))


def u_hat_expansion(model: TailModel, lam: float, R: int) -> Expansion:
    """Partial sums Û_R(λ) = (1/(mλ²)) Σ_{r=0}^R q^r of ∫ e^{-λx} U(x) dx = 1/(mλ² φ̂(λ))."""
    if R < 1:
        raise ValueError("R must be at least 1")
    lam = _check_lam(lam)
    q = one_minus_phi_hat(model, lam)
    scale = 1.0 / (model.mean * lam * lam)
    partial = scale * np.cumsum(q ** np.arange(R + 1))
    limit = scale / (1.0 - q)
    gap = scale * q ** (np.arange(R + 1) + 1.0) / (1.0 - q)
    return Expansion(lam, partial, limit, gap)


def term_residuals(terms: list[GridFn], model: TailModel, lambdas) -> np.ndarray:
    """|λ∫ e^{-λx} G̅_r - q(λ)^r| for r = 1..len(terms), rows by λ.

    ``terms[r-1]`` is G̅_r on a grid (slopes used when present).
    """
    out = np.empty((len(np.atleast_1d(lambdas)), len(terms)))
    for i, lam in enumerate(np.atleast_1d(lambdas)):
        q = one_minus_phi_hat(model, float(lam))
        for r, gb in enumerate(terms, start=1):
            out[i, r - 1] = abs(lam * grid_transform(gb, float(lam)) - q**r)
    return out


def transform_csv(points, path: str | Path | None = None) -> str:
    """Write (λ, value) pairs as ``lambda,value``."""
    buf = io.StringIO()
    rows = np.array([[p.lam, p.value] for p in points], dtype=float).reshape(-1, 2)
    np.savetxt(buf, rows, fmt="%.17g", delimiter=",", header="lambda,value", comments="")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
