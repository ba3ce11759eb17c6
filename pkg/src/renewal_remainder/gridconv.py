"""Uniform grids, sampled functions and convolution on [0, x_max].

Integrals of piecewise-smooth products use the trapezoid rule plus the
Euler-Maclaurin h² endpoint term, with the jumps of the integrand's first
derivative at interior kinks subtracted.  That keeps the scheme O(h⁴) for
the functions met here, which matters because G̅ is a small difference of
near-unity quantities at large x.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .specfun import c_alpha
from .tailmodel import Lattice, TailModel


class GridError(ValueError):
    pass


class GridOverflow(GridError, ArithmeticError):
    """A sampled function went non-finite."""


@dataclass(frozen=True)
class Grid:
    """Points x_i = i·h for i = 0..n."""

    h: float
    n: int

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise GridError(f"grid step must be positive, got {self.h}")
        if self.n < 1:
            raise GridError(f"grid needs at least one interval, got n={self.n}")

    @classmethod
    def for_model(cls, model: TailModel, h: float, x_max: float) -> "Grid":
        """Grid with step close to ``h`` and every kink of φ on a grid point."""
        if isinstance(model, Lattice):
            raise GridError("lattice models use the exact lattice recursion, not a grid")
        for c, _ in model.kinks:
            k = max(1, round(c / h))
            h = c / k
        n = int(round(x_max / h))
        return cls(h, n)

    @property
    def x_max(self) -> float:
        return self.h * self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def index(self, x: float) -> int:
        i = int(round(x / self.h))
        if not 0 <= i <= self.n:
            raise GridError(f"x = {x} outside [0, {self.x_max}]")
        return i

    def kink_indices(self, model: TailModel) -> tuple[tuple[int, float], ...]:
        out = []
        for c, jump in model.kinks:
            i = int(round(c / self.h))
            if abs(i * self.h - c) > 1e-9 * c:
                raise GridError(f"kink at {c} is not a grid point (h = {self.h})")
            if i <= self.n:
                out.append((i, jump))
        return tuple(out)


@dataclass(frozen=True, eq=False)
class GridFn:
    """Values on a grid, optionally with derivative data.

    ``slope[0]`` is the right derivative at 0 and ``slope[i]`` (i >= 1) the
    left derivative at x_i.  ``kinks`` lists (index, jump of derivative).
    """

    grid: Grid
    values: np.ndarray
    slope: np.ndarray | None = None
    kinks: tuple[tuple[int, float], ...] = field(default=())

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise GridError(f"expected {self.grid.n + 1} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise GridOverflow(f"non-finite value at index {bad}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.slope is not None:
            sl = np.array(self.slope, dtype=float)
            if sl.shape != vals.shape or not np.all(np.isfinite(sl)):
                raise GridError("slope must be finite and match the values")
            sl.flags.writeable = False
            object.__setattr__(self, "slope", sl)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def at(self, x: float) -> float:
        return float(self.values[self.grid.index(x)])

    def with_values(self, values, slope=None, kinks=()) -> "GridFn":
        return GridFn(self.grid, values, slope, kinks)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([self.x, self.values]), fmt="%.17g",
                   delimiter=",", header="x,value", comments="")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _same_grid(f: GridFn, g: GridFn) -> Grid:
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")
    return f.grid


def sample_fn(model: TailModel, grid: Grid, which: str = "phi") -> GridFn:
    """φ or Φ̄ on the grid, with exact one-sided derivatives."""
    x = grid.x
    if which == "phi":
        slope = np.asarray(model.dphi(x, "left"), dtype=float).copy()
        slope[0] = model.dphi(0.0, "right")
        return GridFn(grid, model.phi(x), slope, grid.kink_indices(model))
    if which == "phi_bar":
        return GridFn(grid, model.phi_bar(x), -np.asarray(model.phi(x)))
    raise ValueError(f"which must be 'phi' or 'phi_bar', got {which!r}")


def convolve(f: GridFn, g: GridFn) -> GridFn:
    """Plain trapezoid (f∗g)(x_i) = ∫_0^{x_i} f(x_i - y) g(y) dy."""
    grid = _same_grid(f, g)
    a, b = f.values, g.values
    s = _kernels.causal_conv(a, b)
    out = grid.h * (s - 0.5 * (a[0] * b + a * b[0]))
    out[0] = 0.0
    return GridFn(grid, out)


def convolve_corrected(a: GridFn, b: GridFn) -> GridFn:
    """∫_0^x a(y) b(x - y) dy with the h² endpoint and kink corrections.

    Both inputs must carry slopes.  With F(y) = a(y) b(x-y), the trapezoid
    error is (h²/12)[F'(x-) - F'(0+) - Σ jumps of F'] + O(h⁴).
    """
    grid = _same_grid(a, b)
    if a.slope is None or b.slope is None:
        raise GridError("corrected convolution needs slopes on both inputs")
    av, bv, ad, bd = a.values, b.values, a.slope, b.slope
    plain = convolve(a, b).values.copy()
    # F'(x-) - F'(0+) = a'(x-)b(0) - a(x)b'(0+) - a'(0+)b(x) + a(0)b'(x-)
    ends = ad * bv[0] - av * bd[0] - ad[0] * bv + av[0] * bd
    jumps = np.zeros_like(av)
    for c, dj in a.kinks:
        jumps[c + 1:] += dj * bv[1 : grid.n - c + 1]
    for d, dj in b.kinks:
        jumps[d + 1:] += dj * av[1 : grid.n - d + 1]
    out = plain - grid.h**2 / 12.0 * (ends - jumps)
    out[0] = 0.0
    return GridFn(grid, out)


def cumulative_integral(f: GridFn) -> GridFn:
    """x_i ↦ ∫_0^{x_i} f, compensated trapezoid (+ h² correction if slopes known)."""
    h = f.grid.h
    v = f.values
    panels = np.empty_like(v)
    panels[0] = 0.0
    panels[1:] = 0.5 * h * (v[1:] + v[:-1])
    out = _kernels.compensated_cumsum(panels)
    if f.slope is not None:
        corr = f.slope - f.slope[0]
        for c, dj in f.kinks:
            corr[c + 1:] -= dj
        corr[0] = 0.0
        out = out - h * h / 12.0 * corr
    return GridFn(f.grid, out, f.values)


def fd_slope(values: np.ndarray, h: float, d0: float, kinks=()) -> np.ndarray:
    """Left derivatives by 3-point backward differences, never straddling a kink.

    At i = 1 and just past a kink the quadratic through two values and the
    known right derivative at the earlier point is used instead.
    """
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[0] = d0
    if v.size > 2:
        out[2:] = (3.0 * v[2:] - 4.0 * v[1:-1] + v[:-2]) / (2.0 * h)
    if v.size > 1:
        out[1] = 2.0 * (v[1] - v[0]) / h - d0
    for c, dj in kinks:
        if 1 <= c < v.size - 1:
            right = out[c] + dj
            out[c + 1] = 2.0 * (v[c + 1] - v[c]) / h - right
    return out


def _g_start(model: TailModel, r: int) -> tuple[float, float]:
    """g_r(0) and g_r'(0+)."""
    phi0 = 1.0 / model.mean
    d0 = float(model.dphi(0.0, "right"))
    return r * phi0, r * d0 - math.comb(r, 2) * phi0 * phi0


def expansion_terms(model: TailModel, grid: Grid, r_max: int, phi: GridFn | None = None):
    """Lists [(g_r, G̅_r) for r = 2..r_max].

    G̅_{r+1} = G̅_r - φ∗G̅_r with G̅_1 = Φ̄, and g_{r+1} = φ + g_r - φ∗g_r with
    g_1 = φ.  Each step costs two corrected convolutions.
    """
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    phi = phi if phi is not None else sample_fn(model, grid, "phi")
    kinks = grid.kink_indices(model)
    g_prev = phi
    gbar_prev = sample_fn(model, grid, "phi_bar")
    out = []
    for r in range(2, r_max + 1):
        g_vals = phi.values + g_prev.values - convolve_corrected(phi, g_prev).values
        g0, d0 = _g_start(model, r)
        g_vals[0] = g0
        g_kinks = tuple((c, r * dj) for c, dj in kinks)
        g_r = GridFn(grid, g_vals, fd_slope(g_vals, grid.h, d0, g_kinks), g_kinks)
        gb_vals = gbar_prev.values - convolve_corrected(phi, gbar_prev).values
        gb_vals[0] = 1.0
        gbar_r = GridFn(grid, gb_vals, -g_vals)
        out.append((g_r, gbar_r))
        g_prev, gbar_prev = g_r, gbar_r
    return out


def g_fn(model: TailModel, grid: Grid) -> GridFn:
    """g = 2φ - φ∗φ."""
    return expansion_terms(model, grid, 2)[0][0]


def gbar(model: TailModel, grid: Grid) -> GridFn:
    """G̅(x) = ∫_x^∞ g = Φ̄(x) - (φ∗Φ̄)(x); G̅(0) = 1 exactly."""
    phi = sample_fn(model, grid, "phi")
    pb = sample_fn(model, grid, "phi_bar")
    vals = pb.values - convolve_corrected(phi, pb).values
    vals[0] = 1.0
    return GridFn(grid, vals)


def g_r_fn(model: TailModel, grid: Grid, r: int) -> GridFn:
    return expansion_terms(model, grid, r)[-1][0]


def gbar_r(model: TailModel, grid: Grid, r: int) -> GridFn:
    return expansion_terms(model, grid, r)[-1][1]


def normalization_check(g: GridFn, gb: GridFn) -> float:
    """∫_0^{x_max} g + G̅(x_max), which should equal 1.

    The tail ∫_{x_max}^∞ g is supplied by the convolution identity for G̅,
    independently of the grid integral of g.
    """
    _same_grid(g, gb)
    return float(cumulative_integral(g).values[-1] + gb.values[-1])


def eq6_ratio(model: TailModel, g: GridFn) -> np.ndarray:
    """-g(x) / (2xφ(x)²) on the grid (NaN at x = 0)."""
    x = g.x
    phi = model.phi(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -g.values / (2.0 * x * phi * phi)
    out[0] = np.nan
    return out


def eq6_lower_bound(beta: float) -> float:
    """-c_α/β, the liminf bound for -g(x)/(2xφ(x)²) when β > 1/2."""
    return -c_alpha(beta) / beta
