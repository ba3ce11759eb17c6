"""Step distributions with closed-form tails.

Each model exposes the tail F̄(x) = P(X > x), the mean m, the overshoot
density φ = F̄/m, its integrated tail Φ̄(x) = ∫_x^∞ φ and the second-order
term Φ̄̄(x) = ∫_0^x Φ̄.  All evaluation methods accept scalars or numpy
arrays and are pure; models are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar

import numpy as np
from scipy import special

from .config import (
    ConfigError,
    as_float,
    format_kv,
    format_pmf,
    parse_kv,
    parse_pmf,
)


def _wrap(x, value):
    if np.ndim(x) == 0:
        return float(value)
    return value


def upper_gamma(a: float, z):
    """Upper incomplete gamma Γ(a, z) for real ``a`` and ``z > 0``.

    Non-positive ``a`` is reached from the positive range by the downward
    recurrence Γ(a, z) = (Γ(a+1, z) - z^a e^-z) / a.
    """
    z = np.asarray(z, dtype=float)
    if a > 0:
        return special.gammaincc(a, z) * special.gamma(a)
    k = math.ceil(-a) if a != math.floor(a) else int(-a)
    top = a + k
    if top == 0:
        val = special.exp1(z)
    else:
        val = special.gammaincc(top, z) * special.gamma(top)
    for j in range(k - 1, -1, -1):
        s = a + j
        val = (val - z**s * np.exp(-z)) / s
    return val


class TailModel:
    """Shared behaviour; subclasses provide ``tail``, ``mean``, ``phi_bar``…"""

    family: ClassVar[str]
    continuous: ClassVar[bool] = True

    @property
    def beta(self) -> float | None:
        alpha = getattr(self, "alpha", None)
        return None if alpha is None else alpha - 1.0

    @property
    def log_power(self) -> float:
        return 0.0

    @property
    def kinks(self) -> tuple[tuple[float, float], ...]:
        """Points where φ' jumps, with the jump φ'(c+) - φ'(c-)."""
        return ()

    @property
    def phi_bar_sq_integrable(self) -> bool:
        """Whether ∫_0^∞ Φ̄(y)² dy is finite."""
        b = self.beta
        if b is None:
            return True
        if b != 0.5:
            return b > 0.5
        return self.log_power > 0.5

    def phi(self, y):
        return self.tail(y) / self.mean

    def dphi(self, y, side: str = "right"):
        """One-sided derivative of φ."""
        y = np.asarray(y, dtype=float)
        d = -self.density(y) / self.mean
        for c, jump in self.kinks:
            # density() returns the right limit at a kink
            if side == "left":
                d = np.where(y == c, d - jump, d)
        return _wrap(y, d)

    def excess(self, a):
        """E (X - a)^+ = m Φ̄(a) for a >= 0."""
        return self.mean * self.phi_bar(a)

    def sample(self, rng: np.random.Generator, size=None):
        u = 1.0 - rng.random(size)  # (0, 1]
        return self.inverse_tail(u)

    def to_config(self) -> str:
        return format_kv(self.config_items())


@dataclass(frozen=True)
class Pareto(TailModel):
    """F̄(x) = 1 below x0 and (x0/x)^α above."""

    alpha: float
    x0: float = 1.0
    family: ClassVar[str] = "pareto"

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"pareto alpha must lie in (1, 2), got {self.alpha}")
        if not self.x0 > 0:
            raise ValueError("pareto x0 must be positive")

    @property
    def mean(self) -> float:
        return self.alpha * self.x0 / (self.alpha - 1.0)

    @property
    def kinks(self):
        return ((self.x0, -self.alpha / (self.mean * self.x0)),)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        val = np.where(x < self.x0, 1.0, (self.x0 / np.maximum(x, self.x0)) ** self.alpha)
        return _wrap(x, val)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.x0)
        val = np.where(x < self.x0, 0.0, self.alpha * self.x0**self.alpha * xs ** (-self.alpha - 1.0))
        return _wrap(x, val)

    def phi_bar(self, x):
        x = np.asarray(x, dtype=float)
        a, x0, m = self.alpha, self.x0, self.mean
        xs = np.maximum(x, x0)
        val = np.where(x <= x0, 1.0 - x / m, x0**a * xs ** (1.0 - a) / (m * (a - 1.0)))
        return _wrap(x, val)

    def phi_bar_int(self, x):
        x = np.asarray(x, dtype=float)
        a, x0, m = self.alpha, self.x0, self.mean
        xs = np.maximum(x, x0)
        inner = x - x * x / (2.0 * m)
        outer = (x0 - x0 * x0 / (2.0 * m)) + x0**a * (xs ** (2.0 - a) - x0 ** (2.0 - a)) / (
            m * (a - 1.0) * (2.0 - a)
        )
        return _wrap(x, np.where(x <= x0, inner, outer))

    def inverse_tail(self, u):
        u = np.asarray(u, dtype=float)
        return _wrap(u, self.x0 * u ** (-1.0 / self.alpha))

    def config_items(self):
        return {"family": self.family, "alpha": self.alpha, "x0": self.x0}


@dataclass(frozen=True)
class LogPareto(TailModel):
    """F̄(x) = (x/x0)^-α (ln x / ln x0)^-p above x0 > 1, and 1 below."""

    alpha: float
    x0: float = math.e
    p: float = 1.0
    family: ClassVar[str] = "log_pareto"

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"log_pareto alpha must lie in (1, 2), got {self.alpha}")
        if not self.x0 > 1.0:
            raise ValueError("log_pareto needs x0 > 1")
        if not self.p > 0:
            raise ValueError("log_pareto needs p > 0")

    @property
    def log_power(self) -> float:
        return self.p

    @cached_property
    def _scale(self) -> float:
        return self.x0**self.alpha * math.log(self.x0) ** self.p

    def _upper(self, x):
        """∫_x^∞ F̄ for x >= x0."""
        a, p = self.alpha, self.p
        z = (a - 1.0) * np.log(x)
        return self._scale * (a - 1.0) ** (p - 1.0) * upper_gamma(1.0 - p, z)

    @cached_property
    def mean(self) -> float:
        return self.x0 + float(self._upper(self.x0))

    @property
    def kinks(self):
        jump = -(self.alpha + self.p / math.log(self.x0)) / self.x0
        return ((self.x0, jump / self.mean),)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.x0)
        val = (xs / self.x0) ** -self.alpha * (np.log(xs) / math.log(self.x0)) ** -self.p
        return _wrap(x, np.where(x < self.x0, 1.0, val))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.x0)
        val = self.tail(xs) * (self.alpha + self.p / np.log(xs)) / xs
        return _wrap(x, np.where(x < self.x0, 0.0, val))

    def phi_bar(self, x):
        x = np.asarray(x, dtype=float)
        m = self.mean
        xs = np.maximum(x, self.x0)
        val = np.where(x <= self.x0, 1.0 - x / m, self._upper(xs) / m)
        return _wrap(x, val)

    def _moment_part(self, x):
        """∫_{x0}^x y F̄(y) dy for x >= x0, by panel Gauss-Legendre in ln y."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        t0 = math.log(self.x0)
        t = np.log(np.maximum(flat, self.x0))
        order = np.argsort(t)
        ts = t[order]
        # panels no wider than 0.25 in ln y keep the rule at machine precision
        fill = np.arange(t0, ts[-1], 0.25) if ts.size else np.empty(0)
        knots = np.unique(np.concatenate([[t0], fill, ts]))
        nodes, weights = np.polynomial.legendre.leggauss(16)
        lo, hi = knots[:-1], knots[1:]
        half = 0.5 * (hi - lo)
        tt = 0.5 * (hi + lo)[:, None] + half[:, None] * nodes[None, :]
        integrand = np.exp((2.0 - self.alpha) * tt) * tt**-self.p
        panels = (integrand * weights).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(panels)])
        vals = cum[np.searchsorted(knots, ts)]
        out = np.empty_like(flat)
        out[order] = vals
        return (self._scale * out).reshape(x.shape)

    def phi_bar_int(self, x):
        x = np.asarray(x, dtype=float)
        m, x0 = self.mean, self.x0
        xs = np.maximum(x, x0)
        # ∫_0^x Φ̄ = x Φ̄(x) + ∫_0^x y φ(y) dy
        outer = xs * self.phi_bar(xs) + (0.5 * x0 * x0 + self._moment_part(xs)) / m
        inner = x - x * x / (2.0 * m)
        return _wrap(x, np.where(x <= x0, inner, outer))

    def inverse_tail(self, u):
        u = np.asarray(u, dtype=float)
        t0 = math.log(self.x0)
        target = -np.log(u)
        lo = np.full(u.shape, t0)
        hi = t0 + target / self.alpha + 1e-300
        hi = np.maximum(hi, t0)
        # bracket: the log factor only pushes the root below hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = self.alpha * (mid - t0) + self.p * np.log(mid / t0)
            below = val < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, hi)):
                break
        return _wrap(u, np.exp(0.5 * (lo + hi)))

    def config_items(self):
        return {"family": self.family, "alpha": self.alpha, "x0": self.x0, "p": self.p}


@dataclass(frozen=True)
class Exponential(TailModel):
    rate: float = 1.0
    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return _wrap(x, np.exp(-self.rate * np.maximum(x, 0.0)))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return _wrap(x, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def phi_bar(self, x):
        return self.tail(x)

    def phi_bar_int(self, x):
        x = np.asarray(x, dtype=float)
        return _wrap(x, -np.expm1(-self.rate * x) / self.rate)

    def inverse_tail(self, u):
        u = np.asarray(u, dtype=float)
        return _wrap(u, -np.log(u) / self.rate)

    def config_items(self):
        return {"family": self.family, "rate": self.rate}


@dataclass(frozen=True)
class Lattice(TailModel):
    """Finite pmf on the positive integers."""

    pmf: tuple[tuple[int, float], ...]
    family: ClassVar[str] = "lattice"
    continuous: ClassVar[bool] = False
    _k: np.ndarray = field(init=False, repr=False, compare=False)
    _p: np.ndarray = field(init=False, repr=False, compare=False)

    def __init__(self, pmf):
        items = tuple(sorted((int(k), float(p)) for k, p in dict(pmf).items() if p != 0))
        object.__setattr__(self, "pmf", items)
        if not items:
            raise ValueError("empty pmf")
        if any(k <= 0 for k, _ in items):
            raise ValueError("lattice support must be positive integers")
        if any(p < 0 for _, p in items):
            raise ValueError("negative probability in pmf")
        if abs(sum(p for _, p in items) - 1.0) > 1e-12:
            raise ValueError("pmf must sum to 1")
        object.__setattr__(self, "_k", np.array([k for k, _ in items], dtype=float))
        object.__setattr__(self, "_p", np.array([p for _, p in items]))

    def as_dict(self) -> dict[int, float]:
        return dict(self.pmf)

    @property
    def mean(self) -> float:
        return float(np.dot(self._k, self._p))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        val = (self._p * (self._k > x[..., None])).sum(axis=-1)
        return _wrap(x, val)

    def density(self, x):
        raise NotImplementedError("lattice distributions have no density")

    def dphi(self, y, side="right"):
        y = np.asarray(y, dtype=float)
        return _wrap(y, np.zeros_like(y))

    def phi_bar(self, x):
        x = np.asarray(x, dtype=float)
        over = np.maximum(self._k - x[..., None], 0.0)
        return _wrap(x, (self._p * over).sum(axis=-1) / self.mean)

    def phi_bar_int(self, x):
        x = np.asarray(x, dtype=float)
        over = np.maximum(self._k - x[..., None], 0.0)
        val = (self._p * (self._k**2 - over**2)).sum(axis=-1) / (2.0 * self.mean)
        return _wrap(x, val)

    def inverse_tail(self, u):
        u = np.asarray(u, dtype=float)
        # smallest k with P(X >= k) >= u, i.e. tail(k-) >= u
        surv = np.concatenate([np.cumsum(self._p[::-1])[::-1], [0.0]])
        idx = np.searchsorted(-surv, -u, side="left") - 1
        idx = np.clip(idx, 0, self._k.size - 1)
        return _wrap(u, self._k[idx])

    def sample(self, rng, size=None):
        return rng.choice(self._k, size=size, p=self._p)

    def config_items(self):
        return {"family": self.family, "pmf": format_pmf(self.as_dict())}


FAMILIES = {cls.family: cls for cls in (Pareto, LogPareto, Exponential, Lattice)}


def model_from_config(cfg: dict[str, str] | str) -> TailModel:
    """Build a model from parsed ``key = value`` items (or raw config text)."""
    if isinstance(cfg, str):
        cfg = parse_kv(cfg)
    family = cfg.get("family")
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    if family == "pareto":
        return Pareto(as_float(cfg, "alpha"), as_float(cfg, "x0", 1.0))
    if family == "log_pareto":
        return LogPareto(as_float(cfg, "alpha"), as_float(cfg, "x0", math.e), as_float(cfg, "p", 1.0))
    if family == "exponential":
        return Exponential(as_float(cfg, "rate", 1.0))
    if "pmf" not in cfg:
        raise ConfigError("lattice family needs a pmf")
    return Lattice(parse_pmf(cfg["pmf"]))
