"""Special functions and the second-order constant c_alpha.

Everything here is parameterised by the tail index ``beta`` of the
integrated overshoot tail (so the step tail index is ``alpha = beta + 1``).
"""

from __future__ import annotations

import math

from scipy import integrate


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""

    def __init__(self, what: str, estimate: float, tol: float):
        super().__init__(f"{what}: error estimate {estimate:.3e} exceeds {tol:.1e}")
        self.estimate = estimate
        self.tol = tol


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    return beta


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for positive real ``x``."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"ln_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def beta_fn(a: float, b: float) -> float:
    """Euler beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b)."""
    a, b = float(a), float(b)
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"beta_fn requires positive arguments, got ({a!r}, {b!r})")
    return math.exp(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))


def _quad(f, lo, hi, what, tol=1e-10):
    val, err = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
    if err > tol:
        raise QuadratureError(what, err, tol)
    return val


def _half_interval(beta: float, h) -> float:
    """Integrate w**-beta * h(w) over (0, 1/2].

    The substitution w = t**(1/(1-beta)) absorbs the endpoint singularity,
    leaving a smooth integrand in t.
    """
    k = 1.0 / (1.0 - beta)
    top = 0.5 ** (1.0 - beta)
    return k * _quad(lambda t: h(t**k), 0.0, top, "half-interval integral")


def c_alpha(beta: float) -> float:
    """The limit of G̅(x)/Φ̄(x)² for tail index ``beta``: (1-2β)·B(1-β, 1-β)."""
    beta = _check_beta(beta)
    return (1.0 - 2.0 * beta) * beta_fn(1.0 - beta, 1.0 - beta)


def c_alpha_quadrature(beta: float) -> float:
    """(1-2β)∫₀¹ (w(1-w))^-β dw, computed by quadrature (symmetric halves)."""
    beta = _check_beta(beta)
    half = _half_interval(beta, lambda w: (1.0 - w) ** -beta)
    return (1.0 - 2.0 * beta) * 2.0 * half


def i_alpha(beta: float) -> float:
    """∫₀^½ dw / ((1-w) (w(1-w))^β)."""
    beta = _check_beta(beta)
    return _half_interval(beta, lambda w: (1.0 - w) ** (-1.0 - beta))


def c_alpha_identity(beta: float) -> float:
    """c_alpha through 2^{2β} - 2β·I_α."""
    beta = _check_beta(beta)
    return 2.0 ** (2.0 * beta) - 2.0 * beta * i_alpha(beta)


def j_alpha(beta: float) -> float:
    """J_α = β⁻¹∫₀^½ w^-α ((1-w)^-β - 1) dw.

    This is the reduced form of the double integral
    ∫₀^½ w^-α ∫_{1-w}^1 y^-α dy dw.
    """
    beta = _check_beta(beta)

    def h(w):
        if w == 0.0:
            return beta
        # ((1-w)^-β - 1)/w without cancellation for small w
        return math.expm1(-beta * math.log1p(-w)) / w

    return _half_interval(beta, h) / beta


def j_alpha_split(beta: float) -> float:
    """J_α via -β⁻²2^β(2^β-1) + β⁻¹∫₀^½ w^-β (1-w)^-α dw."""
    beta = _check_beta(beta)
    alpha = 1.0 + beta
    rest = _half_interval(beta, lambda w: (1.0 - w) ** -alpha)
    two_b = 2.0**beta
    return -two_b * (two_b - 1.0) / beta**2 + rest / beta


def liminf_constant(beta: float) -> float:
    """I_α + βJ_α - β⁻¹2^β, which equals -c_α/β.

    For beta > 1/2 this is the positive lower bound on the liminf of
    -g(x) / (2xφ(x)²).
    """
    beta = _check_beta(beta)
    return i_alpha(beta) + beta * j_alpha(beta) - 2.0**beta / beta
