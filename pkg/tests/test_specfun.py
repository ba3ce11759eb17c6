import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from renewal_remainder import specfun

mp.mp.dps = 30

# frozen from the mpmath oracle below
C_025 = 0.8472130847939786
C_075 = -3.7081493546027406


def oracle_c(beta):
    b = mp.mpf(beta)
    return float((1 - 2 * b) * mp.beta(1 - b, 1 - b))


def oracle_i(beta):
    """Incomplete beta B(1/2; 1-β, -β)."""
    b = mp.mpf(beta)
    return float(mp.betainc(1 - b, -b, 0, mp.mpf(1) / 2))


def oracle_j(beta):
    """Termwise: β⁻¹ Σ_k (β)_k/k! · 2^(β-k)/(k-β)."""
    b = mp.mpf(beta)
    return float(mp.nsum(lambda k: mp.rf(b, k) / mp.factorial(k) * mp.power(2, b - k) / (k - b), [1, mp.inf]) / b)


@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (0.5, 0.5723649429247001), (0.25, 1.2880225246980774)])
def test_ln_gamma(x, expected):
    assert specfun.ln_gamma(x) == pytest.approx(expected, abs=1e-13)
    assert specfun.ln_gamma(x) == pytest.approx(float(mp.loggamma(x)), abs=1e-13)


def test_ln_gamma_domain():
    with pytest.raises(ValueError):
        specfun.ln_gamma(0.0)


@pytest.mark.parametrize("a, b, expected", [(1, 1, 1.0), (0.5, 0.5, math.pi), (0.75, 0.75, 1.6944261695879572)])
def test_beta_fn(a, b, expected):
    assert specfun.beta_fn(a, b) == pytest.approx(expected, rel=1e-13)


def test_c_alpha_examples():
    assert specfun.c_alpha(0.5) == 0.0
    assert specfun.c_alpha(0.25) == pytest.approx(C_025, rel=1e-12)
    assert specfun.c_alpha(0.75) == pytest.approx(C_075, rel=1e-12)
    assert oracle_c(0.25) == pytest.approx(C_025, rel=1e-12)
    assert oracle_c(0.75) == pytest.approx(C_075, rel=1e-12)


@pytest.mark.parametrize("beta", [0.1, 0.25, 0.4, 0.6, 0.75, 0.9])
def test_i_and_j_against_oracle(beta):
    assert specfun.i_alpha(beta) == pytest.approx(oracle_i(beta), rel=1e-10)
    assert specfun.j_alpha(beta) == pytest.approx(oracle_j(beta), rel=1e-10)


def test_i_alpha_special_values():
    assert specfun.i_alpha(0.5) == pytest.approx(2.0, abs=1e-12)
    assert specfun.i_alpha(1e-9) == pytest.approx(math.log(2.0), abs=1e-7)
    assert specfun.i_alpha(0.25) == pytest.approx((2**0.5 - C_025) / 0.5, rel=1e-12)


def test_j_alpha_half():
    assert specfun.j_alpha(0.5) == pytest.approx(4 * math.sqrt(2) - 4, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99))
def test_representations_agree(beta):
    c = specfun.c_alpha(beta)
    assert specfun.c_alpha_quadrature(beta) == pytest.approx(c, abs=1e-9)
    assert specfun.c_alpha_identity(beta) == pytest.approx(c, abs=1e-9)
    assert specfun.j_alpha_split(beta) == pytest.approx(specfun.j_alpha(beta), rel=1e-9)
    assert specfun.liminf_constant(beta) == pytest.approx(-c / beta, abs=1e-8 * max(1, abs(c) / beta))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.49))
def test_sign_of_c_alpha(beta):
    assert specfun.c_alpha(beta) > 0
    assert specfun.c_alpha(1 - beta) < 0


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_beta_domain(beta):
    with pytest.raises(ValueError):
        specfun.c_alpha(beta)
