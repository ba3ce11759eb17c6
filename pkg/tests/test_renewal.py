import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renewal_remainder import renewal
from renewal_remainder.gridconv import Grid, GridError, GridFn, gbar, sample_fn
from renewal_remainder.renewal import (
    RegimeError,
    SolverInstability,
    classify_regime,
    hat_weights,
    remainder_v15,
    remainder_vb,
    renewal_grid,
    renewal_lattice,
    renewal_u,
    second_order_ratio,
    sgibnev_ratio,
    theorem1_report,
)
from renewal_remainder.specfun import c_alpha
from renewal_remainder.tailmodel import Exponential, LogPareto, Pareto

EXP = Exponential(1.0)


def test_lattice_examples():
    assert np.cumsum(renewal_lattice({1: 1.0}, 3))[3] == 4.0
    u = renewal_lattice({1: 0.5, 2: 0.5}, 1000)
    assert np.array_equal(u[:4], [1.0, 0.5, 0.75, 0.625])
    assert np.cumsum(u)[3] == 2.875
    assert abs(u[1000] - 2 / 3) < 1e-3


@settings(max_examples=20, deadline=None)
@given(st.dictionaries(st.integers(1, 6), st.floats(0.05, 1.0), min_size=2, max_size=4))
def test_lattice_elementary_renewal(raw):
    total = sum(raw.values())
    pmf = {k: v / total for k, v in raw.items()}
    ks = np.array(list(pmf))
    if np.gcd.reduce(ks) != 1:
        return
    m = sum(k * p for k, p in pmf.items())
    assert abs(renewal_lattice(pmf, 1000)[-1] - 1 / m) < 1e-3


@settings(max_examples=20, deadline=None)
@given(st.floats(1.05, 1.95), st.floats(0.02, 0.2))
def test_hat_weights_preserve_mass_and_mean(alpha, h):
    model = Pareto(alpha, 1.0)
    grid = Grid(h, int(400 / h))
    w = hat_weights(model, grid)
    m, xm = model.mean, grid.x_max
    # the sum telescopes; only hats centred beyond x_max are missing
    missing = m / h * (model.phi_bar(xm) - model.phi_bar(xm + h))
    assert np.all(w >= -1e-12)
    assert w.sum() == pytest.approx(1 - missing, abs=1e-12)
    assert np.dot(np.arange(w.size), w) * h <= m


@pytest.mark.parametrize("h", [0.1, 0.05, 0.025])
def test_exponential_renewal_function(h):
    grid = Grid(h, int(round(100 / h)))
    sol = renewal_grid(EXP, grid)
    err = np.max(np.abs(sol.U - (1 + grid.x)))
    assert sol.U[0] == 1.0
    assert err <= 5 * h * h
    assert np.max(np.abs(sol.V15 - np.exp(-grid.x))) <= 5 * h * h
    assert np.max(np.abs(sol.Vb - sol.V15)) <= 5 * h * h
    assert sol.Vb[0] == pytest.approx(EXP.mean)


def test_elementary_renewal_at_x_max(big_b075, big_b05):
    for big in (big_b075, big_b05):
        U = big.sol.U
        assert U[-1] / big.grid.x_max * big.model.mean == pytest.approx(1.0, rel=0.01)


def test_elementary_renewal_slow_for_small_beta(big_b025):
    """mU(x)/x - 1 = (∫Φ̄ + V)/x, led by ∫Φ̄/x ~ x^-β: still 10% at 2e4 for β = 1/4."""
    big = big_b025
    x = big.grid.x_max
    excess = big.model.mean * big.sol.U[-1] / x - 1
    leading = big.model.phi_bar_int(x) / x
    next_term = c_alpha(0.25) / 0.5 * big.model.phi_bar(x) ** 2
    assert excess > 0.05
    assert excess - leading == pytest.approx(next_term, rel=0.15)


def test_routes_agree_at_1e3(big_b025):
    big = big_b025
    i = big.grid.index(1e3)
    assert abs(big.sol.V15[i] - big.sol.Vb[i]) <= big.sol.route_constant * big.grid.h**2 * (1 + 1e3)
    assert big.sol.route_constant < 1.0


def test_remainder_ratio_trend_m2(big_b025):
    big = big_b025
    rep = theorem1_report(big.model, big.grid, solution=big.sol)
    assert rep.regime == "m2"
    assert rep.target == pytest.approx(c_alpha(0.25) / 0.5)
    r = rep.ratio[[big.grid.index(x) for x in (1e2, 1e3, 1e4)]]
    assert np.all(np.diff(np.abs(r - rep.target)) < 0)


def test_remainder_ratio_trend_m3(big_b05):
    big = big_b05
    rep = theorem1_report(big.model, big.grid, solution=big.sol)
    assert rep.regime == "m3" and rep.target == 0.0
    r = rep.ratio[[big.grid.index(x) for x in (1e2, 1e3, 1e4, 2e4)]]
    assert np.all(np.diff(r) < 0) and np.all(r > 0)


def test_sgibnev_unit_q_is_elementary_renewal():
    grid = Grid.for_model(Pareto(1.75), 0.05, 200.0)
    sol = renewal_grid(Pareto(1.75), grid, with_vb=False)
    one = GridFn(grid, np.ones(grid.n + 1), np.zeros(grid.n + 1))
    r = sgibnev_ratio(sol, one)
    assert np.allclose(r[1:], sol.model.mean * sol.U[1:] / grid.x[1:], rtol=1e-12)
    with pytest.raises(ValueError):
        sgibnev_ratio(sol, GridFn(grid, grid.x))
    with pytest.warns(RuntimeWarning):
        sgibnev_ratio(sol, sample_fn(Pareto(1.75), grid, "phi_bar"))


def test_sgibnev_ratios_decrease_toward_one(big_b025):
    big = big_b025
    pb = big.model.phi_bar(big.grid.x)
    phi = big.model.phi(big.grid.x)
    for Q in (GridFn(big.grid, pb, -phi), GridFn(big.grid, pb * pb, -2 * pb * phi)):
        r = sgibnev_ratio(big.sol, Q)
        pts = r[[big.grid.index(x) for x in (1e2, 1e3, 1e4, 2e4)]]
        assert np.all(np.diff(pts) < 0) and np.all(pts > 1)


def test_second_order_ratio_to_zero(big_b025, big_b075, big_b05):
    for big in (big_b025, big_b075, big_b05):
        r = second_order_ratio(big.sol)
        pts = r[big.final_decade()]
        assert np.all(np.diff(pts) < 0)
        assert 0 < pts[-1] < pts[0]


def test_regimes():
    assert classify_regime(Pareto(1.25)) == "m2"
    assert classify_regime(Pareto(1.75)) == "m2"
    assert classify_regime(Pareto(1.5)) == "m3"
    assert classify_regime(LogPareto(1.5, np.e, 1.0)) == "m4"
    assert classify_regime(LogPareto(1.5, np.e, 0.4)) == "m3"
    assert classify_regime(EXP) == "light"
    grid = Grid.for_model(Pareto(1.25), 0.1, 10.0)
    with pytest.raises(RegimeError):
        theorem1_report(Pareto(1.25), grid, regime="m3")


def test_report_csv_columns():
    grid = Grid.for_model(Pareto(1.75), 0.1, 20.0)
    rep = theorem1_report(Pareto(1.75), grid)
    text = rep.to_csv(stride=50)
    lines = text.splitlines()
    assert lines[0] == "x,U,V15,Vb,normalizer,ratio,target"
    assert lines[-1].startswith("20,")


def test_instability_detected(monkeypatch):
    grid = Grid(0.1, 100)
    monkeypatch.setattr(renewal, "hat_weights", lambda m, g: np.r_[0.0, 1.2, -0.2, np.zeros(g.n - 2)])
    with pytest.raises(SolverInstability) as err:
        renewal_u(EXP, grid)
    assert err.value.index == 2


def test_grid_mismatch():
    g1, g2 = Grid(0.1, 100), Grid(0.05, 200)
    sol = renewal_grid(EXP, g1, with_vb=False)
    with pytest.raises(GridError):
        remainder_vb(sol, gbar(EXP, g2))
    assert np.array_equal(remainder_v15(sol), sol.V15)
