import math
import warnings

import numpy as np
import pytest

from renewal_remainder.ladder import (
    HorizonWarning,
    ShiftedTail,
    SignedLattice,
    chernoff_horizon,
    cramer_root,
    k_constant,
    ladder_lattice_exact,
    phi_bar_up,
    psi,
    simulate_ladders,
    v_tilde_report,
    visit_tail_bound,
)
from renewal_remainder.gridconv import Grid
from renewal_remainder.renewal import renewal_grid
from renewal_remainder.tailmodel import Pareto

SKIP_FREE = SignedLattice({2: 2 / 3, -1: 1 / 3})
SQRT3 = math.sqrt(3.0)


@pytest.fixture(scope="module")
def skip_free_mc():
    return simulate_ladders(SKIP_FREE, 100_000, seed=11, occ_max=40)


def test_walk_validation():
    with pytest.raises(ValueError):
        ShiftedTail(Pareto(1.5), 4.0)
    with pytest.raises(ValueError):
        SignedLattice({1: 0.5, -1: 0.4})
    with pytest.raises(ValueError):
        SignedLattice({1: 0.4, -1: 0.6})
    assert SKIP_FREE.mean == pytest.approx(1.0)
    assert SKIP_FREE.phi_bar(0.0) == pytest.approx(4 / 3)


def test_cramer_root_skip_free():
    # with t = e^{-θ}: (2/3)t² + 1/(3t) = 1, i.e. 2t³ - 3t + 1 = 0, root t = (√3 - 1)/2
    assert cramer_root(SKIP_FREE) == pytest.approx(-math.log((SQRT3 - 1) / 2), rel=1e-10)
    assert cramer_root(ShiftedTail(Pareto(1.5), 0.0)) == math.inf


def test_horizon_bound_monotone():
    w = ShiftedTail(Pareto(1.75), 1.5)
    T = chernoff_horizon(w, 0.0, 1e-4)
    assert visit_tail_bound(w, 0.0, T) <= 1e-4 < visit_tail_bound(w, 0.0, T - 1)


def test_exact_unit_step():
    ex = ladder_lattice_exact(SignedLattice({1: 1.0}), 10)
    assert np.array_equal(np.cumsum(ex.u), np.arange(1, 12))
    assert ex.C == 1.0 and ex.m_up == 1.0 and ex.defect_prob == 1.0


def test_exact_skip_free_closed_form():
    """Weak descent probability 1/3 + (2/3)s² with s = (√3-1)/2 gives C = √3."""
    ex = ladder_lattice_exact(SKIP_FREE, 200)
    assert ex.C == pytest.approx(SQRT3, rel=1e-9)
    assert ex.C * SKIP_FREE.mean == pytest.approx(ex.m_up, rel=1e-9)
    assert ex.defect_prob == pytest.approx(1 / SQRT3, rel=1e-9)
    assert ex.identity_residual().max() <= 1e-6
    assert ex.u[-1] == pytest.approx(1.0, rel=1e-6)
    assert ex.residual_csv().splitlines()[0] == "n,U,ladder_convolution,residual"


def test_monte_carlo_matches_exact(skip_free_mc):
    est = skip_free_mc
    ex = ladder_lattice_exact(SKIP_FREE, 40)
    assert abs(est.C - ex.C) <= 3 * est.stderr_C
    assert abs(est.m_up - ex.m_up) <= 3 * est.stderr_m_up
    assert abs(est.defect_prob - ex.defect_prob) <= 3 * est.stderr_defect_prob
    se = est.U_hat_stderr[1:]
    assert np.all(np.abs(est.U_hat[1:] - np.cumsum(ex.u)[1:41]) <= 4 * se)
    assert est.summary_csv().splitlines()[0] == "m_up,C,defect_prob,stderr_m_up,stderr_C,stderr_defect_prob"


def test_renewal_case_has_trivial_descending_part():
    w = ShiftedTail(Pareto(1.75), 0.0)
    est = simulate_ladders(w, 5000, seed=1, occ_max=10)
    assert est.C == 1.0 and est.defect_prob == 1.0
    assert np.array_equal(est.u_down_masses, [1.0])
    assert est.m_up_from_C == w.mean
    assert k_constant(est) == pytest.approx(0.0, abs=1e-12)


def test_determinism():
    w = ShiftedTail(Pareto(1.5), 1.0)
    a = simulate_ladders(w, 3000, seed=5, occ_max=20, chunk_cells=10**5)
    b = simulate_ladders(w, 3000, seed=5, occ_max=20, chunk_cells=10**5)
    c = simulate_ladders(w, 3000, seed=6, occ_max=20, chunk_cells=10**5)
    assert np.array_equal(a.h_up, b.h_up, equal_nan=True)
    assert np.array_equal(a.occ_counts, b.occ_counts)
    assert not np.array_equal(a.occ_counts, c.occ_counts)


def test_short_horizon_warns():
    with pytest.warns(HorizonWarning):
        simulate_ladders(ShiftedTail(Pareto(1.5), 2.5), 200, horizon=3, seed=0, occ_max=5)


def test_phi_bar_up_tracks_phi_bar():
    w = ShiftedTail(Pareto(1.25), 2.0)
    est = simulate_ladders(w, 50_000, seed=3)
    assert phi_bar_up(est, 0.0) == pytest.approx(1.0)
    z = np.array([10.0, 100.0, 1000.0])
    r = phi_bar_up(est, z) / w.phi_bar(z)
    assert np.all(np.abs(r - 1) < 0.05)
    assert abs(r[1] - 1) < abs(r[0] - 1)


def test_k_modes():
    light = simulate_ladders(ShiftedTail(Pareto(1.25), 2.0), 20_000, seed=3)
    assert k_constant(light) == 0.0
    assert k_constant(light, "integral") != 0.0
    with pytest.raises(ValueError):
        psi(light, [1.0], K_mode="other")
    Ks = [k_constant(simulate_ladders(ShiftedTail(Pareto(1.75), 1.5), 50_000, seed=s)) for s in (1, 2)]
    assert all(1.0 < k < 3.0 for k in Ks)
    assert abs(Ks[0] - Ks[1]) < 0.1


def test_v_tilde_renewal_case_matches_grid_remainder():
    model = Pareto(1.75)
    est = simulate_ladders(ShiftedTail(model, 0.0), 100_000, seed=2, occ_step=0.25, occ_max=10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = v_tilde_report(est, xs=[2.0, 5.0, 10.0])
    grid = Grid.for_model(model, 0.0125, 10.0)
    sol = renewal_grid(model, grid, with_vb=False)
    ref = np.array([sol.V15[grid.index(x)] for x in rep.x])
    assert np.all(np.abs(rep.V_tilde - ref) <= 4 * rep.stderr)
    assert rep.regime == "m2" and rep.K == 0.0
    assert rep.to_csv().splitlines()[0] == "x,V_tilde,stderr,normalizer,ratio,target"
    with pytest.raises(ValueError):
        v_tilde_report(est, xs=[50.0])
