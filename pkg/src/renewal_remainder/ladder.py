"""Two-sided random walks with positive drift: ladder heights and Ṽ.

Conventions: ascending ladder epochs are strict (S_n > max so far),
descending ones are weak (S_n <= min so far).  With that pairing the
renewal measure of the walk factorises as U(dx) = ∫ U↓(dy) U↑(y + dx),
and the descending ladder renewal measure has total mass C = m↑/m.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import optimize

from . import _kernels
from .gridconv import Grid
from .laplace import step_mgf_negative
from .renewal import classify_regime, renewal_lattice, renewal_u
from .specfun import c_alpha
from .tailmodel import Lattice, TailModel


class HorizonWarning(RuntimeWarning):
    pass


class TruncationError(RuntimeError):
    pass


# ---------------------------------------------------------------- walks


@dataclass(frozen=True)
class ShiftedTail:
    """X = Y - shift with Y drawn from a continuous tail model."""

    base: TailModel
    shift: float = 0.0

    def __post_init__(self):
        if isinstance(self.base, Lattice):
            raise ValueError("shifted walks need a continuous base model")
        if self.shift < 0:
            raise ValueError("shift must be non-negative")
        if not self.mean > 0:
            raise ValueError(f"walk mean {self.mean} is not positive")

    lattice = False

    @property
    def mean(self) -> float:
        return self.base.mean - self.shift

    @property
    def beta(self):
        return self.base.beta

    @property
    def tail_model(self) -> TailModel:
        return self.base

    def sample(self, rng, size):
        return self.base.sample(rng, size) - self.shift

    def mgf_neg(self, theta: float) -> float:
        """E e^{-θX}."""
        return math.exp(theta * self.shift) * step_mgf_negative(self.base, theta)

    def phi_bar(self, x):
        """(1/m)∫_x^∞ P(X > w) dw for x >= 0."""
        x = np.asarray(x, dtype=float)
        return self.base.mean * np.asarray(self.base.phi_bar(x + self.shift)) / self.mean


@dataclass(frozen=True)
class SignedLattice:
    """Finite pmf on the integers with positive mean."""

    pmf: tuple[tuple[int, float], ...]

    lattice = True

    def __init__(self, pmf):
        items = tuple(sorted((int(k), float(p)) for k, p in dict(pmf).items() if p != 0))
        object.__setattr__(self, "pmf", items)
        if not items or any(p < 0 for _, p in items):
            raise ValueError("pmf must be non-empty with non-negative masses")
        if abs(sum(p for _, p in items) - 1.0) > 1e-12:
            raise ValueError("pmf must sum to 1")
        if not self.mean > 0:
            raise ValueError(f"walk mean {self.mean} is not positive")

    @property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.pmf], dtype=np.int64)

    @property
    def ps(self) -> np.ndarray:
        return np.array([p for _, p in self.pmf])

    @property
    def mean(self) -> float:
        return float(np.dot(self.ks, self.ps))

    @property
    def beta(self):
        return None

    @property
    def tail_model(self) -> None:
        return None

    def sample(self, rng, size):
        return rng.choice(self.ks.astype(float), size=size, p=self.ps)

    def mgf_neg(self, theta: float) -> float:
        return float(np.dot(self.ps, np.exp(-theta * self.ks)))

    def phi_bar(self, x):
        x = np.asarray(x, dtype=float)
        ks, ps = self.ks.astype(float), self.ps
        over = np.maximum(ks - x[..., None], 0.0)
        return (ps * over).sum(axis=-1) / self.mean


WalkModel = ShiftedTail | SignedLattice


# ---------------------------------------------------------------- truncation bounds


def _theta_range(walk) -> float:
    """Upper end of the θ range where E e^{-θX} is finite and below 1 is possible."""
    th = 1e-3
    while th < 50.0:
        if not walk.mgf_neg(2 * th) < 1.0:
            return 2 * th
        th *= 2
    return 50.0


def cramer_root(walk) -> float:
    """θ_c > 0 with E e^{-θ_c X} = 1; infinity when X >= 0 a.s."""
    if isinstance(walk, SignedLattice):
        if walk.ks.min() >= 0:
            return math.inf
    elif walk.shift == 0:
        return math.inf
    hi = _theta_range(walk)
    if walk.mgf_neg(hi) < 1.0:
        return math.inf
    res = optimize.minimize_scalar(walk.mgf_neg, bounds=(0.0, hi), method="bounded")
    return optimize.brentq(lambda t: walk.mgf_neg(t) - 1.0, res.x, hi, xtol=1e-14)


def visit_tail_bound(walk, level: float, horizon: int) -> float:
    """Chernoff bound on Σ_{n > horizon} P(S_n <= level)."""
    hi = _theta_range(walk)

    def logb(th):
        rho = walk.mgf_neg(th)
        if not 0 < rho < 1:
            return math.inf
        return th * level + (horizon + 1) * math.log(rho) - math.log1p(-rho)

    res = optimize.minimize_scalar(logb, bounds=(1e-9, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return math.exp(min(res.fun, 0.0)) if math.isfinite(res.fun) else 1.0


def chernoff_horizon(walk, level: float = 0.0, tol: float = 1e-4) -> int:
    """Smallest horizon T whose bound on Σ_{n > T} P(S_n <= level) is at most ``tol``."""
    lo, hi = 0, 16
    while visit_tail_bound(walk, level, hi) > tol:
        lo, hi = hi, 2 * hi
        if hi > 10**8:
            raise TruncationError("no horizon below 1e8 meets the requested bound")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if visit_tail_bound(walk, level, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------- exact lattice DP


@dataclass(frozen=True, eq=False)
class LatticeLadderExact:
    u: np.ndarray  # Σ_k P(S_k = n), n = 0..n_max
    u_up: np.ndarray  # ascending ladder renewal masses
    u_down: np.ndarray  # descending ladder renewal masses
    h_up_pmf: np.ndarray
    h_down_pmf: np.ndarray  # defective
    m: float
    steps_used: int

    @property
    def m_up(self) -> float:
        return float(np.dot(np.arange(self.h_up_pmf.size), self.h_up_pmf))

    @property
    def C(self) -> float:
        return float(self.u_down.sum())

    @property
    def descent_prob(self) -> float:
        """P(H↓ < ∞)."""
        return float(self.h_down_pmf.sum())

    @property
    def defect_prob(self) -> float:
        """P(no descending ladder epoch), i.e. P(H↓ = ∞)."""
        return 1.0 - self.descent_prob

    def identity_rhs(self) -> np.ndarray:
        """Σ_y U↓({y}) U↑({y + n}) for n = 0..n_max."""
        n_max = self.u.size - 1
        Y = self.u_down.size
        out = np.empty(n_max + 1)
        for n in range(n_max + 1):
            out[n] = math.fsum(self.u_down * self.u_up[n:n + Y])
        return out

    def identity_residual(self) -> np.ndarray:
        return np.abs(self.u - self.identity_rhs())

    def residual_csv(self, path: str | Path | None = None) -> str:
        rhs = self.identity_rhs()
        rows = np.column_stack([np.arange(self.u.size), self.u, rhs, np.abs(self.u - rhs)])
        return _write_csv(rows, ("n", "U", "ladder_convolution", "residual"), path)


def _forward_occupation(walk: SignedLattice, n_max: int, K: int) -> np.ndarray:
    ks, ps = walk.ks, walk.ps
    a = max(0, -int(ks.min()))
    b = max(0, int(ks.max()))
    lo = -a * K
    size = (a + b) * K + 1
    dist = np.zeros(size)
    dist[-lo] = 1.0
    u = np.zeros(n_max + 1)
    top = min(n_max, b * K) + 1
    u[:top] += dist[-lo:-lo + top]
    for _ in range(K):
        new = np.zeros(size)
        for k, p in zip(ks, ps):
            if k >= 0:
                new[k:] += p * dist[: size - k]
            else:
                new[: size + k] += p * dist[-k:]
        dist = new
        u[:top] += dist[-lo:-lo + top]
    return u


def _ascending_heights(walk: SignedLattice, tol: float = 1e-17) -> np.ndarray:
    ks, ps = walk.ks, walk.ps
    a = max(0, -int(ks.min()))
    b = int(ks.max())
    if b <= 0:
        raise ValueError("walk never moves up")
    rho = min(walk.mgf_neg(t) for t in np.linspace(1e-3, _theta_range(walk), 200))
    iters = int(math.ceil(math.log(tol) / math.log(rho))) + 10 if rho < 1 else 100000
    depth = a * iters + 1
    # state index i holds position -i
    dist = np.zeros(depth)
    dist[0] = 1.0
    pmf = np.zeros(b + 1)
    for _ in range(iters):
        new = np.zeros(depth)
        for k, p in zip(ks, ps):
            if k > 0:
                # positions -i + k > 0 exit with height k - i
                ex = min(k, depth)
                pmf[k - np.arange(ex)] += p * dist[:ex]
                new[: depth - k] += p * dist[k:]
            elif k == 0:
                new += p * dist
            else:
                new[-k:] += p * dist[: depth + k]
        dist = new
        if dist.sum() < tol:
            break
    return pmf


def _descending_heights(walk: SignedLattice, tol: float = 1e-17) -> np.ndarray:
    ks, ps = walk.ks, walk.ps
    a = max(0, -int(ks.min()))
    if a == 0:
        return np.zeros(1)
    theta = cramer_root(walk)
    B = int(math.ceil(math.log(1.0 / tol) / theta)) + int(ks.max()) + 1
    pmf = np.zeros(a + 1)
    # state index j holds position j (1..B); index 0 unused
    dist = np.zeros(B + 1)
    for k, p in zip(ks, ps):
        if k <= 0:
            pmf[-k] += p
        elif k <= B:
            dist[k] += p
    for _ in range(10**6):
        if dist.sum() < tol:
            break
        new = np.zeros(B + 1)
        for k, p in zip(ks, ps):
            if k >= 0:
                new[1 + k:] += p * dist[1:B + 1 - k] if k < B else 0.0
            else:
                # from j to j + k: <= 0 when j <= -k
                j = np.arange(1, -k + 1)
                j = j[j <= B]
                pmf[-(j + k)] += p * dist[j]
                new[1:B + 1 + k] += p * dist[1 - k:]
        dist = new
    else:
        raise TruncationError("descending ladder DP did not converge")
    return pmf


def ladder_lattice_exact(walk: SignedLattice, n_max: int, tol: float = 1e-8,
                         max_cells: int = 5 * 10**7) -> LatticeLadderExact:
    """Exact U, U↑, U↓ on the integers for a finite signed lattice walk."""
    if not isinstance(walk, SignedLattice):
        raise TypeError("exact ladder computation needs a SignedLattice walk")
    K = chernoff_horizon(walk, level=float(n_max), tol=tol)
    span = int(walk.ks.max() - min(0, walk.ks.min())) * K + 1
    if span * K > max_cells:
        raise TruncationError(f"truncation at K={K} needs {span * K} cells, above {max_cells}")
    u = _forward_occupation(walk, n_max, K)
    h_up = _ascending_heights(walk)
    h_down = _descending_heights(walk)
    C_target = 1.0 / (1.0 - h_down.sum())
    # U↓ renewal masses until the remaining mass is negligible
    Y = 64
    while True:
        w = np.zeros(Y)
        w[: min(Y, h_down.size)] = h_down[:Y]
        u_down = _kernels.lattice_renewal(w)
        if C_target - u_down.sum() < 1e-14 * C_target or Y > 10**6:
            break
        Y *= 2
    up_pmf = {k: p for k, p in enumerate(h_up) if k > 0 and p > 0}
    total = sum(up_pmf.values())
    up_pmf = {k: p / total for k, p in up_pmf.items()}
    u_up = renewal_lattice(up_pmf, n_max + Y)
    return LatticeLadderExact(u, u_up, u_down, h_up / total, h_down, walk.mean, K)


# ---------------------------------------------------------------- empirical ladder law


class EmpiricalTail(TailModel):
    """Tail model of an empirical sample, optionally with a known mean.

    Φ̄ and Φ̄̄ are written through E min(H, z), which is bounded, so a heavy
    tail in the sample enters only through ``mean``.
    """

    family = "empirical"

    def __init__(self, samples, mean: float | None = None):
        s = np.sort(np.asarray(samples, dtype=float))
        if s.size == 0 or s[0] <= 0 or not np.all(np.isfinite(s)):
            raise ValueError("empirical tail needs finite positive samples")
        self._s = s
        self._c1 = np.concatenate([[0.0], np.cumsum(s)])
        self._c2 = np.concatenate([[0.0], np.cumsum(s * s)])
        self._mean = float(self._c1[-1] / s.size) if mean is None else float(mean)
        if not self._mean > 0:
            raise ValueError("mean must be positive")

    @property
    def mean(self) -> float:
        return self._mean

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return (self._s.size - np.searchsorted(self._s, x, side="right")) / self._s.size

    def density(self, x):
        raise NotImplementedError("empirical laws have no density")

    def dphi(self, y, side="right"):
        return np.zeros_like(np.asarray(y, dtype=float))

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(self._s, x, side="right")
        return x, i, self._s.size - i

    def phi_bar(self, x):
        """1 - E min(H, x)/m."""
        x, i, above = self._split(x)
        emin = (self._c1[i] + x * above) / self._s.size
        return 1.0 - emin / self._mean

    def phi_bar_int(self, x):
        """x - E[∫_0^x min(H, z) dz]/m."""
        x, i, above = self._split(x)
        inner = (x * self._c1[i] - 0.5 * self._c2[i] + 0.5 * x * x * above) / self._s.size
        return x - inner / self._mean

    def inverse_tail(self, u):
        raise NotImplementedError


# ---------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True, eq=False)
class LadderEstimate:
    walk: object
    n_paths: int
    horizon: int
    seed: int
    n_batches: int
    h_up: np.ndarray = field(repr=False)  # per path; NaN when the path never went up
    n_down: np.ndarray = field(repr=False)
    down_width: float
    down_counts: np.ndarray = field(repr=False)  # (batch, bin) descending ladder counts
    occ_step: float
    occ_counts: np.ndarray = field(repr=False)  # (batch, cell) visit counts
    occ_sq: np.ndarray = field(repr=False)  # per-path squares of cumulative counts, summed
    horizon_bound: float

    # -- ladder summaries
    def batch_slices(self) -> list[slice]:
        edges = [(b * self.n_paths) // self.n_batches for b in range(self.n_batches + 1)]
        return [slice(edges[b], edges[b + 1]) for b in range(self.n_batches)]

    @cached_property
    def h_up_samples(self) -> np.ndarray:
        return self.h_up[~np.isnan(self.h_up)]

    @cached_property
    def m_up(self) -> float:
        return float(np.mean(self.h_up_samples))

    @property
    def stderr_m_up(self) -> float:
        return float(np.std(self.h_up_samples, ddof=1) / math.sqrt(self.h_up_samples.size))

    @property
    def C(self) -> float:
        return float(1.0 + self.n_down.mean())

    @property
    def stderr_C(self) -> float:
        return float(np.std(self.n_down, ddof=1) / math.sqrt(self.n_paths))

    @property
    def m_up_from_C(self) -> float:
        """m↑ through C = m↑/m; light-tailed, unlike the sample mean of H↑."""
        return self.C * self.walk.mean

    @property
    def defect_prob(self) -> float:
        """Fraction of paths with no descending ladder epoch."""
        return float(np.mean(self.n_down == 0))

    @property
    def stderr_defect_prob(self) -> float:
        p = self.defect_prob
        return math.sqrt(p * (1 - p) / self.n_paths)

    @property
    def u_down_masses(self) -> np.ndarray:
        """U↓ atoms at y_k = k·down_width, including the unit atom at 0."""
        out = self.down_counts.sum(axis=0) / self.n_paths
        out[0] += 1.0
        return out

    def summary_csv(self, path: str | Path | None = None) -> str:
        row = np.array([[self.m_up, self.C, self.defect_prob,
                         self.stderr_m_up, self.stderr_C, self.stderr_defect_prob]])
        cols = ("m_up", "C", "defect_prob", "stderr_m_up", "stderr_C", "stderr_defect_prob")
        return _write_csv(row, cols, path)

    # -- occupation
    @property
    def occ_x(self) -> np.ndarray:
        return np.arange(self.occ_counts.shape[1]) * self.occ_step

    def _batch_sizes(self) -> np.ndarray:
        return np.array([s.stop - s.start for s in self.batch_slices()], dtype=float)

    @property
    def U_hat(self) -> np.ndarray:
        """Mean number of n <= horizon with S_n in [0, x]."""
        return np.cumsum(self.occ_counts.sum(axis=0)) / self.n_paths

    def U_hat_batches(self) -> np.ndarray:
        return np.cumsum(self.occ_counts, axis=1) / self._batch_sizes()[:, None]

    @property
    def U_hat_stderr(self) -> np.ndarray:
        n = self.n_paths
        mean = self.U_hat
        var = (self.occ_sq / n - mean * mean) * n / (n - 1)
        return np.sqrt(np.maximum(var, 0.0) / n)

    def occupation_csv(self, path: str | Path | None = None, stride: int = 1) -> str:
        rows = np.column_stack([self.occ_x, self.U_hat, self.U_hat_stderr])
        return _write_csv(rows[_stride_index(rows.shape[0], stride)], ("x", "U_hat", "stderr"), path)


def _batch_stderr(batches: np.ndarray) -> np.ndarray:
    B = batches.shape[0]
    if B < 2:
        return np.full(batches.shape[1:], np.nan)
    return np.std(batches, axis=0, ddof=1) / math.sqrt(B)


def simulate_ladders(walk, n_paths: int, horizon: int | None = None, seed: int = 0,
                     occ_step: float = 1.0, occ_max: float = 100.0, down_width: float | None = None,
                     n_batches: int = 20, chunk_cells: int = 4 * 10**6) -> LadderEstimate:
    """Simulate ``n_paths`` walks of length ``horizon``.

    Chunk c of paths draws from ``default_rng(SeedSequence([seed, c]))``; the
    chunk size depends only on the horizon, so a given seed and path count
    always produce the same numbers.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    if horizon is None:
        horizon = chernoff_horizon(walk, level=occ_max, tol=1e-4)
    bound = visit_tail_bound(walk, 0.0, horizon)
    if bound > 1e-3:
        warnings.warn(f"horizon {horizon}: bound on a later descending ladder epoch is "
                      f"{bound:.2e} > 1e-3", HorizonWarning, stacklevel=2)
    if walk.lattice:
        occ_step, down_width = 1.0, 1.0
    elif down_width is None:
        down_width = occ_step / 4.0
    n_occ = int(round(occ_max / occ_step))
    n_batches = min(n_batches, n_paths)
    chunk = max(1, chunk_cells // horizon)
    h_up = np.empty(n_paths)
    n_down = np.empty(n_paths, dtype=np.int64)
    occ = np.zeros((n_batches, n_occ + 1), dtype=np.int64)
    occ_sq = np.zeros(n_occ + 1)
    down_vals, down_batch = [], []
    batch_of = (np.arange(n_paths) * n_batches) // n_paths
    for c, start in enumerate(range(0, n_paths, chunk)):
        stop = min(n_paths, start + chunk)
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        steps = walk.sample(rng, (stop - start, horizon)).astype(float)
        dv = np.empty(steps.size)
        db = np.empty(steps.size, dtype=np.int64)
        nd = _kernels.walk_paths(steps, batch_of[start:stop], occ_step, occ, occ_sq,
                                 h_up[start:stop], n_down[start:stop], dv, db)
        down_vals.append(dv[:nd])
        down_batch.append(db[:nd])
    dv = np.concatenate(down_vals)
    db = np.concatenate(down_batch)
    idx = np.rint(dv / down_width).astype(np.int64)
    nbins = int(idx.max()) + 1 if idx.size else 1
    down = np.zeros((n_batches, nbins))
    np.add.at(down, (db, idx), 1.0)
    missing = int(np.isnan(h_up).sum())
    if missing:
        warnings.warn(f"{missing} paths never entered (0, inf) within the horizon",
                      HorizonWarning, stacklevel=2)
    return LadderEstimate(walk, n_paths, horizon, seed, n_batches, h_up,
                          n_down, down_width, down, occ_step, occ, occ_sq, bound)


# ---------------------------------------------------------------- centering for two-sided walks


def phi_bar_up(est: LadderEstimate, z):
    """Empirical (1/m↑)∫_z^∞ P(H↑ > w) dw."""
    return EmpiricalTail(est.h_up_samples, est.m_up_from_C).phi_bar(z)


def _v_up(walk, up: EmpiricalTail, ys: np.ndarray, step: float) -> np.ndarray:
    """V↑(y) = m↑U↑(y) - y - Φ̄̄↑(y) at the points ``ys``."""
    h_up = up._s
    y_max = float(ys.max()) if ys.size else 0.0
    if walk.lattice:
        vals, cnts = np.unique(np.rint(h_up).astype(np.int64), return_counts=True)
        n = int(round(y_max))
        u = renewal_lattice(dict(zip(vals.tolist(), (cnts / cnts.sum()).tolist())), n)
        U = np.cumsum(u)[np.rint(ys).astype(np.int64)]
    else:
        grid = Grid(step, max(1, int(math.ceil(y_max / step))))
        U_grid = renewal_u(up, grid)
        U = U_grid[np.rint(ys / step).astype(np.int64)]
    return up.mean * U - ys - up.phi_bar_int(ys)


K_MODES = ("auto", "zero", "integral")


def _k_mode(walk, mode: str) -> str:
    if mode not in K_MODES:
        raise ValueError(f"K mode must be one of {K_MODES}")
    if mode != "auto":
        return mode
    tm = walk.tail_model
    if tm is None or tm.phi_bar_sq_integrable:
        return "integral"
    return "zero"


def _psi_parts(walk, h_up, m_up, u_down, width, x, mode, step):
    up = EmpiricalTail(h_up, m_up)
    ys = np.arange(u_down.size) * width
    keep = u_down > 0
    ys, w = ys[keep], u_down[keep]
    pbi = up.phi_bar_int
    inner = pbi(x[:, None] + ys[None, :]) - pbi(ys)[None, :]
    psi = (inner @ w) / m_up
    K = 0.0
    if mode == "integral":
        K = float(np.dot(w, _v_up(walk, up, ys, step)) / m_up - u_down[0])
    return psi - K, K


def psi(est: LadderEstimate, x, K_mode: str = "auto") -> np.ndarray:
    """Ψ(x) = (1/m↑)∫U↓(dy)∫_y^{x+y}Φ̄↑(z)dz - K.

    In the integral mode K = (1/m↑)∫U↓(dy)V↑(y) - U↓({0}), which vanishes for
    a walk without negative steps.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mode = _k_mode(est.walk, K_mode)
    out, _ = _psi_parts(est.walk, est.h_up_samples, est.m_up_from_C, est.u_down_masses, est.down_width,
                        x, mode, est.down_width)
    return out


def k_constant(est: LadderEstimate, K_mode: str = "auto") -> float:
    mode = _k_mode(est.walk, K_mode)
    _, K = _psi_parts(est.walk, est.h_up_samples, est.m_up_from_C, est.u_down_masses, est.down_width,
                      np.zeros(1), mode, est.down_width)
    return K


@dataclass(frozen=True, eq=False)
class VTildeReport:
    x: np.ndarray
    V_tilde: np.ndarray
    stderr: np.ndarray
    normalizer: np.ndarray
    ratio: np.ndarray
    target: float
    regime: str
    K: float
    K_mode: str

    COLUMNS = ("x", "V_tilde", "stderr", "normalizer", "ratio", "target")

    def to_csv(self, path: str | Path | None = None) -> str:
        rows = np.column_stack([self.x, self.V_tilde, self.stderr, self.normalizer,
                                self.ratio, np.full_like(self.x, self.target)])
        return _write_csv(rows, self.COLUMNS, path)


def v_tilde_report(est: LadderEstimate, xs=None, K_mode: str = "auto") -> VTildeReport:
    """Ṽ(x) = m(Û(x) - x/m - Ψ(x)) with batch-means standard errors."""
    walk = est.walk
    m = walk.mean
    mode = _k_mode(walk, K_mode)
    grid_x = est.occ_x
    if xs is None:
        idx = np.arange(grid_x.size)
    else:
        idx = np.rint(np.asarray(xs, dtype=float) / est.occ_step).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= grid_x.size):
            raise ValueError("checkpoints outside the simulated occupation range")
    x = grid_x[idx]
    step = est.down_width

    psi_all, K = _psi_parts(walk, est.h_up_samples, est.m_up_from_C, est.u_down_masses,
                            est.down_width, x, mode, step)
    V = m * (est.U_hat[idx] - x / m - psi_all)

    Ub = est.U_hat_batches()[:, idx]
    sizes = est._batch_sizes()
    vb = []
    for b, sl in enumerate(est.batch_slices()):
        n_b = sizes[b]
        h_b = est.h_up[sl]
        h_b = h_b[~np.isnan(h_b)]
        ud = est.down_counts[b] / n_b
        ud[0] += 1.0
        m_b = (1.0 + est.n_down[sl].mean()) * m
        p_b, _ = _psi_parts(walk, h_b, m_b, ud, est.down_width, x, mode, step)
        vb.append(m * (Ub[b] - x / m - p_b))
    se = _batch_stderr(np.array(vb))

    tm = walk.tail_model
    if tm is None:
        regime = "light"
    else:
        regime = classify_regime(tm)
    if regime == "m2":
        beta = tm.beta
        norm = x * np.asarray(walk.phi_bar(x)) ** 2
        target = c_alpha(beta) / (1.0 - 2.0 * beta)
    elif regime == "m3":
        sq = np.asarray(walk.phi_bar(grid_x)) ** 2
        panels = np.concatenate([[0.0], 0.5 * est.occ_step * (sq[1:] + sq[:-1])])
        norm = _kernels.compensated_cumsum(panels)[idx]
        target = 0.0
    else:
        norm = np.ones_like(x)
        target = math.nan if regime == "m4" else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = V / norm
    noisy = np.abs(V) < 2 * se
    if noisy.any():
        warnings.warn(f"|V_tilde| below two standard errors at {int(noisy.sum())} of {x.size} points",
                      RuntimeWarning, stacklevel=2)
    return VTildeReport(x, V, se, norm, ratio, target, regime, K, mode)


# ---------------------------------------------------------------- csv


def _stride_index(n: int, stride: int) -> np.ndarray:
    keep = np.arange(0, n, max(1, stride))
    if keep[-1] != n - 1:
        keep = np.append(keep, n - 1)
    return keep


def _write_csv(rows: np.ndarray, columns, path=None) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(rows), fmt="%.17g", delimiter=",",
               header=",".join(columns), comments="")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
