"""Compiled O(n²) loops.

The loops are serial and register-blocked; every output is summed in a fixed
order, so results are bitwise reproducible.
"""

from __future__ import annotations

import os

import numba
import numpy as np

_BLOCK = 8


def set_threads(n: int | None = None) -> int:
    """Cap numba's thread pool (``RENEWAL_THREADS``; 0 or unset means all)."""
    if n is None:
        n = int(os.environ.get("RENEWAL_THREADS", "0") or 0)
    if n < 0:
        raise ValueError("thread count must be non-negative")
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n == 0 else min(n, limit)
    numba.set_num_threads(n)
    return n


@numba.njit(fastmath=True, cache=True)
def causal_conv(a, b):
    """out[i] = sum_{j<=i} b[j] a[i-j], eight outputs per pass over b."""
    n = a.size
    out = np.empty(n)
    i = 0
    while i + _BLOCK <= n:
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        s4 = 0.0
        s5 = 0.0
        s6 = 0.0
        s7 = 0.0
        for j in range(i + 1):
            bj = b[j]
            k = i - j
            s0 += bj * a[k]
            s1 += bj * a[k + 1]
            s2 += bj * a[k + 2]
            s3 += bj * a[k + 3]
            s4 += bj * a[k + 4]
            s5 += bj * a[k + 5]
            s6 += bj * a[k + 6]
            s7 += bj * a[k + 7]
        out[i] = s0
        out[i + 1] = s1
        out[i + 2] = s2
        out[i + 3] = s3
        out[i + 4] = s4
        out[i + 5] = s5
        out[i + 6] = s6
        out[i + 7] = s7
        for q in range(1, _BLOCK):
            s = 0.0
            for j in range(i + 1, i + q + 1):
                s += b[j] * a[i + q - j]
            out[i + q] += s
        i += _BLOCK
    while i < n:
        s = 0.0
        for j in range(i + 1):
            s += b[j] * a[i - j]
        out[i] = s
        i += 1
    return out


@numba.njit(fastmath=True, cache=True)
def lattice_renewal(w):
    """Renewal masses r of the defective-at-0 lattice law w.

    Solves r = delta_0 + w * r, i.e. r_k (1 - w_0) = [k = 0] + sum_{j>=1} w_j r_{k-j}.
    Four outputs are produced per pass over the history.
    """
    n = w.size - 1
    r = np.zeros(n + 1)
    d = 1.0 - w[0]
    r[0] = 1.0 / d
    k = 1
    while k + 3 <= n:
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        for t in range(k):
            rt = r[t]
            m = k - t
            s0 += rt * w[m]
            s1 += rt * w[m + 1]
            s2 += rt * w[m + 2]
            s3 += rt * w[m + 3]
        r[k] = s0 / d
        s1 += r[k] * w[1]
        r[k + 1] = s1 / d
        s2 += r[k] * w[2] + r[k + 1] * w[1]
        r[k + 2] = s2 / d
        s3 += r[k] * w[3] + r[k + 1] * w[2] + r[k + 2] * w[1]
        r[k + 3] = s3 / d
        k += 4
    while k <= n:
        s = 0.0
        for j in range(1, k + 1):
            s += w[j] * r[k - j]
        r[k] = s / d
        k += 1
    return r


@numba.njit(cache=True)
def compensated_cumsum(x):
    """Running sum with Neumaier compensation."""
    out = np.empty(x.size)
    s = 0.0
    c = 0.0
    for i in range(x.size):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@numba.njit(cache=True)
def pmf_renewal(ks, ps, n_max):
    """u_0 = 1, u_n = sum_k p_k u_{n-k} for a pmf on positive integers."""
    u = np.zeros(n_max + 1)
    u[0] = 1.0
    for n in range(1, n_max + 1):
        s = 0.0
        for j in range(ks.size):
            k = ks[j]
            if k <= n:
                s += ps[j] * u[n - k]
        u[n] = s
    return u


@numba.njit(cache=True)
def walk_paths(steps, batch, occ_step, occ, occ_sq, h_up, n_down, down_vals, down_batch):
    """Scan simulated paths for ladder points and occupation counts.

    Per path: the first strict ascending ladder height (NaN if none), every
    weak descending ladder height, and visits of S_0..S_T to the cells
    ((k-1)·occ_step, k·occ_step] (cell 0 holds the value 0).  ``occ_sq``
    accumulates squares of each path's cumulative visit counts.
    Returns the number of descending heights written.
    """
    n_paths, horizon = steps.shape
    n_occ = occ.shape[1] - 1
    mine = np.zeros(n_occ + 1, dtype=np.int64)
    nd = 0
    for p in range(n_paths):
        b = batch[p]
        mine[:] = 0
        s = 0.0
        low = 0.0
        up = np.nan
        cnt = 0
        mine[0] += 1
        for t in range(horizon):
            s += steps[p, t]
            if np.isnan(up) and s > 0.0:
                up = s
            if s <= low:
                low = s
                down_vals[nd] = -s
                down_batch[nd] = b
                nd += 1
                cnt += 1
            if s >= 0.0:
                k = int(np.ceil(s / occ_step))
                if k <= n_occ:
                    mine[k] += 1
        run = 0
        for k in range(n_occ + 1):
            occ[b, k] += mine[k]
            run += mine[k]
            occ_sq[k] += run * run
        h_up[p] = up
        n_down[p] = cnt
    return nd
