"""Compiled inner loops for the flat-to-threshold campaigns.

Flat evolution has no record shortcut, so large-L campaigns run this kernel:
one iteration per complete avalanche, each applied as the four-point z update
plus integer counters (never the individual jumps).  A two-level block maximum
keeps the argmax query at O(sqrt L) after the four point updates per
avalanche.

Termination is structural, not tolerance-based: at the threshold family the
extent scan either finds no flank within one period, or the two scans meet in
a single flank whose z is within 2 of the peak (the cascade would wrap the
whole ring and return the same family).  Both signatures are impossible for a
pinned non-threshold configuration.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["flat_sigma_run"]


@njit(cache=True)
def _refresh_block(z, bmax, blk, bs, L):
    lo = blk * bs
    hi = min(lo + bs, L)
    m = z[lo]
    for t in range(lo + 1, hi):
        if z[t] > m:
            m = z[t]
    bmax[blk] = m


@njit(cache=True)
def _global_argmax(z, bmax, bs, L):
    nb = bmax.shape[0]
    best = 0
    for b in range(1, nb):
        if bmax[b] > bmax[best]:
            best = b
    lo = best * bs
    hi = min(lo + bs, L)
    arg = lo
    for t in range(lo + 1, hi):
        if z[t] > z[arg]:
            arg = t
    return arg


@njit(cache=True)
def _flat_kernel(z, zp_max, xs_desc, out_sigma, cap):
    """Returns (sigma_total, n_avalanches, n_waves, x_final, status).

    status 0: reached threshold; 1: avalanche cap exceeded.
    xs_desc must be sorted descending; out_sigma gets Sigma at the first
    configuration whose X is <= the grid value.
    """
    L = z.shape[0]
    bs = 1
    while bs * bs < L:
        bs += 1
    nb = (L + bs - 1) // bs
    bmax = np.empty(nb)
    for b in range(nb):
        _refresh_block(z, bmax, b, bs, L)

    sigma = 0
    n_av = 0
    n_w = 0
    gi = 0
    ng = xs_desc.shape[0]
    while True:
        i = _global_argmax(z, bmax, bs, L)
        zi = z[i]
        x = zi - zp_max
        while gi < ng and xs_desc[gi] >= x:
            out_sigma[gi] = sigma
            gi += 1
        # extent scan; a == 0 or b == 0 below means no flank within a period
        a = 0
        for step in range(1, L):
            if z[(i - step) % L] <= zi - 1.0:
                a = step
                break
        b = 0
        for step in range(1, L):
            if z[(i + step) % L] <= zi - 1.0:
                b = step
                break
        if a == 0 or b == 0:
            break  # every other site within 1 of the peak: threshold family
        if a + b == L and z[(i - a) % L] > zi - 2.0:
            break  # single flank that the wrapped cascade would also jump
        il = (i - a) % L
        ir = (i + b) % L
        z[il] += 1.0
        z[ir] += 1.0
        if a == b:
            z[i] -= 2.0
        else:
            z[i] -= 1.0
            z[(i - a + b) % L] -= 1.0
        _refresh_block(z, bmax, il // bs, bs, L)
        _refresh_block(z, bmax, ir // bs, bs, L)
        _refresh_block(z, bmax, i // bs, bs, L)
        _refresh_block(z, bmax, ((i - a + b) % L) // bs, bs, L)
        sigma += a * b
        n_av += 1
        n_w += min(a, b)
        if n_av > cap:
            return sigma, n_av, n_w, x, 1
    i = _global_argmax(z, bmax, bs, L)
    x_final = z[i] - zp_max
    while gi < ng:
        out_sigma[gi] = sigma
        gi += 1
    return sigma, n_av, n_w, x_final, 0


def flat_sigma_run(z0: np.ndarray, zp_max: float, x_grid: np.ndarray, cap: int = 100_000_000):
    """Evolve a flat-start configuration to threshold, sampling Sigma(x).

    z0 is consumed (copied internally).  x_grid in any order; the returned
    samples match its order.  Returns (sigma_at_grid, sigma_total,
    n_avalanches, n_waves, x_final).
    """
    z = np.array(z0, dtype=np.float64)
    order = np.argsort(x_grid)[::-1]
    xs_desc = np.ascontiguousarray(np.asarray(x_grid, dtype=np.float64)[order])
    out = np.zeros(xs_desc.shape[0], dtype=np.int64)
    sigma, n_av, n_w, x_final, status = _flat_kernel(z, float(zp_max), xs_desc, out, cap)
    if status != 0:
        raise RuntimeError(f"flat kernel exceeded {cap} avalanches")
    back = np.empty_like(out)
    back[order] = out
    return back, int(sigma), int(n_av), int(n_w), float(x_final)
