"""The untruncated periodic chain with geometric interaction kernel.

A static configuration is a pair (m, y~): integer well numbers and real well
coordinates solving the force balance (lam - Laplacian) y = lam (m + alpha) + F
with y~ = y - m - alpha.  Raising the force translates y~ rigidly by dF / lam;
a jump at one site adds a geometric response kernel.  Avalanches and the
zero-force avalanche (ZFA) below evolve configurations toward threshold in
units of single jumps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_circulant

from .errors import IterationCapError, SlidingError
from .lattice import Disorder, ModelParams, nearest_integer

__all__ = [
    "FullConfig",
    "well_coords_full",
    "jump_response_full",
    "avalanche_with_force",
    "zfa_full",
    "threshold_full",
    "jump_kernel",
]

# FP guard for the cascade comparisons; legitimate exceedances are of the order
# of disorder gaps (>> 1e-9 a.s.), spurious ones are a few ulp.
_EDGE_TOL = 1e-9


@dataclass
class FullConfig:
    """Well numbers and well coordinates, valid at force F."""

    m: np.ndarray
    ytilde: np.ndarray
    F: float = 0.0

    def copy(self) -> "FullConfig":
        return FullConfig(self.m.copy(), self.ytilde.copy(), self.F)


def well_coords_full(m: np.ndarray, disorder: Disorder, params: ModelParams) -> np.ndarray:
    """Well coordinates for well numbers m at force params.F.

    Solves the periodic force balance by the circulant structure of
    (lam - Laplacian); tests compare against a dense solve.
    """
    lam = params.lam
    L = disorder.L
    c = np.zeros(L)
    c[0] = lam + 2.0
    c[1] = -1.0
    c[-1] = -1.0
    b = lam * (m + disorder.alpha) + params.F
    y = solve_circulant(c, b)
    return y - m - disorder.alpha


@lru_cache(maxsize=32)
def _kernel_cached(L: int, eta: float, truncated: bool) -> np.ndarray:
    d = np.arange(L, dtype=np.float64)
    pref = (1.0 - eta) / (1.0 + eta)
    if truncated:
        # nearest periodic representative only; O(eta^L) cheaper and dirtier
        k = pref * eta ** np.minimum(d, L - d)
        k[0] = -2.0 * eta / (1.0 + eta)
        return k
    etaL = eta**L
    k = pref * (eta**d + eta ** (L - d)) / (1.0 - etaL)
    k[0] = -2.0 * eta / (1.0 + eta) + pref * 2.0 * etaL / (1.0 - etaL)
    return k


def jump_kernel(L: int, eta: float, truncated: bool = False) -> np.ndarray:
    """Change of y~ caused by one jump, indexed by periodic distance to the
    jumping site.  The exact periodized kernel sums to zero."""
    return _kernel_cached(L, float(eta), bool(truncated))


def jump_response_full(
    ytilde: np.ndarray, j: int, params: ModelParams, truncated: bool = False
) -> np.ndarray:
    """Well coordinates after incrementing the well number at site j."""
    L = ytilde.shape[0]
    return ytilde + np.roll(jump_kernel(L, params.eta, truncated), j)


def _cascade(m, ytilde, cutoff, L, kernel):
    """Jump the running argmax while it exceeds ``cutoff``; first jump is
    unconditional.  Returns the jump count; mutates m and ytilde."""
    seen = np.zeros(L, dtype=bool)
    j = int(np.argmax(ytilde))
    count = 0
    while True:
        if seen[j]:
            raise SlidingError(f"site {j} attempted a second jump; input not pinned")
        seen[j] = True
        m[j] += 1
        ytilde += np.roll(kernel, j)
        count += 1
        j = int(np.argmax(ytilde))
        if ytilde[j] <= cutoff + _EDGE_TOL:
            return count


def avalanche_with_force(
    cfg: FullConfig, disorder: Disorder, params: ModelParams, truncated: bool = False
):
    """One avalanche driven by a force increase.

    Raises the force just enough to bring the highest particle to the cusp of
    its well, jumps it, and cascades while any coordinate exceeds +1/2.
    Returns (new config valid at F*, F*, jump count).
    """
    L = disorder.L
    ymax = float(cfg.ytilde.max())
    dF = params.lam * (0.5 - ymax)
    f_star = cfg.F + dF
    m = cfg.m.copy()
    ytilde = cfg.ytilde + (0.5 - ymax)
    count = _cascade(m, ytilde, 0.5, L, jump_kernel(L, params.eta, truncated))
    if params.eta < 1.0 / 3.0 and cfg.F >= 0.0:
        floor = -0.5 + dF / params.lam
        bad = ytilde <= floor - _EDGE_TOL
        if bad.any():
            raise AssertionError(
                f"bottom-edge bound violated at sites {np.nonzero(bad)[0]}"
            )
    return FullConfig(m, ytilde, f_star), f_star, count


def zfa_full(cfg: FullConfig, disorder: Disorder, params: ModelParams, truncated: bool = False):
    """Zero-force avalanche: record the current maximum coordinate, jump the
    argmax, cascade while any coordinate exceeds the recorded maximum.

    Produces the same well numbers as avalanche_with_force; coordinates differ
    only by the rigid translation that the force increase would cause.
    Returns (new config at F = 0, jump count).
    """
    L = disorder.L
    ymax = float(cfg.ytilde.max())
    m = cfg.m.copy()
    ytilde = cfg.ytilde.copy()
    count = _cascade(m, ytilde, ymax, L, jump_kernel(L, params.eta, truncated))
    return FullConfig(m, ytilde, 0.0), count


def threshold_full(
    disorder: Disorder,
    params: ModelParams,
    cap: int = 500_000,
    truncated: bool = False,
):
    """Threshold well numbers and threshold force by iterated ZFA from m = 0.

    Iterates until one application returns its input plus one everywhere; that
    input is the threshold configuration (unique a.s. up to a uniform integer
    shift).  Returns (min-normalized m+, F_th, number of ZFA applications).
    """
    L = disorder.L
    m = np.zeros(L, dtype=np.int64)
    for n_apps in range(1, cap + 1):
        ytilde = well_coords_full(m, disorder, params)
        cfg, _ = zfa_full(FullConfig(m, ytilde, 0.0), disorder, params, truncated)
        if np.array_equal(cfg.m, m + 1):
            f_th = params.lam * (0.5 - float(ytilde.max()))
            return m - m.min(), f_th, n_apps
        m = cfg.m
    raise IterationCapError(f"no fixed family after {cap} ZFA applications")


def consistent(cfg: FullConfig, disorder: Disorder, params: ModelParams, tol: float = 1e-10) -> bool:
    """Self-consistency of a configuration: coordinates solve the force balance
    for its well numbers and every well number is the nearest integer to
    y - alpha."""
    fresh = well_coords_full(cfg.m, disorder, ModelParams(params.L, params.lam, cfg.F))
    if np.max(np.abs(fresh - cfg.ytilde)) > tol:
        return False
    return bool(np.array_equal(nearest_integer(cfg.ytilde + cfg.m), cfg.m))
