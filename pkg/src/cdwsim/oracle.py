"""Independent ground-truth engines.

Nothing here shares code paths with the closed-form constructions or the
record engine: thresholds come from exhaustive enumeration over bounded
Laplacians, and the threshold-to-threshold totality is replayed as a pocketed
sandpile stabilization.  Used by the test suite as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSizeError
from .evolution import _t2t_paths
from .lattice import Disorder, ModelParams, invert_laplacian
from .toy_model import positive_threshold

__all__ = [
    "brute_threshold",
    "SandpileState",
    "sandpile_stabilize",
    "correspondence_check",
]

_MAX_BRUTE_L = 12


def _admissible_laplacians(L: int, bound: int, chunk: int = 200_000):
    """Yield integer vectors with entries in [-bound, bound], zero sum and
    weighted sum divisible by L: exactly the Laplacians of integer fields.

    Enumerates the first L-1 entries mixed-radix and solves for the last.
    """
    base = 2 * bound + 1
    total = base ** (L - 1)
    weights = np.arange(L - 1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = np.empty((idx.shape[0], L - 1), dtype=np.int64)
        rem = idx
        for pos in range(L - 1):
            digits[:, L - 2 - pos] = rem % base
            rem = rem // base
        digits -= bound
        last = -digits.sum(axis=1)
        ok = np.abs(last) <= bound
        if not ok.any():
            continue
        digits = digits[ok]
        last = last[ok]
        weighted = digits @ weights + (L - 1) * last
        ok2 = weighted % L == 0
        if not ok2.any():
            continue
        out = np.concatenate([digits[ok2], last[ok2, None]], axis=1)
        yield out


def brute_threshold(
    disorder: Disorder,
    bound: int = 3,
    model: str = "toy",
    params: ModelParams | None = None,
):
    """Exhaustive min-max / max-min threshold search over bounded Laplacians.

    Enumerates every admissible laplacian(m) with entries in [-bound, bound]
    and returns (m_plus, m_minus), both min-normalized.  The toy criterion
    ranks candidates by max/min of laplacian(m) + laplacian(alpha); the full
    criterion by the well coordinates of the untruncated chain.  Exponential
    in L; refuses chains longer than 12 sites.
    """
    L = disorder.L
    if L > _MAX_BRUTE_L:
        raise InfeasibleSizeError(f"exhaustive search infeasible for L={L} > {_MAX_BRUTE_L}")
    if bound < 3:
        raise ValueError("bound below 3 can exclude the optimum")
    dalpha = np.roll(disorder.alpha, 1) - 2 * disorder.alpha + np.roll(disorder.alpha, -1)
    if model == "full":
        if params is None:
            raise ValueError("full-model search needs params")
        eta = params.eta
        d = np.arange(L, dtype=np.float64)
        dist = np.abs(d[:, None] - d[None, :])
        dist = np.minimum(dist, L - dist)
        etaL = eta**L
        w = (eta ** dist + eta ** (L - dist)) / (1.0 - etaL)
        kernel = (eta / (1.0 - eta**2)) * w
    best_max = np.inf
    best_min = -np.inf
    arg_max = None
    arg_min = None
    for cand in _admissible_laplacians(L, bound):
        zc = cand + dalpha
        if model == "full":
            vals = zc @ kernel.T
        else:
            vals = zc
        row_max = vals.max(axis=1)
        row_min = vals.min(axis=1)
        k = int(np.argmin(row_max))
        if row_max[k] < best_max:
            best_max = row_max[k]
            arg_max = cand[k].copy()
        k = int(np.argmax(row_min))
        if row_min[k] > best_min:
            best_min = row_min[k]
            arg_min = cand[k].copy()
    m_plus = invert_laplacian(arg_max)
    m_minus = invert_laplacian(arg_min)
    return m_plus, m_minus


@dataclass
class SandpileState:
    """Heights on sites 1..n of an open-boundary pile; the implicit pockets at
    0 and n+1 absorb grains.  Stable iff every height is 0 or 1."""

    h: np.ndarray

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def stable(self) -> bool:
        return bool((self.h <= 1).all())

    def copy(self) -> "SandpileState":
        return SandpileState(self.h.copy())


def sandpile_stabilize(state: SandpileState, rng: np.random.Generator | None = None):
    """Topple while any height is >= 2: the site loses two grains, each
    neighbor (or pocket) gains one.  Toppling order is irrelevant for the
    result; the default topples every unstable site per sweep (vectorized),
    pass an rng to topple one random site at a time instead.
    Returns (stable state, topples)."""
    h = state.h.copy()
    n = h.shape[0]
    topples = 0
    if rng is None:
        while True:
            over = h >= 2
            count = int(over.sum())
            if count == 0:
                return SandpileState(h), topples
            h -= 2 * over
            h[:-1] += over[1:]
            h[1:] += over[:-1]
            topples += count
    while True:
        over = np.nonzero(h >= 2)[0]
        if over.shape[0] == 0:
            return SandpileState(h), topples
        j = int(over[rng.integers(over.shape[0])])
        h[j] -= 2
        if j > 0:
            h[j - 1] += 1
        if j < n - 1:
            h[j + 1] += 1
        topples += 1


def correspondence_check(disorder: Disorder, rng: np.random.Generator | None = None):
    """Replay the threshold-to-threshold evolution as a sandpile stabilization.

    Alignment convention: the pile is the arc strictly between the two
    termination sites (the two smallest zeta values), walked left-terminal to
    right-terminal through k-; the terminals are the pockets.  The negative
    threshold maps to all-ones with the extra grain at k-'s image; the
    positive threshold must map to ones with a single empty site at k+'s
    image, and the topple count must equal the total jump count Sigma(0).

    Returns a dict report; ``ok`` is the conjunction of all checks.
    """
    L = disorder.L
    (init_off, ext_a, ext_b, size, sigma, xb, xa, jl, jr, k_minus) = _t2t_paths(disorder)
    degenerate = init_off.shape[0] == 0
    _, _, k_plus = positive_threshold(disorder)
    if degenerate:
        ok = True
        report = {
            "ok": ok,
            "degenerate": True,
            "topples": 0,
            "sigma0": 0,
            "final_match": True,
            "L": L,
        }
        return report
    p_l, p_r = int(jl[-1]), int(jr[-1])  # terminals in k-centered offsets
    n_sites = p_r - p_l - 1
    h = np.ones(n_sites, dtype=np.int64)
    grain_at = -p_l - 1  # image of k- (offset 0), 0-based within the arc
    h[grain_at] += 1
    final, topples = sandpile_stabilize(SandpileState(h), rng)
    sigma0 = int(sigma[-1])
    # expected final: single empty site at the image of k+
    kp_off = (k_plus - k_minus) % L
    if kp_off > p_r:
        kp_off -= L
    expected = np.ones(n_sites, dtype=np.int64)
    in_arc = p_l < kp_off < p_r
    if in_arc:
        expected[kp_off - p_l - 1] = 0
    final_match = in_arc and bool(np.array_equal(final.h, expected))
    ok = final_match and topples == sigma0
    return {
        "ok": ok,
        "degenerate": False,
        "topples": topples,
        "sigma0": sigma0,
        "final_match": final_match,
        "L": L,
    }
