"""Nearest-neighbor truncation of the chain, in rescaled coordinates.

With interactions truncated to nearest neighbors the rescaled well coordinate
at zero force is z = laplacian(m) + laplacian(alpha), and a jump at site j is
the integer move z[j] -= 2, z[j +- 1] += 1, m[j] += 1.  Everything here is
exactly solvable: both threshold configurations are explicit functions of the
disorder (built below from omega, S and the ordering sigma), and the maximum
rescaled coordinate at threshold reduces to a five-case formula evaluated in
threshold_max_and_force.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoExtentError, SlidingError
from .lattice import Disorder, ModelParams, invert_laplacian, periodic_laplacian

__all__ = [
    "ToyConfig",
    "z_of",
    "toy_jump",
    "zfa_toy",
    "avalanche_aggregate",
    "positive_threshold",
    "negative_threshold",
    "threshold_zmax",
    "threshold_max_and_force",
    "defect_charges",
]

_EDGE_TOL = 1e-9  # FP guard, small against disorder gaps


@dataclass
class ToyConfig:
    """Integer well numbers and their rescaled well coordinates."""

    m: np.ndarray
    z: np.ndarray

    @classmethod
    def from_disorder(cls, m: np.ndarray, disorder: Disorder) -> "ToyConfig":
        m = np.asarray(m, dtype=np.int64)
        return cls(m=m, z=z_of(m, disorder))

    def copy(self) -> "ToyConfig":
        return ToyConfig(self.m.copy(), self.z.copy())

    @property
    def L(self) -> int:
        return self.m.shape[0]


def z_of(m: np.ndarray, disorder: Disorder) -> np.ndarray:
    """Rescaled well coordinates z = laplacian(m) + laplacian(alpha)."""
    m = np.asarray(m)
    if m.shape[0] != disorder.L:
        raise ValueError(f"length mismatch: m has {m.shape[0]}, disorder has {disorder.L}")
    return periodic_laplacian(m) + periodic_laplacian(disorder.alpha)


def _jump_inplace(m: np.ndarray, z: np.ndarray, j: int) -> None:
    L = m.shape[0]
    m[j] += 1
    z[j] -= 2.0
    z[(j - 1) % L] += 1.0
    z[(j + 1) % L] += 1.0


def toy_jump(cfg: ToyConfig, j: int) -> ToyConfig:
    """One jump at site j.  Conserves sum(z) and every fractional part."""
    out = cfg.copy()
    _jump_inplace(out.m, out.z, j)
    return out


def zfa_toy(cfg: ToyConfig):
    """One zero-force avalanche application.

    Records the current maximum, jumps the argmax unconditionally, then keeps
    jumping the running argmax while it exceeds the recorded maximum.  Each
    site jumps at most once per application.  Returns (new config, array of
    jumped sites in jump order).
    """
    L = cfg.L
    m = cfg.m.copy()
    z = cfg.z.copy()
    zmax = float(z.max())
    j = int(np.argmax(z))
    seen = np.zeros(L, dtype=bool)
    jumped = []
    while True:
        if seen[j]:
            raise SlidingError(f"site {j} attempted a second jump in one application")
        seen[j] = True
        jumped.append(j)
        _jump_inplace(m, z, j)
        j = int(np.argmax(z))
        if z[j] <= zmax + _EDGE_TOL:
            break
    return ToyConfig(m, z), np.array(jumped, dtype=np.int64)


def _extent_scan(z: np.ndarray, i: int, zi: float):
    """Distances to the nearest sites left/right of i with z <= zi - 1."""
    L = z.shape[0]
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
        raise NoExtentError(
            "no avalanche extent within one period; configuration is at or "
            "degenerately close to threshold"
        )
    return a, b


def avalanche_aggregate(cfg: ToyConfig, zplus_max: float | None = None):
    """One complete avalanche applied in a single step.

    From the peak i the extents i_L, i_R are the nearest flanking sites whose z
    is at least 1 below z[i].  The net effect of the whole avalanche is four
    unit changes of z (both flanks up, the peak and its reflection through the
    extent midpoint down; a doubled change at the peak when it is equidistant)
    plus a trapezoidal ramp added to m.  Total jumps: (i - i_L) * (i_R - i).

    Must not be applied to a threshold configuration; there the cascade wraps
    the whole ring and the four-point update no longer describes it.

    Returns (new config, event).  event.X_after is filled only when the caller
    supplies the threshold maximum ``zplus_max``.
    """
    from .evolution import AvalancheEvent  # local import to avoid a cycle

    L = cfg.L
    z = cfg.z.copy()
    m = cfg.m.copy()
    i = int(np.argmax(z))
    zi = float(z[i])
    a, b = _extent_scan(z, i, zi)
    if a + b == L and z[(i - a) % L] > zi - 2.0:
        # single flank that the wrapped cascade would also jump: the input is
        # a threshold configuration and the four-point update does not apply
        raise NoExtentError("configuration is at threshold; aggregate avalanche undefined")
    il, ir = i - a, i + b  # unwrapped; il < i < ir, ir - il <= L
    z[il % L] += 1.0
    z[ir % L] += 1.0
    if a == b:
        z[i] -= 2.0
    else:
        z[i] -= 1.0
        z[(il + ir - i) % L] -= 1.0
    offs = np.arange(il, ir + 1)
    ramp = (
        (offs - il).clip(min=0)
        - (offs - i).clip(min=0)
        - (offs - (il + ir - i)).clip(min=0)
        + (offs - ir).clip(min=0)
    )
    np.add.at(m, offs % L, ramp)
    size = a * b
    x_after = float(z.max()) - zplus_max if zplus_max is not None else float("nan")
    event = AvalancheEvent(
        tau=1,
        init_site=i,
        i_L=il % L,
        i_R=ir % L,
        size=int(size),
        sigma_cum=int(size),
        X_after=x_after,
        X_before=zi - zplus_max if zplus_max is not None else float("nan"),
        j_L=0,
        j_R=0,
        L=L,
    )
    return ToyConfig(m, z), event


def _case_indices(disorder: Disorder, positive: bool) -> np.ndarray:
    """Correction vector J for the requested threshold sign.

    Positive threshold: +1 on the S+1 smallest omega (S >= 0), else -1 on the
    |S|-1 largest.  Negative threshold: +1 on the S-1 smallest (S > 0), else
    -1 on the |S|+1 largest.
    """
    L, S, sigma = disorder.L, disorder.S, disorder.sigma
    J = np.zeros(L, dtype=np.int64)
    if positive:
        if S >= 0:
            J[sigma[: S + 1]] = 1
        else:
            J[sigma[L - (-S - 1) :]] = -1  # empty slice when S == -1
    else:
        if S > 0:
            J[sigma[: S - 1]] = 1  # empty slice when S == 1
        else:
            J[sigma[L - (-S + 1) :]] = -1
    return J


def positive_threshold(disorder: Disorder):
    """Threshold well numbers minimizing the maximum rescaled coordinate.

    laplacian(m+) = -nint + J - delta_{k+}, with k+ the unique site making the
    result an admissible Laplacian.  Returns (m+, z+, k+) with m+ normalized
    to min 0.
    """
    L = disorder.L
    J = _case_indices(disorder, positive=True)
    base = -disorder.nint + J
    k_plus = int((np.arange(L, dtype=np.int64) * base).sum() % L)
    dm = base.copy()
    dm[k_plus] -= 1
    m_plus = invert_laplacian(dm)
    z_plus = dm + periodic_laplacian(disorder.alpha)
    return m_plus, z_plus, k_plus


def negative_threshold(disorder: Disorder):
    """Threshold well numbers maximizing the minimum rescaled coordinate.

    laplacian(m-) = -nint + J- + delta_{k-}; admissibility now pins
    k- = sum(i * (nint - J-)) mod L.  Returns (m-, z-, k-), min-normalized.
    """
    L = disorder.L
    Jm = _case_indices(disorder, positive=False)
    k_minus = int((np.arange(L, dtype=np.int64) * (disorder.nint - Jm)).sum() % L)
    dm = -disorder.nint + Jm
    dm[k_minus] += 1
    m_minus = invert_laplacian(dm)
    z_minus = dm + periodic_laplacian(disorder.alpha)
    return m_minus, z_minus, k_minus


def threshold_zmax(disorder: Disorder) -> float:
    """Maximum rescaled coordinate of the positive threshold configuration,
    by the five-case closed form (no configuration is built)."""
    omega, S, sigma, L = disorder.omega, disorder.S, disorder.sigma, disorder.L
    J = _case_indices(disorder, positive=True)
    base = -disorder.nint + J
    k_plus = int((np.arange(L, dtype=np.int64) * base).sum() % L)
    if S > 0:
        if k_plus != sigma[S]:
            return float(omega[sigma[S]] + 1.0)
        return float(omega[sigma[S - 1]] + 1.0)
    if S == 0:
        if k_plus != sigma[0]:
            return float(omega[sigma[0]] + 1.0)
        return float(omega[sigma[L - 1]])
    aS = -S
    if k_plus != sigma[L - aS]:
        return float(omega[sigma[L - aS]])
    return float(omega[sigma[L - aS - 1]])


def threshold_max_and_force(disorder: Disorder, params: ModelParams):
    """(z+_max, F_th) with F_th = lam * (1/2 - eta * z+_max)."""
    zmax = threshold_zmax(disorder)
    return zmax, params.lam * (0.5 - params.eta * zmax)


def defect_charges(m: np.ndarray, disorder: Disorder) -> np.ndarray:
    """Defect charges laplacian(m) + nint; nonzero entries are the defects."""
    return periodic_laplacian(np.asarray(m, dtype=np.int64)) + disorder.nint
