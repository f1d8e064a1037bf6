"""Periodic-lattice primitives.

All site vectors are plain numpy arrays of length L indexed mod L; callers wrap
indices explicitly (``v[i % L]``).  Well coordinates live in the half-open
interval (-1/2, +1/2], which fixes the rounding convention below: the integer
nearest to x is ``ceil(x - 1/2)``, so a remainder of exactly +1/2 stays in the
well and -1/2 rolls over.  Ties have probability zero for continuous disorder
but the convention must be deterministic for hand-crafted inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisibilityError, LatticeError, SumConditionError

__all__ = [
    "ModelParams",
    "Disorder",
    "nearest_integer",
    "periodic_laplacian",
    "invert_laplacian",
    "gen_disorder",
    "realization_seed",
]


def nearest_integer(x):
    """Integer nearest to x with the upward tie rule: x - result in (-1/2, +1/2].

    Accepts scalars or arrays; arrays come back as int64.
    """
    if np.isscalar(x):
        return int(math.ceil(x - 0.5))
    return np.ceil(np.asarray(x) - 0.5).astype(np.int64)


def periodic_laplacian(v: np.ndarray) -> np.ndarray:
    """Discrete Laplacian v[i-1] - 2 v[i] + v[i+1] with periodic wrap.

    Preserves dtype, so integer fields stay integer.
    """
    v = np.asarray(v)
    if v.shape[0] < 3:
        raise LatticeError(f"periodic Laplacian needs L >= 3, got L={v.shape[0]}")
    return np.roll(v, 1) - 2 * v + np.roll(v, -1)


def invert_laplacian(ell: np.ndarray) -> np.ndarray:
    """Solve periodic_laplacian(m) == ell over the integers, normalized to min 0.

    Solvable iff (i) sum(ell) == 0 and (ii) sum(i * ell_i) == 0 mod L.  The
    construction goes through the strains g_i = m_{i+1} - m_i: their first
    differences are ell shifted, and periodicity pins the one free strain to
    sum(i * ell_i) / L, which condition (ii) makes an integer.
    """
    ell = np.asarray(ell)
    L = ell.shape[0]
    if L < 3:
        raise LatticeError(f"inversion needs L >= 3, got L={L}")
    if not np.issubdtype(ell.dtype, np.integer):
        raise TypeError("invert_laplacian expects an integer field")
    total = int(ell.sum())
    if total != 0:
        raise SumConditionError(f"components sum to {total}, not 0")
    weighted = int((np.arange(L, dtype=np.int64) * ell).sum())
    if weighted % L != 0:
        raise DivisibilityError(f"sum(i * ell_i) = {weighted} is not 0 mod L={L}")
    g = weighted // L + np.cumsum(ell, dtype=np.int64)
    m = np.empty(L, dtype=np.int64)
    m[0] = 0
    m[1:] = np.cumsum(g[:-1])
    m -= m.min()
    return m


@dataclass(frozen=True)
class ModelParams:
    """Chain length, stiffness ratio and driving force.

    eta is the decay rate of the geometric interaction kernel, a fixed
    function of the stiffness ratio; it is exposed as a derived property so it
    can never drift out of sync with ``lam``.
    """

    L: int
    lam: float
    F: float = 0.0

    def __post_init__(self):
        if self.L < 3:
            raise LatticeError(f"L must be >= 3, got {self.L}")
        if not self.lam > 0:
            raise ValueError(f"stiffness ratio must be positive, got {self.lam}")
        if self.F < 0:
            raise ValueError(f"driving force must be nonnegative, got {self.F}")

    @property
    def eta(self) -> float:
        return 2.0 / (2.0 + self.lam + math.sqrt(self.lam * (self.lam + 4.0)))


@dataclass(frozen=True, eq=False)
class Disorder:
    """Quenched phases and the quantities derived from their Laplacian.

    alpha   : i.i.d. uniform (-1/2, +1/2) phases, one per site.
    omega   : fractional part of the phase Laplacian, each in (-1/2, +1/2).
    S       : integer part summed over the chain; sum(omega) == -S.
    sigma   : permutation sorting omega ascending (ties broken by site index).
    nint    : nearest_integer(periodic_laplacian(alpha)), kept because the
              threshold constructions consume it directly.
    """

    alpha: np.ndarray
    omega: np.ndarray
    S: int
    sigma: np.ndarray
    nint: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def from_alpha(cls, alpha: np.ndarray) -> "Disorder":
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape[0] < 3:
            raise LatticeError(f"disorder needs L >= 3, got L={alpha.shape[0]}")
        dalpha = periodic_laplacian(alpha)
        nint = nearest_integer(dalpha)
        omega = dalpha - nint
        sigma = np.argsort(omega, kind="stable")
        return cls(alpha=alpha, omega=omega, S=int(nint.sum()), sigma=sigma, nint=nint)


def gen_disorder(seed: int, L: int) -> Disorder:
    """Draw one disorder realization, a deterministic function of (seed, L)."""
    if L < 3:
        raise LatticeError(f"disorder needs L >= 3, got L={L}")
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-0.5, 0.5, L)
    return Disorder.from_alpha(alpha)


def realization_seed(master_seed: int, index: int) -> int:
    """Per-realization seed derived from (master seed, realization index).

    Uses numpy's SeedSequence with the pair as entropy, so campaigns are
    reproducible independent of scheduling or worker count.
    """
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
