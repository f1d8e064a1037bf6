"""Threshold-to-threshold and flat-to-threshold evolution.

The threshold-to-threshold engine never touches the z array.  Write
zeta = omega + J- for the negative-threshold correction J-; the negative
threshold is zeta plus one extra unit at k-, and every later configuration is
zeta plus a +1 at each end of the jumped interval and a -1 at the reflection
of k- through the interval (the "underline").  Working in coordinates centered
at k-, the state is just the pair of interval extents (j_L <= 0 <= j_R):

  * the next avalanche starts at whichever boundary carries the larger zeta,
  * it extends that side to the next lower record of zeta along that side,
  * its inner flank is always the underline at j_L + j_R,
  * cumulative jumps stay equal to -j_L * j_R.

Both boundary walks terminate at the two global minima of zeta, one on each
side; the underline then sits at k+ and the configuration is the positive
threshold.  The expected number of avalanches grows like log L, which makes
this engine the fast path for Monte Carlo campaigns.

Flat evolution (from m = 0) has no such shortcut; it is run wave by wave here
(reference implementation) or avalanche by avalanche in the compiled kernel in
``_kernels``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IterationCapError, RecordStructureError
from .lattice import Disorder
from .toy_model import ToyConfig, negative_threshold, threshold_zmax, zfa_toy

__all__ = [
    "AvalancheEvent",
    "RankState",
    "t2t_evolve",
    "observables_at",
    "flat_evolve",
    "stabilize_above",
    "EVENT_CSV_COLUMNS",
]

EVENT_CSV_COLUMNS = ("tau", "init_site", "i_L", "i_R", "size", "sigma_cum", "X_after")


@dataclass
class AvalancheEvent:
    """One complete avalanche (or, for flat evolution, one ZFA application).

    i_L and i_R are the exclusive extents of the sites that jumped, in original
    site coordinates.  size is the number of jumps; for aggregate avalanches it
    equals (i - i_L) * (i_R - i).  X_after is max(z) - z+_max once the event is
    done, X_before the same quantity just before.  j_L and j_R are the
    cumulative interval extents in k-centered coordinates (threshold-to-
    threshold evolution only; 0 for flat events).
    """

    tau: int
    init_site: int
    i_L: int
    i_R: int
    size: int
    sigma_cum: int
    X_after: float
    X_before: float = float("nan")
    j_L: int = 0
    j_R: int = 0
    L: int = 0


@dataclass
class RankState:
    """Rank-representation state of the threshold-to-threshold engine.

    zeta plus the marks (+1 overline, -1 underline, 0 plain) reconstructs the
    configuration: z = zeta + marks.  pi sorts zeta ascending; the terminals
    are the positions of the two smallest values.  j_L and j_R are the current
    interval extents centered at k_minus.
    """

    zeta: np.ndarray
    pi: np.ndarray
    marks: np.ndarray
    k_minus: int
    j_L: int = 0
    j_R: int = 0

    @property
    def terminals(self) -> tuple[int, int]:
        return int(self.pi[0]), int(self.pi[1])

    def z(self) -> np.ndarray:
        return self.zeta + self.marks

    def check(self) -> None:
        L = self.zeta.shape[0]
        spread = float(self.zeta[self.pi[-1]] - self.zeta[self.pi[0]])
        if not spread < 1.0:
            raise RecordStructureError(f"zeta spread {spread} >= 1")
        if not (-L + self.j_R < self.j_L <= 0 <= self.j_R < self.j_L + L):
            raise RecordStructureError(
                f"extents out of range: j_L={self.j_L}, j_R={self.j_R}, L={L}"
            )

    def advance(self, event: "AvalancheEvent") -> None:
        """Apply one aggregate avalanche to the marks: both extents up, the
        initiation site and the reflection of it through the extents down."""
        L = self.zeta.shape[0]
        self.marks[event.i_L] += 1
        self.marks[event.i_R] += 1
        self.marks[event.init_site] -= 1
        self.marks[(event.i_L + event.i_R - event.init_site) % L] -= 1
        self.j_L = event.j_L
        self.j_R = event.j_R
        self.check()


def rank_state(disorder: Disorder) -> RankState:
    """RankState of the negative threshold configuration (one overline at k-)."""
    from .toy_model import _case_indices

    zeta = disorder.omega + _case_indices(disorder, positive=False)
    pi = np.argsort(zeta, kind="stable")
    _, _, k_minus = negative_threshold(disorder)
    marks = np.zeros(disorder.L, dtype=np.int64)
    marks[k_minus] = 1
    return RankState(zeta=zeta, pi=pi, marks=marks, k_minus=k_minus)


def _side_records(zeta: np.ndarray, k: int, direction: int, stop_at: int):
    """Offsets (positive counts from k in ``direction``) of the lower records
    of zeta walking away from k, truncated at offset ``stop_at`` inclusive."""
    L = zeta.shape[0]
    steps = 1 + np.arange(L - 1, dtype=np.int64)
    vals = zeta[(k + direction * steps) % L]
    prev_min = np.empty(L - 1)
    prev_min[0] = zeta[k]
    np.minimum.accumulate(vals[:-1], out=prev_min[1:])
    np.minimum(prev_min[1:], zeta[k], out=prev_min[1:])
    offs = steps[vals < prev_min]
    cut = np.searchsorted(offs, stop_at)
    if cut >= offs.shape[0] or offs[cut] != stop_at:
        raise RecordStructureError("terminal is not a record on its own side")
    return offs[: cut + 1], zeta[(k + direction * offs[: cut + 1]) % L]


def _record_paths(zeta: np.ndarray, k_minus: int):
    """Run the record engine on a zeta array with the extra unit at k_minus.

    Returns (init_off, ext_a, ext_b, size, sigma, X_before, X_after, jl, jr)
    where init_off/ext_* are k-centered offsets (ext_a <= 0 <= ext_b are the
    event's own exclusive extents).  Empty arrays when k_minus is already a
    terminal (degenerate: zero avalanches).
    """
    L = zeta.shape[0]
    two = np.argpartition(zeta, 1)[:2]
    two = two[np.argsort(zeta[two], kind="stable")]
    q = (two - k_minus) % L
    empty = (
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
        np.empty(0),
        np.empty(0),
        np.empty(0, dtype=np.int64),
        np.empty(0, dtype=np.int64),
    )
    if q[0] == 0 or q[1] == 0:
        return empty
    p_R = int(q.min())
    p_L = int(q.max()) - L
    zp1 = float(zeta[two[1]])

    rec_r, val_r = _side_records(zeta, k_minus, +1, p_R)
    rec_l, val_l = _side_records(zeta, k_minus, -1, -p_L)

    n_max = rec_r.shape[0] + rec_l.shape[0]
    init_off = np.empty(n_max, dtype=np.int64)
    ext_a = np.empty(n_max, dtype=np.int64)
    ext_b = np.empty(n_max, dtype=np.int64)
    size = np.empty(n_max, dtype=np.int64)
    sigma = np.empty(n_max, dtype=np.int64)
    x_before = np.empty(n_max)
    x_after = np.empty(n_max)
    jl_arr = np.empty(n_max, dtype=np.int64)
    jr_arr = np.empty(n_max, dtype=np.int64)

    # first avalanche: expands both sides at once
    bL, vL = -int(rec_l[0]), float(val_l[0])
    bR, vR = int(rec_r[0]), float(val_r[0])
    il, ir = 1, 1  # pointers to the next unused record on each side
    tot = -bL * bR
    init_off[0] = 0
    ext_a[0] = bL
    ext_b[0] = bR
    size[0] = tot
    sigma[0] = tot
    x_before[0] = float(zeta[k_minus]) - zp1
    x_after[0] = max(vL, vR) - zp1
    jl_arr[0] = bL
    jr_arr[0] = bR
    n = 1
    while (bL, bR) != (p_L, p_R):
        u = bL + bR  # underline: inner flank of every later avalanche
        if vL > vR:
            new_b, new_v = -int(rec_l[il]), float(val_l[il])
            il += 1
            init_off[n] = bL
            ext_a[n] = new_b
            ext_b[n] = u
            size[n] = (bL - new_b) * bR
            bL, vL = new_b, new_v
        else:
            new_b, new_v = int(rec_r[ir]), float(val_r[ir])
            ir += 1
            init_off[n] = bR
            ext_a[n] = u
            ext_b[n] = new_b
            size[n] = (-bL) * (new_b - bR)
            bR, vR = new_b, new_v
        tot += size[n]
        if tot != -bL * bR:
            raise RecordStructureError(
                f"cumulative jumps {tot} != -j_L*j_R = {-bL * bR}"
            )
        sigma[n] = tot
        x_before[n] = x_after[n - 1]
        x_after[n] = max(vL, vR) - zp1
        jl_arr[n] = bL
        jr_arr[n] = bR
        n += 1
    return (
        init_off[:n],
        ext_a[:n],
        ext_b[:n],
        size[:n],
        sigma[:n],
        x_before[:n],
        x_after[:n],
        jl_arr[:n],
        jr_arr[:n],
    )


def _t2t_paths(disorder: Disorder):
    """Record-engine paths for one disorder realization; appends k_minus to
    the _record_paths tuple."""
    from .toy_model import _case_indices

    zeta = disorder.omega + _case_indices(disorder, positive=False)
    _, _, k_minus = negative_threshold(disorder)
    return _record_paths(zeta, k_minus) + (k_minus,)


def t2t_evolve(disorder: Disorder):
    """Evolve from the negative to the positive threshold by avalanches.

    Returns (events, final ToyConfig).  The event extents visit exactly the
    lower records of zeta on each side of k-; the engine raises
    RecordStructureError if the integer bookkeeping ever disagrees with the
    -j_L * j_R jump count.  Zero events when the two thresholds coincide.
    """
    (init_off, ext_a, ext_b, size, sigma, x_before, x_after, jl, jr, k_minus) = _t2t_paths(
        disorder
    )
    L = disorder.L
    m_minus, z_minus, _ = negative_threshold(disorder)
    events = []
    for t in range(init_off.shape[0]):
        events.append(
            AvalancheEvent(
                tau=t + 1,
                init_site=int((k_minus + init_off[t]) % L),
                i_L=int((k_minus + ext_a[t]) % L),
                i_R=int((k_minus + ext_b[t]) % L),
                size=int(size[t]),
                sigma_cum=int(sigma[t]),
                X_after=float(x_after[t]),
                X_before=float(x_before[t]),
                j_L=int(jl[t]),
                j_R=int(jr[t]),
                L=L,
            )
        )
    if events:
        m_final = m_minus.copy()
        pl, pr = int(jl[-1]), int(jr[-1])
        offs = np.arange(pl, pr + 1)
        ramp = (
            (offs - pl).clip(min=0)
            - offs.clip(min=0)
            - (offs - (pl + pr)).clip(min=0)
            + (offs - pr).clip(min=0)
        )
        np.add.at(m_final, (k_minus + offs) % L, ramp)
        z_final = z_minus.copy()
        z_final[(k_minus + pl) % L] += 1.0
        z_final[(k_minus + pr) % L] += 1.0
        z_final[k_minus] -= 1.0
        z_final[(k_minus + pl + pr) % L] -= 1.0
        final = ToyConfig(m_final - m_final.min(), z_final)
    else:
        final = ToyConfig(m_minus.copy(), z_minus.copy())
    return events, final


def observables_at(events: list[AvalancheEvent], x: float):
    """State of the threshold-to-threshold evolution frozen at X <= x.

    Selects the first configuration (complete avalanches only) whose X does
    not exceed x and returns (j_L, j_R, Sigma, P) with Sigma = -j_L * j_R and
    P = Sigma / L.  x at or above the initial X returns all zeros.
    """
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if not events or x >= events[0].X_before:
        return 0, 0, 0, 0.0
    for ev in events:
        if ev.X_after <= x:
            return ev.j_L, ev.j_R, ev.sigma_cum, ev.sigma_cum / ev.L
    raise RecordStructureError("final event has X_after > x >= 0; engine bug")


def flat_evolve(disorder: Disorder, cap: int = 10_000_000):
    """Evolve from flat well numbers (m = 0) to the positive threshold.

    One event per ZFA application; an application whose cascade covers all L
    sites signals the fixed family and terminates the run without being
    recorded.  Returns (events, final ToyConfig) with final m min-normalized.
    """
    L = disorder.L
    cfg = ToyConfig.from_disorder(np.zeros(L, dtype=np.int64), disorder)
    zp_max = threshold_zmax(disorder)
    events = []
    sigma = 0
    x_prev = float(cfg.z.max()) - zp_max
    for tau in range(1, cap + 1):
        init = int(np.argmax(cfg.z))
        nxt, jumped = zfa_toy(cfg)
        if jumped.shape[0] == L:
            break
        cfg = nxt
        sigma += jumped.shape[0]
        # the jumped set is one contiguous arc around init; walk to its edges
        mask = np.zeros(L, dtype=bool)
        mask[jumped] = True
        a = 0
        while mask[(init - a - 1) % L]:
            a += 1
        b = 0
        while mask[(init + b + 1) % L]:
            b += 1
        events.append(
            AvalancheEvent(
                tau=tau,
                init_site=init,
                i_L=(init - a - 1) % L,
                i_R=(init + b + 1) % L,
                size=int(jumped.shape[0]),
                sigma_cum=sigma,
                X_after=float(cfg.z.max()) - zp_max,
                X_before=x_prev,
                L=L,
            )
        )
        x_prev = events[-1].X_after
    else:
        raise IterationCapError(f"flat evolution exceeded {cap} ZFA applications")
    return events, ToyConfig(cfg.m - cfg.m.min(), cfg.z)


def stabilize_above(cfg: ToyConfig, z_threshold: float, rng: np.random.Generator):
    """Jump sites with z above ``z_threshold`` in random order until none are
    left.  The final configuration does not depend on the order; used to test
    that totality against the avalanche-ordered evolution."""
    out = cfg.copy()
    total = 0
    while True:
        above = np.nonzero(out.z > z_threshold)[0]
        if above.shape[0] == 0:
            return out, total
        j = int(above[rng.integers(above.shape[0])])
        out.m[j] += 1
        out.z[j] -= 2.0
        out.z[(j - 1) % out.L] += 1.0
        out.z[(j + 1) % out.L] += 1.0
        total += 1
