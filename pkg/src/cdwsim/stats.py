"""Analytic curves, Monte Carlo estimators and statistical checks.

Closed forms implemented here:

  phi(u)        finite-size scaling function of the expected cumulative
                avalanche size, (6 - 4u + u^2 - 6e^-u - 2u e^-u) / u^4, with a
                series switch near zero where the closed form cancels
                catastrophically.
  p_u_density   density of the rescaled cumulative size Sigma/L^2 at reduced
                force u, supported on (0, 1/4); its u -> infinity limit after
                the a = u^2 s rescaling is 2 K0(2 sqrt(a)).
  bessel_k0     modified Bessel K0 from the ascending series (x <= 2) and an
                exponentially scaled integral representation (x > 2).
  bridge / polar covariances of the limiting strain and polarization
                processes, (1 - 6t + 6t^2)/12 and (1 - 30r^2 + 60r^3 - 30r^4)/720.

Estimators fan out over realizations seeded by realization_seed(master, index),
so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy import stats as sps

from .evolution import _t2t_paths
from .lattice import Disorder, gen_disorder, periodic_laplacian, realization_seed
from .toy_model import (
    _jump_inplace,
    defect_charges,
    positive_threshold,
    threshold_zmax,
)

__all__ = [
    "phi",
    "p_u_density",
    "p0_density",
    "p0_cdf",
    "k0_size_cdf",
    "bessel_k0",
    "bridge_covariance",
    "polar_covariance",
    "Report",
    "t2t_sigma_samples",
    "estimate_sigma_scaling",
    "flat_samples",
    "estimate_flat_scaling",
    "test_S_clt",
    "test_exchangeability",
    "test_d_uniform",
    "strain_bridge_check",
    "verify_sum_conservation",
]

_EULER_GAMMA = 0.5772156649015329


# ----------------------------------------------------------------------------
# closed-form curves


def phi(u: float) -> float:
    """Limit of E[Sigma(u/L)] / L^2 for the threshold-to-threshold evolution.

    Below u = 1e-2 the four O(1) terms of the closed form cancel to O(u^4), so
    the Taylor series is used instead.  (The u^3 coefficient is -1/630; the
    commonly quoted -1/105 does not match the closed form.)
    """
    if u < 0:
        raise ValueError(f"u must be nonnegative, got {u}")
    if u < 1e-2:
        return 1.0 / 12.0 - u / 30.0 + u * u / 120.0 - u**3 / 630.0
    e = math.exp(-u)
    return (6.0 - 4.0 * u + u * u - 6.0 * e - 2.0 * u * e) / u**4


def p0_density(s: float) -> float:
    """Density of Sigma(0)/L^2: 2 ln[(1 + w)/(1 - w)] with w = sqrt(1 - 4s),
    written as 2 ln[(1 + w)^2 / (4s)] to stay finite near s = 0."""
    if not 0.0 < s < 0.25:
        raise ValueError(f"s must lie in (0, 1/4), got {s}")
    w = math.sqrt(1.0 - 4.0 * s)
    return 2.0 * (2.0 * math.log1p(w) - math.log(4.0 * s))


def p0_cdf(s: float) -> float:
    """Integral of p0_density from 0 to s: 1 - w + s * p0(s), w = sqrt(1-4s)."""
    if s <= 0.0:
        return 0.0
    if s >= 0.25:
        return 1.0
    w = math.sqrt(1.0 - 4.0 * s)
    return 1.0 - w + s * p0_density(s)


def p_u_density(u: float, s: float) -> float:
    """Density of the rescaled cumulative avalanche size at reduced force u.

    The integrable 1/sqrt(t) endpoint singularity is removed by t = tau^2
    before adaptive quadrature.  u = 0 falls back to the logarithmic closed
    form.
    """
    if u < 0:
        raise ValueError(f"u must be nonnegative, got {u}")
    if not 0.0 < s < 0.25:
        raise ValueError(f"s must lie in (0, 1/4), got {s}")
    if u == 0.0:
        return p0_density(s)
    rs = math.sqrt(s)
    big_t = u * (1.0 - 2.0 * rs)
    c = 4.0 * u * rs

    def integrand(tau):
        w = big_t - tau * tau
        return math.exp(-tau * tau) * (4.0 + 8.0 * w + 2.0 * w * w) / math.sqrt(
            tau * tau + c
        )

    val, _ = integrate.quad(integrand, 0.0, math.sqrt(big_t), epsabs=1e-10, epsrel=1e-10, limit=200)
    return 2.0 * math.exp(-2.0 * u * rs) * val


def k0_size_cdf(a: float) -> float:
    """CDF of the u -> infinity avalanche-size limit: integral of 2 K0(2 sqrt t)
    from 0 to a, which closes to 1 - 2 sqrt(a) K1(2 sqrt(a))."""
    if a <= 0.0:
        return 0.0
    x = 2.0 * math.sqrt(a)
    return 1.0 - x * float(special.k1(x))


def bessel_k0(x: float) -> float:
    """Modified Bessel function K0.

    Ascending series for x <= 2; for larger x the exponentially scaled
    representation K0(x) = 2 e^-x * integral_0^inf e^{-t^2} / sqrt(t^2 + 2x) dt
    (the plain asymptotic expansion cannot reach 1e-10 until x is well past
    the crossover, so it is kept only as a test oracle)."""
    if x <= 0.0:
        raise ValueError(f"K0 needs a positive argument, got {x}")
    if x <= 2.0:
        q = 0.25 * x * x
        term = 1.0
        i0 = 1.0
        h = 0.0
        ksum = 0.0
        for k in range(1, 60):
            term *= q / (k * k)
            i0 += term
            h += 1.0 / k
            ksum += term * h
            if term * (h + 1.0) < 1e-18 * (ksum + 1.0):
                break
        return -(math.log(0.5 * x) + _EULER_GAMMA) * i0 + ksum
    val, _ = integrate.quad(
        lambda t: math.exp(-t * t) / math.sqrt(t * t + 2.0 * x),
        0.0,
        8.0,
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return 2.0 * math.exp(-x) * val


def _k0_asymptotic(x: float, nterms: int = 8) -> float:
    """Large-x expansion sqrt(pi/2x) e^-x sum a_k x^-k; test oracle only."""
    a = 1.0
    total = 1.0
    for k in range(1, nterms):
        a *= -((2 * k - 1) ** 2) / (8.0 * k)
        total += a / x**k
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * total


def bridge_covariance(t: float) -> float:
    """Covariance of the rescaled threshold strains at separation t in [0,1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return (1.0 - 6.0 * t + 6.0 * t * t) / 12.0


def polar_covariance(r: float) -> float:
    """Covariance of the flat-to-threshold polarization process at separation
    r in [0,1]."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    return (1.0 - 30.0 * r**2 + 60.0 * r**3 - 30.0 * r**4) / 720.0


# ----------------------------------------------------------------------------
# Monte Carlo estimators


@dataclass
class Report:
    """Outcome of one statistical check."""

    name: str
    passed: bool
    statistic: float
    threshold: float
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _sigma_at_grid(x_grid: np.ndarray, x_before0: float, x_after: np.ndarray, sigma: np.ndarray):
    """Sigma(x) for each x in x_grid from one event path (x_after descending)."""
    out = np.zeros(x_grid.shape[0], dtype=np.int64)
    if x_after.shape[0] == 0:
        return out
    cnt = np.searchsorted(x_after[::-1], x_grid, side="right")
    idx = x_after.shape[0] - cnt
    live = x_grid < x_before0
    out[live] = sigma[np.minimum(idx[live], sigma.shape[0] - 1)]
    return out


def _t2t_chunk(args):
    master_seed, L, x_grid, lo, hi = args
    rows = np.empty((hi - lo, x_grid.shape[0]), dtype=np.int64)
    for r in range(lo, hi):
        d = gen_disorder(realization_seed(master_seed, r), L)
        _, _, _, _, sigma, x_before, x_after, _, _, _ = _t2t_paths(d)
        x0 = x_before[0] if x_before.shape[0] else 0.0
        rows[r - lo] = _sigma_at_grid(x_grid, x0, x_after, sigma)
    return lo, rows


def _run_chunks(worker, common, n, workers):
    bounds = np.linspace(0, n, max(workers, 1) * 4 + 1).astype(int)
    jobs = [common + (int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if workers <= 1:
        results = [worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, jobs))
    return sorted(results, key=lambda t: t[0])


def t2t_sigma_samples(L: int, u_grid, n: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-realization Sigma(u/L) samples from the threshold-to-threshold
    record engine; shape (n, len(u_grid))."""
    u = np.asarray(u_grid, dtype=np.float64)
    x_grid = u / L
    parts = _run_chunks(_t2t_chunk, (seed, L, x_grid), n, workers)
    return np.concatenate([rows for _, rows in parts], axis=0)


def estimate_sigma_scaling(L: int, u_grid, n: int, seed: int, workers: int = 1):
    """Mean and standard error of Sigma(u/L) on the u grid.

    Returns a list of row dicts (L, u, mean_sigma, se_sigma, n); divide by L^2
    to compare with phi(u).
    """
    samples = t2t_sigma_samples(L, u_grid, n, seed, workers)
    rows = []
    for k, u in enumerate(np.asarray(u_grid, dtype=np.float64)):
        col = samples[:, k].astype(np.float64)
        rows.append(
            {
                "L": L,
                "u": float(u),
                "mean_sigma": float(col.mean()),
                "se_sigma": float(col.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                "n": n,
            }
        )
    return rows


def _flat_chunk(args):
    from ._kernels import flat_sigma_run

    master_seed, L, x_grid, lo, hi = args
    g = x_grid.shape[0]
    rows = np.empty((hi - lo, g), dtype=np.int64)
    totals = np.empty(hi - lo, dtype=np.int64)
    n_av = np.empty(hi - lo, dtype=np.int64)
    n_w = np.empty(hi - lo, dtype=np.int64)
    worst_x = 0.0
    for r in range(lo, hi):
        d = gen_disorder(realization_seed(master_seed, r), L)
        z0 = periodic_laplacian(d.alpha)
        zp = threshold_zmax(d)
        samp, tot, av, waves, x_fin = flat_sigma_run(z0, zp, x_grid)
        rows[r - lo] = samp
        totals[r - lo] = tot
        n_av[r - lo] = av
        n_w[r - lo] = waves
        worst_x = max(worst_x, abs(x_fin))
    return lo, rows, totals, n_av, n_w, worst_x


def flat_samples(L: int, u_grid, n: int, seed: int, workers: int = 1):
    """Flat-to-threshold campaign at one size.

    The abscissa is rescaled as u = X * sqrt(L).  Returns (sigma_samples
    (n, len(u_grid)), total_jumps (n,), n_avalanches (n,), n_waves (n,)).
    The final X of every run must vanish; a residual above 1e-6 means the
    evolution and the closed-form threshold maximum disagree.
    """
    u = np.asarray(u_grid, dtype=np.float64)
    x_grid = u / math.sqrt(L)
    parts = _run_chunks(_flat_chunk, (seed, L, x_grid), n, workers)
    worst = max(p[5] for p in parts)
    if worst > 1e-6:
        raise RuntimeError(f"flat evolution ended at |X| = {worst}, expected 0")
    rows = np.concatenate([p[1] for p in parts], axis=0)
    totals = np.concatenate([p[2] for p in parts])
    n_av = np.concatenate([p[3] for p in parts])
    n_w = np.concatenate([p[4] for p in parts])
    return rows, totals, n_av, n_w


def estimate_flat_scaling(L_list, u_grid, n: int, seed: int, workers: int = 1):
    """Collapse table for the flat-to-threshold polarization.

    Rows carry mean P(x) at x = u / sqrt(L) and the L^{-3/2}-rescaled mean
    (the collapse ordinate).  Also returns {L: final polarization samples}.
    """
    rows = []
    finals = {}
    for L in L_list:
        samples, totals, _, _ = flat_samples(L, u_grid, n, seed, workers)
        finals[L] = totals.astype(np.float64) / L
        p = samples.astype(np.float64) / L
        for k, u in enumerate(np.asarray(u_grid, dtype=np.float64)):
            col = p[:, k]
            rows.append(
                {
                    "L": L,
                    "u": float(u),
                    "x": float(u / math.sqrt(L)),
                    "mean_P": float(col.mean()),
                    "se_P": float(col.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                    "mean_P_rescaled": float(col.mean() / L**1.5),
                    "n": n,
                }
            )
    return rows, finals


# ----------------------------------------------------------------------------
# statistical hypothesis checks


def test_S_clt(L: int, n: int, seed: int, defect_checks: int = 200) -> Report:
    """Central limit behavior of the integer part sum S.

    Checks the sample variance of S / sqrt(L) against 1/12 (3 standard errors
    of the variance estimate), Kolmogorov distance to N(0, 1/12), and on a
    subsample that the total defect charge of the positive threshold is |S| or
    |S| + 2.
    """
    s_vals = np.empty(n)
    defects_ok = True
    for r in range(n):
        d = gen_disorder(realization_seed(seed, r), L)
        s_vals[r] = d.S
        if r < defect_checks:
            m_plus, _, _ = positive_threshold(d)
            charge = int(np.abs(defect_charges(m_plus, d)).sum())
            if charge not in (abs(d.S), abs(d.S) + 2):
                defects_ok = False
    x = s_vals / math.sqrt(L)
    v = float(x.var(ddof=1))
    mu4 = float(((x - x.mean()) ** 4).mean())
    se_v = math.sqrt(max(mu4 - v * v, 0.0) / n)
    ks = float(sps.kstest(x, sps.norm(loc=0.0, scale=math.sqrt(1.0 / 12.0)).cdf).statistic)
    integers = bool(np.all(s_vals == np.round(s_vals)))
    passed = abs(v - 1.0 / 12.0) <= 3.0 * se_v and integers and defects_ok
    return Report(
        name="S_clt",
        passed=passed,
        statistic=v,
        threshold=1.0 / 12.0,
        details={
            "se_variance": se_v,
            "ks_vs_normal": ks,
            "all_integer": integers,
            "defect_charge_ok": defects_ok,
            "L": L,
            "n": n,
        },
    )


def test_exchangeability(L: int, n: int, seed: int) -> Report:
    """Consequences of exchangeability of the threshold coordinates.

    Pair moments E[z+_i z+_{i+lag}] must not depend on the lag, single-site
    moments must not depend on the site, and the marginal of omega at a fixed
    site must be uniform on (-1/2, 1/2).  The deviation threshold is a
    Bonferroni bound over all pairwise comparisons at family significance
    0.01, so the check keeps that false-alarm rate regardless of how many
    lags are compared.
    """
    lags = sorted({1, 2, 4, L // 8, L // 4, L // 2} - {0})
    pair = np.empty((n, len(lags)))
    sites = [0, L // 3, (2 * L) // 3]
    single = np.empty((n, len(sites)))
    omega0 = np.empty(n)
    for r in range(n):
        d = gen_disorder(realization_seed(seed, r), L)
        _, z_plus, _ = positive_threshold(d)
        for k, lag in enumerate(lags):
            pair[r, k] = float(z_plus @ np.roll(z_plus, -lag)) / L
        for k, i in enumerate(sites):
            single[r, k] = z_plus[i]
        omega0[r] = d.omega[0]
    pm = pair.mean(axis=0)
    pse = pair.std(axis=0, ddof=1) / math.sqrt(n)
    sm = single.mean(axis=0)
    sse = single.std(axis=0, ddof=1) / math.sqrt(n)
    max_pair_dev = 0.0
    for a in range(len(lags)):
        for b in range(a + 1, len(lags)):
            dev = abs(pm[a] - pm[b]) / math.sqrt(pse[a] ** 2 + pse[b] ** 2)
            max_pair_dev = max(max_pair_dev, dev)
    max_site_dev = 0.0
    for a in range(len(sites)):
        for b in range(a + 1, len(sites)):
            dev = abs(sm[a] - sm[b]) / math.sqrt(sse[a] ** 2 + sse[b] ** 2)
            max_site_dev = max(max_site_dev, dev)
    ks = float(sps.kstest(omega0, sps.uniform(loc=-0.5, scale=1.0).cdf).statistic)
    ks_bound = 1.63 / math.sqrt(n)  # ~1% point of the Kolmogorov statistic
    n_cmp = len(lags) * (len(lags) - 1) // 2 + len(sites) * (len(sites) - 1) // 2
    z_bound = float(sps.norm.ppf(1.0 - 0.01 / (2 * n_cmp)))
    passed = max_pair_dev <= z_bound and max_site_dev <= z_bound and ks <= ks_bound
    return Report(
        name="exchangeability",
        passed=passed,
        statistic=max(max_pair_dev, max_site_dev),
        threshold=z_bound,
        details={
            "pair_means": pm,
            "pair_se": pse,
            "lags": lags,
            "site_means": sm,
            "ks_omega_uniform": ks,
            "ks_bound": ks_bound,
            "L": L,
            "n": n,
        },
    )


def _spacing_d(d: Disorder) -> int:
    """Spacing between the up and down corrections of the two threshold
    configurations, sum_i i * (nint_i - J'_i) mod L; uniform on {0..L-1} and
    independent of omega."""
    L, S, sigma = d.L, d.S, d.sigma
    jp = np.zeros(L, dtype=np.int64)
    if S > 0:
        jp[sigma[:S]] = 1
    elif S < 0:
        jp[sigma[L + S :]] = -1
    return int((np.arange(L, dtype=np.int64) * (d.nint - jp)).sum() % L)


def test_d_uniform(L: int, n: int, seed: int) -> Report:
    """Uniformity of the correction spacing d on {0..L-1} and its independence
    from the disorder ranks (chi-square, significance 0.01)."""
    ds = np.empty(n, dtype=np.int64)
    wmax = np.empty(n)
    for r in range(n):
        dis = gen_disorder(realization_seed(seed, r), L)
        ds[r] = _spacing_d(dis)
        wmax[r] = dis.omega.max()
    counts = np.bincount(ds, minlength=L)
    chi2, p_uniform = sps.chisquare(counts)
    qs = np.quantile(wmax, [0.25, 0.5, 0.75])
    wbin = np.digitize(wmax, qs)
    table = np.zeros((8, 4), dtype=np.int64)
    for dv, wb in zip(ds % 8, wbin):
        table[dv, wb] += 1
    chi2_ind, p_ind, _, _ = sps.chi2_contingency(table)
    passed = p_uniform > 0.01 and p_ind > 0.01
    return Report(
        name="d_uniform",
        passed=passed,
        statistic=float(p_uniform),
        threshold=0.01,
        details={
            "chi2_uniform": float(chi2),
            "p_uniform": float(p_uniform),
            "chi2_independence": float(chi2_ind),
            "p_independence": float(p_ind),
            "L": L,
            "n": n,
        },
    )


def strain_bridge_check(L: int, n: int, seed: int) -> Report:
    """Covariance of the rescaled threshold strains against the periodic
    bridge formula at separations 0, 1/4 and 1/2."""
    lags = [0, L // 4, L // 2]
    acc = np.zeros((n, len(lags)))
    for r in range(n):
        d = gen_disorder(realization_seed(seed, r), L)
        m_plus, _, _ = positive_threshold(d)
        s = np.roll(m_plus, -1) - m_plus
        if int(s.sum()) != 0:
            raise AssertionError("strains of a periodic profile must sum to 0")
        for k, lag in enumerate(lags):
            acc[r, k] = (12.0 / L) * float(s @ np.roll(s, -lag)) / L
    means = acc.mean(axis=0)
    ses = acc.std(axis=0, ddof=1) / math.sqrt(n)
    targets = [bridge_covariance(lag / L) for lag in lags]
    devs = [abs(m - t) for m, t in zip(means, targets)]
    passed = all(dv <= 3.0 * se for dv, se in zip(devs, ses))
    return Report(
        name="strain_bridge",
        passed=passed,
        statistic=float(max(dv / abs(t) for dv, t in zip(devs, targets))),
        threshold=3.0,
        details={
            "lags": lags,
            "cov_means": means,
            "cov_se": ses,
            "cov_targets": targets,
            "L": L,
            "n": n,
        },
    )


def verify_sum_conservation(jump_fn=None, L: int = 64, n_jumps: int = 20_000, seed: int = 7, tol: float = 1e-9) -> bool:
    """Drive random jumps through ``jump_fn(m, z, j)`` (in place) and check the
    two conservation laws: sum(z) fixed and every z_i - omega_i an integer.
    The default jump is the real one; a corrupted update must return False."""
    if jump_fn is None:
        jump_fn = _jump_inplace
    d = gen_disorder(seed, L)
    rng = np.random.default_rng(seed + 1)
    m = np.zeros(L, dtype=np.int64)
    z = periodic_laplacian(d.alpha).copy()
    target = z.sum()
    for j in rng.integers(0, L, n_jumps):
        jump_fn(m, z, int(j))
    if abs(z.sum() - target) > tol:
        return False
    frac = z - d.omega
    return bool(np.max(np.abs(frac - np.round(frac))) <= tol)
