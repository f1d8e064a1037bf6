import math

import numpy as np
import pytest
from scipy import integrate, special
from scipy import stats as sps

from cdwsim import lattice, stats, toy_model

# high-precision references (mpmath, 30 digits)
K0_REFS = {
    0.1: 2.4270690247020165578,
    1.0: 0.42102443824070833334,
    2.0: 0.11389387274953343565,
    5.0: 0.0036910983340425942747,
    20.0: 5.7412378153365242927e-10,
}

EULER_GAMMA = 0.5772156649015329


def test_phi_values():
    assert abs(stats.phi(0.0) - 1.0 / 12.0) < 1e-15
    assert abs(stats.phi(1.0) - (3.0 - 8.0 / math.e)) < 1e-14
    # u^-2 tail
    for u in (1e3, 5e4):
        assert abs(stats.phi(u) * u * u - 1.0) < 5.0 / u
    # series and closed form agree at the crossover (the closed form itself
    # carries ~5e-7 relative cancellation noise there)
    lo, hi = stats.phi(0.0099999), stats.phi(0.0100001)
    assert abs(lo - hi) / hi < 2e-6
    with pytest.raises(ValueError):
        stats.phi(-1.0)


def test_p0_density_and_cdf():
    # normalization and mean by quadrature
    norm, _ = integrate.quad(stats.p0_density, 1e-14, 0.25, limit=300)
    assert abs(norm - 1.0) < 1e-6
    mean, _ = integrate.quad(lambda s: s * stats.p0_density(s), 1e-14, 0.25, limit=300)
    assert abs(mean - 1.0 / 12.0) < 1e-6
    # closed-form cdf against quadrature
    for s in (0.01, 0.07, 0.18, 0.24):
        q, _ = integrate.quad(stats.p0_density, 1e-14, s, limit=300)
        assert abs(stats.p0_cdf(s) - q) < 1e-9
    assert stats.p0_cdf(0.0) == 0.0 and stats.p0_cdf(0.3) == 1.0
    with pytest.raises(ValueError):
        stats.p0_density(0.3)


def test_p_u_density_consistency():
    for u in (0.5, 2.0, 10.0):
        norm, _ = integrate.quad(lambda s: stats.p_u_density(u, s), 1e-12, 0.25, limit=300)
        assert abs(norm - 1.0) < 1e-6
        mean, _ = integrate.quad(lambda s: s * stats.p_u_density(u, s), 1e-12, 0.25, limit=300)
        assert abs(mean - stats.phi(u)) < 1e-6
    # u = 0 falls back to the closed form
    assert abs(stats.p_u_density(0.0, 0.1) - stats.p0_density(0.1)) < 1e-14
    with pytest.raises(ValueError):
        stats.p_u_density(1.0, 0.3)
    with pytest.raises(ValueError):
        stats.p_u_density(-1.0, 0.1)


def test_p_u_approaches_k0_form():
    # O(1/u) convergence toward 2 K0(2 sqrt(a)); see the ledger for the
    # recalibrated bounds (1e-3 would need u ~ 1e3 at the mode)
    bulk = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    tail = np.array([6.0, 9.0, 12.0])

    def sup_diff(u, grid):
        return max(
            abs(stats.p_u_density(u, a / u**2) / u**2 - 2.0 * stats.bessel_k0(2.0 * math.sqrt(a)))
            for a in grid
        )

    d50 = sup_diff(50.0, bulk)
    assert d50 < sup_diff(25.0, bulk) < sup_diff(12.5, bulk)
    assert d50 < 2.5e-2
    assert sup_diff(50.0, tail) < 2e-3


def test_bessel_k0_reference_values():
    for x, ref in K0_REFS.items():
        assert abs(stats.bessel_k0(x) - ref) / ref < 1e-12


def test_bessel_k0_against_scipy_grid():
    xs = np.concatenate([np.geomspace(1e-3, 2.0, 40), np.geomspace(2.0, 80.0, 40)])
    for x in xs:
        ref = float(special.k0(x))
        assert abs(stats.bessel_k0(float(x)) - ref) / ref < 1e-10


def test_bessel_k0_small_x_log_behavior():
    for x in (1e-6, 1e-4):
        assert abs(stats.bessel_k0(x) - (-math.log(x / 2.0) - EULER_GAMMA)) < x


def test_bessel_k0_asymptotic_oracle():
    ref = K0_REFS[20.0]
    assert abs(stats._k0_asymptotic(20.0) - ref) / ref < 1e-6
    # the leading term alone is ~0.6% off at x = 20; the expansion fixes it
    lead = math.sqrt(math.pi / 40.0) * math.exp(-20.0)
    assert abs(lead - ref) / ref > 1e-3


def test_k0_density_normalization():
    val, _ = integrate.quad(
        lambda a: 2.0 * stats.bessel_k0(2.0 * math.sqrt(a)), 1e-12, 60.0, limit=300
    )
    assert abs(val - 1.0) < 1e-6
    # closed-form cdf against quadrature of the density
    for a in (0.1, 0.5, 2.0, 5.0):
        q, _ = integrate.quad(
            lambda t: 2.0 * stats.bessel_k0(2.0 * math.sqrt(t)), 1e-12, a, limit=300
        )
        assert abs(stats.k0_size_cdf(a) - q) < 1e-8


def test_bessel_k0_domain():
    with pytest.raises(ValueError):
        stats.bessel_k0(0.0)
    with pytest.raises(ValueError):
        stats.bessel_k0(-2.0)


def test_bridge_covariance():
    assert abs(stats.bridge_covariance(0.0) - 1.0 / 12.0) < 1e-15
    assert abs(stats.bridge_covariance(0.5) + 1.0 / 24.0) < 1e-15
    for t in (0.1, 0.3, 0.45):
        assert abs(stats.bridge_covariance(t) - stats.bridge_covariance(1.0 - t)) < 1e-15
    with pytest.raises(ValueError):
        stats.bridge_covariance(1.5)


def test_polar_covariance():
    assert abs(stats.polar_covariance(0.0) - 1.0 / 720.0) < 1e-18
    assert abs(stats.polar_covariance(1.0) - 1.0 / 720.0) < 1e-18
    # quadratic local behavior: c(0) - c(r) = r^2 (1-r)^2 / 24
    for r in (1e-3, 1e-2):
        gap = stats.polar_covariance(0.0) - stats.polar_covariance(r)
        assert abs(gap / r**2 - 1.0 / 24.0) < 1e-3


def test_estimate_sigma_scaling_smoke():
    rows = stats.estimate_sigma_scaling(256, [0.0, 2.0, 8.0], 2000, seed=90)
    again = stats.estimate_sigma_scaling(256, [0.0, 2.0, 8.0], 2000, seed=90)
    assert rows == again  # deterministic in (seed, params)
    r0 = rows[0]
    assert abs(r0["mean_sigma"] / 256**2 - 1.0 / 12.0) < 4 * r0["se_sigma"] / 256**2 + 2e-3
    assert rows[1]["mean_sigma"] < r0["mean_sigma"]


def test_estimate_sigma_scaling_worker_invariance():
    a = stats.t2t_sigma_samples(128, [0.0, 1.0], 400, seed=91, workers=1)
    b = stats.t2t_sigma_samples(128, [0.0, 1.0], 400, seed=91, workers=3)
    assert np.array_equal(a, b)


def test_estimate_flat_scaling_smoke():
    rows, finals = stats.estimate_flat_scaling([256], [1.0, 4.0], 500, seed=92)
    assert set(finals) == {256}
    assert len(finals[256]) == 500
    assert all(r["mean_P"] >= 0 for r in rows)
    # P(x) decreasing along the grid
    assert rows[0]["mean_P"] > rows[1]["mean_P"]
    rows2, finals2 = stats.estimate_flat_scaling([256], [1.0, 4.0], 500, seed=92)
    assert rows == rows2 and np.array_equal(finals[256], finals2[256])


def test_flat_polarization_distribution_stable_in_L():
    # L^{-3/2}-rescaled final polarization: ECDF distance between chain sizes
    # 2^10 and 2^12 stays below 0.05
    _, f1 = stats.estimate_flat_scaling([1024], [1.0], 8000, seed=86)
    _, f2 = stats.estimate_flat_scaling([4096], [1.0], 3000, seed=87)
    a = np.sort(f1[1024] / 1024**1.5)
    b = np.sort(f2[4096] / 4096**1.5)
    grid = np.concatenate([a, b])
    ca = np.searchsorted(a, grid, side="right") / a.size
    cb = np.searchsorted(b, grid, side="right") / b.size
    assert np.max(np.abs(ca - cb)) < 0.05


def test_S_clt_report():
    rep = stats.test_S_clt(1024, 4000, seed=93, defect_checks=60)
    assert rep.passed
    assert abs(rep.statistic - 1.0 / 12.0) / (1.0 / 12.0) < 0.1
    assert rep.details["ks_vs_normal"] < 0.05
    assert rep.details["all_integer"] and rep.details["defect_charge_ok"]


def test_exchangeability_report():
    rep = stats.test_exchangeability(64, 1500, seed=94)
    assert rep.passed
    assert rep.statistic <= rep.threshold
    assert 3.0 < rep.threshold < 4.0  # Bonferroni bound at family significance 1%


def test_d_uniform_report():
    rep = stats.test_d_uniform(32, 20_000, seed=95)
    assert rep.passed
    assert rep.details["p_uniform"] > 0.01
    assert rep.details["p_independence"] > 0.01


def test_d_invariant_under_constant_phase_shift():
    for r in range(30):
        d = lattice.gen_disorder(lattice.realization_seed(96, r), 32)
        shifted = lattice.Disorder.from_alpha(d.alpha + 0.2)
        assert stats._spacing_d(d) == stats._spacing_d(shifted)


def test_strain_bridge_report():
    # cov(0) carries a +O(L^-1/2) defect-density bias (7% at L=512, 0.1% at
    # L=4096); the 3-SE report contract is calibrated for large L
    rep = stats.strain_bridge_check(4096, 1500, seed=97)
    assert rep.passed
    means = rep.details["cov_means"]
    targets = rep.details["cov_targets"]
    assert abs(means[0] - targets[0]) / targets[0] < 0.1
    assert abs(means[2] - targets[2]) / abs(targets[2]) < 0.15
    # strains sum to zero exactly (checked inside, but assert the target math)
    assert abs(targets[0] - 1.0 / 12.0) < 1e-15
    assert abs(targets[2] + 1.0 / 24.0) < 1e-15


def test_threshold_force_fluctuations_recorded():
    # measurement, not assertion: record the variance of sqrt(L) * dF_th
    # against two candidate scalings.  An L-dependent candidate (12 L)^-1 is
    # inconsistent as a limit; the z+_max ~ 1/2 + S/L picture gives the
    # L-free (lam * eta)^2 / 12, and the data picks it.
    lam = 10.0
    out = {}
    for L in (512, 2048):
        params = lattice.ModelParams(L, lam)
        vals = np.array(
            [
                toy_model.threshold_max_and_force(
                    lattice.gen_disorder(lattice.realization_seed(98, 10 * L + r), L), params
                )[1]
                for r in range(2500)
            ]
        )
        scaled = math.sqrt(L) * (vals - vals.mean())
        out[L] = scaled.var(ddof=1)
        ks = sps.kstest(scaled / scaled.std(ddof=1), sps.norm().cdf).statistic
        assert ks < 0.05  # Gaussianity, observed numerically
    pred = (lam * lattice.ModelParams(512, lam).eta) ** 2 / 12.0
    for L, v in out.items():
        print(
            f"L={L}: var(sqrt(L) dF_th) = {v:.5f}; (lam*eta)^2/12 = {pred:.5f}; "
            f"alternative (12L)^-1 = {1.0 / (12 * L):.2e}"
        )
    # the stable fit: variance is L-independent and matches (lam eta)^2/12
    assert abs(out[512] - pred) / pred < 0.2
    assert abs(out[2048] - pred) / pred < 0.2


def test_sum_conservation_detects_mutants():
    assert stats.verify_sum_conservation()

    def drop_one_neighbor(m, z, j):
        L = z.shape[0]
        m[j] += 1
        z[j] -= 2.0
        z[(j + 1) % L] += 1.0

    def wrong_decrement(m, z, j):
        L = z.shape[0]
        m[j] += 1
        z[j] -= 1.5
        z[(j - 1) % L] += 1.0
        z[(j + 1) % L] += 0.5

    assert not stats.verify_sum_conservation(jump_fn=drop_one_neighbor)
    assert not stats.verify_sum_conservation(jump_fn=wrong_decrement)
