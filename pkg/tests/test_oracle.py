import numpy as np
import pytest

from cdwsim import lattice, oracle, toy_model
from cdwsim.errors import InfeasibleSizeError
from cdwsim.evolution import t2t_evolve
from conftest import make_instances


def test_brute_agrees_with_closed_form():
    # spot sizes; the acceptance suite runs this at scale
    for L in (4, 6, 8):
        for d in make_instances(70 + L, 12, L):
            bp, bm = oracle.brute_threshold(d)
            mp, _, _ = toy_model.positive_threshold(d)
            mm, _, _ = toy_model.negative_threshold(d)
            assert np.array_equal(bp, mp)
            assert np.array_equal(bm, mm)


def test_brute_bound_insensitive():
    for d in make_instances(71, 8, 6):
        a_plus, a_minus = oracle.brute_threshold(d, bound=3)
        b_plus, b_minus = oracle.brute_threshold(d, bound=5)
        assert np.array_equal(a_plus, b_plus)
        assert np.array_equal(a_minus, b_minus)


def test_brute_optimum_unique_up_to_shift():
    # laplacians quotient out the translation family: expect a unique argmin
    for d in make_instances(72, 10, 6):
        dalpha = lattice.periodic_laplacian(d.alpha)
        cands = np.concatenate(list(oracle._admissible_laplacians(6, 3)), axis=0)
        vals = (cands + dalpha).max(axis=1)
        assert (vals < vals.min() + 1e-12).sum() == 1


def test_brute_refuses_large_chains():
    d = lattice.gen_disorder(73, 16)
    with pytest.raises(InfeasibleSizeError):
        oracle.brute_threshold(d)
    with pytest.raises(ValueError):
        oracle.brute_threshold(lattice.gen_disorder(73, 6), bound=2)


def test_sandpile_stable_identity():
    s = oracle.SandpileState(np.array([1, 0, 1, 1], dtype=np.int64))
    out, topples = oracle.sandpile_stabilize(s)
    assert topples == 0
    assert np.array_equal(out.h, s.h)


def test_sandpile_all_ones_plus_grain():
    # classic pile: every site topples, T = k (n + 1 - k), one empty site at
    # the reflection of the seeded site
    rng = np.random.default_rng(74)
    for n in (3, 7, 12):
        for k in range(1, n + 1):
            h = np.ones(n, dtype=np.int64)
            h[k - 1] += 1
            out, topples = oracle.sandpile_stabilize(oracle.SandpileState(h), rng)
            assert topples == k * (n + 1 - k)
            expected = np.ones(n, dtype=np.int64)
            expected[(n + 1 - k) - 1] = 0
            assert np.array_equal(out.h, expected)


def test_sandpile_order_independent():
    rng = np.random.default_rng(75)
    for _ in range(40):
        n = int(rng.integers(4, 14))
        h = rng.integers(0, 4, n)
        a, ta = oracle.sandpile_stabilize(oracle.SandpileState(h), rng)
        b, tb = oracle.sandpile_stabilize(oracle.SandpileState(h), rng)
        c, tc = oracle.sandpile_stabilize(oracle.SandpileState(h))
        assert np.array_equal(a.h, b.h) and np.array_equal(a.h, c.h)
        assert ta == tb == tc
        assert a.stable()


def test_sandpile_recurrent_closure():
    # recurrent + one grain stabilizes to recurrent (at most one empty site)
    rng = np.random.default_rng(76)
    n = 9
    for e in range(n + 1):
        h = np.ones(n, dtype=np.int64)
        if e > 0:
            h[e - 1] = 0
        k = int(rng.integers(n))
        h[k] += 1
        out, _ = oracle.sandpile_stabilize(oracle.SandpileState(h), rng)
        assert out.stable()
        assert (out.h == 0).sum() <= 1


def test_correspondence_check():
    degenerate = 0
    for d in make_instances(77, 200, 32):
        rep = oracle.correspondence_check(d)
        assert rep["ok"]
        degenerate += int(rep["degenerate"])
        if not rep["degenerate"]:
            events, _ = t2t_evolve(d)
            assert rep["topples"] == rep["sigma0"] == events[-1].sigma_cum
    assert degenerate >= 1  # ~2/L of realizations


def test_correspondence_degenerate_zero_topples():
    found = 0
    for d in make_instances(78, 300, 8):
        rep = oracle.correspondence_check(d)
        if rep["degenerate"]:
            found += 1
            assert rep["topples"] == 0 and rep["sigma0"] == 0
    assert found >= 5


def test_sandpile_sizes_match_p0_density():
    # the stabilization sizes from correspondence runs follow the same law as
    # Sigma(0); their ECDF must sit on the closed-form p0 integral
    from cdwsim import stats

    L, n = 512, 10_000
    sizes = np.empty(n)
    for r in range(n):
        d = lattice.gen_disorder(lattice.realization_seed(79, r), L)
        rep = oracle.correspondence_check(d)
        assert rep["ok"]
        sizes[r] = rep["topples"] / L**2
    sizes.sort()
    cdf = np.array([stats.p0_cdf(float(v)) for v in sizes])
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    ks = max(np.max(np.abs(hi - cdf)), np.max(np.abs(lo - cdf)))
    assert ks < 0.02
