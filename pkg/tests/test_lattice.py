import numpy as np
import pytest
from scipy import stats as sps

from cdwsim import lattice
from cdwsim.errors import DivisibilityError, LatticeError, SumConditionError


def test_nearest_integer_examples():
    assert lattice.nearest_integer(0.75) == 1
    # remainder exactly +1/2 stays in the half-open interval
    assert lattice.nearest_integer(0.5) == 0
    assert lattice.nearest_integer(-0.5) == -1
    assert lattice.nearest_integer(3.0) == 3
    assert lattice.nearest_integer(-2.4999) == -2


def test_nearest_integer_reconstruction():
    rng = np.random.default_rng(0)
    x = rng.uniform(-50, 50, 1_000_000)
    n = lattice.nearest_integer(x)
    r = x - n
    assert n.dtype == np.int64
    assert r.min() > -0.5
    assert r.max() <= 0.5


def test_periodic_laplacian_examples():
    assert np.array_equal(
        lattice.periodic_laplacian(np.full(7, 3)), np.zeros(7, dtype=int)
    )
    out = lattice.periodic_laplacian(np.array([1, 0, 0, 0]))
    assert np.array_equal(out, [-2, 1, 0, 1])
    # L=3 wraps both neighbors
    out3 = lattice.periodic_laplacian(np.array([0, 1, 2]))
    assert np.array_equal(out3, [3, 0, -3])
    assert lattice.periodic_laplacian(np.arange(5)).dtype == np.int64


def test_periodic_laplacian_sums_to_zero():
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.integers(-10, 10, rng.integers(3, 40))
        assert lattice.periodic_laplacian(v).sum() == 0


def test_periodic_laplacian_short_chain():
    with pytest.raises(LatticeError):
        lattice.periodic_laplacian(np.array([1, 2]))


def test_invert_laplacian_examples():
    assert np.array_equal(lattice.invert_laplacian(np.zeros(5, dtype=int)), np.zeros(5, dtype=int))
    m = lattice.invert_laplacian(np.array([-2, 1, 0, 1]))
    assert np.array_equal(m, [1, 0, 0, 0])
    with pytest.raises(DivisibilityError):
        lattice.invert_laplacian(np.array([1, -1, 0, 0]))
    with pytest.raises(SumConditionError):
        lattice.invert_laplacian(np.array([1, 1, 0, 0]))


def test_invert_laplacian_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(300):
        L = int(rng.integers(3, 40))
        m = rng.integers(-20, 20, L)
        ell = lattice.periodic_laplacian(m)
        back = lattice.invert_laplacian(ell)
        assert np.array_equal(back, m - m.min())
        assert back.min() == 0


def test_gen_disorder_deterministic():
    a = lattice.gen_disorder(12345, 64)
    b = lattice.gen_disorder(12345, 64)
    assert np.array_equal(a.alpha, b.alpha)
    assert np.array_equal(a.omega, b.omega)
    assert a.S == b.S
    assert np.array_equal(a.sigma, b.sigma)
    c = lattice.gen_disorder(12346, 64)
    assert not np.array_equal(a.alpha, c.alpha)


def test_gen_disorder_invariants():
    for r in range(200):
        d = lattice.gen_disorder(lattice.realization_seed(3, r), 48)
        assert abs(d.omega.sum() + d.S) < 1e-9
        assert abs(d.S) < d.L
        assert d.omega.min() > -0.5 and d.omega.max() < 0.5
        ordered = d.omega[d.sigma]
        assert np.all(np.diff(ordered) > 0.0)
        assert np.array_equal(d.nint + 0.0, lattice.periodic_laplacian(d.alpha) - d.omega)


def test_zero_disorder():
    d = lattice.Disorder.from_alpha(np.zeros(8))
    assert np.array_equal(d.omega, np.zeros(8))
    assert d.S == 0


def test_omega_marginal_uniform():
    n = 10_000
    w0 = np.empty(n)
    for r in range(n):
        w0[r] = lattice.gen_disorder(lattice.realization_seed(17, r), 64).omega[0]
    ks = sps.kstest(w0, sps.uniform(loc=-0.5, scale=1.0).cdf).statistic
    assert ks < 0.02


def test_gen_disorder_short_chain():
    with pytest.raises(LatticeError):
        lattice.gen_disorder(0, 2)


def test_realization_seed():
    assert lattice.realization_seed(5, 0) == lattice.realization_seed(5, 0)
    seen = {lattice.realization_seed(5, i) for i in range(1000)}
    assert len(seen) == 1000


def test_model_params():
    p = lattice.ModelParams(64, 10.0)
    assert abs(p.eta - 2.0 / (2.0 + 10.0 + np.sqrt(100.0 + 40.0))) < 1e-15
    assert 0.0 < p.eta < 1.0
    assert lattice.ModelParams(64, 2.0).eta < 1.0 / 3.0
    with pytest.raises(LatticeError):
        lattice.ModelParams(2, 1.0)
    with pytest.raises(ValueError):
        lattice.ModelParams(8, -1.0)
    with pytest.raises(ValueError):
        lattice.ModelParams(8, 1.0, F=-0.5)
