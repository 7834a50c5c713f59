"""Polya-Gamma sampler correctness and compiled/pure backend parity."""

import numpy as np
import pytest
from scipy.stats import ks_2samp

from spikeslab.kernels import _pure, backends

from oracles import pg_mean_series

HAVE_COMPILED = any(name == "compiled" for name, _ in backends())
compiled = dict(backends()).get("compiled")


class TestPgDistribution:
    def test_laplace_transform_identity(self):
        rng = np.random.default_rng(0)
        draws = _pure.pg_draws(np.zeros(100_000), rng)
        for phi in (0.5, 1.0, 2.0):
            emp = np.mean(np.exp(-draws * phi**2 / 2))
            assert emp == pytest.approx(1.0 / np.cosh(phi / 2), abs=0.01)

    def test_mean_matches_series_oracle(self):
        rng = np.random.default_rng(1)
        draws = _pure.pg_draws(np.zeros(100_000), rng)
        assert pg_mean_series(0.0) == pytest.approx(0.25, abs=1e-5)
        assert draws.mean() == pytest.approx(0.25, abs=0.005)

    def test_tilted_mean(self):
        rng = np.random.default_rng(2)
        for c in (1.0, 2.0, 4.0):
            draws = _pure.pg_draws(np.full(60_000, c), rng)
            assert draws.mean() == pytest.approx(np.tanh(c / 2) / (2 * c), rel=0.02)

    def test_sign_symmetry(self):
        rng = np.random.default_rng(3)
        a = _pure.pg_draws(np.full(100_000, 1.7), rng)
        b = _pure.pg_draws(np.full(100_000, -1.7), rng)
        assert ks_2samp(a, b).statistic <= 0.01

    def test_positive_and_finite_across_range(self):
        rng = np.random.default_rng(4)
        c = np.linspace(-10, 10, 1_000_000)
        impl = compiled if HAVE_COMPILED else _pure
        draws = impl.pg_draws(c, rng)
        assert np.all(draws > 0)
        assert np.all(np.isfinite(draws))


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernels not built")
class TestBackendParity:
    def test_pg_draws_bit_identical(self):
        c = np.concatenate([np.zeros(500), np.linspace(-8, 8, 1500)])
        a = compiled.pg_draws(c, np.random.default_rng(7))
        b = _pure.pg_draws(c, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_z_scan_bit_identical(self):
        rng = np.random.default_rng(8)
        p = 12
        X = rng.standard_normal((20, p))
        gram = X.T @ X
        gram = 0.5 * (gram + gram.T)
        b = X.T @ rng.standard_normal(20)
        beta = rng.standard_normal(p)
        order = np.arange(p, dtype=np.int64)
        for trial in range(20):
            z1 = rng.integers(0, 2, p).astype(np.uint8)
            z2 = z1.copy()
            s1 = gram @ (beta * z1)
            s2 = s1.copy()
            f1 = compiled.z_scan(gram, b, beta, z1, s1, -1.0, 2.0, 1.0,
                                 order, np.random.default_rng(trial))
            f2 = _pure.z_scan(gram, b, beta, z2, s2, -1.0, 2.0, 1.0,
                              order, np.random.default_rng(trial))
            assert f1 == f2
            assert np.array_equal(z1, z2)
            assert np.array_equal(s1, s2)


class TestZScanSemantics:
    def test_s_tracks_gram_product(self):
        rng = np.random.default_rng(9)
        p = 6
        X = rng.standard_normal((10, p))
        gram = X.T @ X
        gram = 0.5 * (gram + gram.T)
        b = X.T @ rng.standard_normal(10)
        beta = rng.standard_normal(p)
        z = rng.integers(0, 2, p).astype(np.uint8)
        s = gram @ (beta * z)
        _pure.z_scan(gram, b, beta, z, s, 0.0, 1.0, 1.0,
                     np.arange(p, dtype=np.int64), rng)
        assert np.allclose(s, gram @ (beta * z), atol=1e-10)
