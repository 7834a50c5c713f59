"""Synthetic generation, prior scaling, Lasso, and design-statistic tests."""

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikeslab import (
    Dataset,
    SyntheticSpec,
    beta_min_check,
    coherence,
    gen_synthetic,
    lasso_fit,
    restricted_eig,
    suggest_prior,
    warm_start,
)
from spikeslab.datagen import lasso_kkt_residual, support_of


class TestGenSynthetic:
    def test_null_signal_is_pure_noise(self):
        data = gen_synthetic(SyntheticSpec(n=10_000, p=5, k=0, seed=1), sigma=1.3)
        assert np.var(data.y) == pytest.approx(1.3**2, rel=0.10)
        assert data.z_star.active_count == 0

    def test_column_normalization(self):
        data = gen_synthetic(SyntheticSpec(n=50, p=8, k=2, seed=2, normalize_columns=True))
        norms = np.einsum("ij,ij->j", data.X, data.X)
        assert np.allclose(norms, 50.0, rtol=1e-12)

    def test_correlated_pair(self):
        spec = SyntheticSpec(
            n=500, p=6, k=2, design="correlated", rho=0.99, corr_pairs=[(0, 1)], seed=3
        )
        data = gen_synthetic(spec)
        corr = np.corrcoef(data.X[:, 0], data.X[:, 1])[0, 1]
        assert 0.97 <= corr <= 1.0

    def test_orthogonal_design(self):
        data = gen_synthetic(SyntheticSpec(n=20, p=8, k=1, design="orthogonal", seed=4))
        assert np.allclose(data.X.T @ data.X, 20 * np.eye(8), atol=1e-9)

    def test_signal_magnitude(self):
        spec = SyntheticSpec(n=100, p=16, k=3, signal_scale=6.0, seed=5)
        data = gen_synthetic(spec, sigma=2.0)
        expected = 6.0 * 2.0 * np.sqrt(np.log(16) / 100)
        assert np.allclose(np.abs(data.beta_star[:3]), expected)
        assert np.all(data.beta_star[3:] == 0.0)


class TestSuggestPrior:
    def test_reference_values(self):
        prior = suggest_prior(100, 100, 1.0, 1.0)
        assert prior.q == pytest.approx(1e-4 / (1 + 1e-4))
        assert prior.tau1 == pytest.approx(10.0)
        assert prior.tau0 == pytest.approx(0.1)

    def test_delta_zero_odds(self):
        prior = suggest_prior(50, 30, 1.0, 1e-9)
        assert prior.q / (1 - prior.q) == pytest.approx(1 / 30, rel=1e-6)

    def test_tau1_monotone_in_p(self):
        taus = [suggest_prior(100, p, 1.0, 1.0).tau1 for p in (10, 20, 40)]
        assert taus[0] < taus[1] < taus[2]

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(2, 10_000), p=st.integers(2, 10_000),
           delta=st.floats(0.1, 4.0), sigma=st.floats(0.01, 10.0))
    def test_always_valid(self, n, p, delta, sigma):
        prior = suggest_prior(n, p, sigma, delta)
        assert 0 < prior.q < 1
        assert 0 < prior.tau0 < prior.tau1


def lasso_lambda(n, p, sigma, factor=2.5):
    """Noise-dominating penalty for the un-halved objective."""
    return factor * 2.0 * sigma * np.sqrt(2.0 * n * np.log(p))


class TestLasso:
    def test_full_shrinkage_threshold(self):
        rng = np.random.default_rng(6)
        data = Dataset(X=rng.standard_normal((20, 5)), y=rng.standard_normal(20))
        lam = 2.0 * float(np.max(np.abs(data.xty)))
        assert np.all(lasso_fit(data, lam) == 0.0)

    def test_orthogonal_soft_threshold(self):
        rng = np.random.default_rng(7)
        n, p = 30, 5
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        X = Q * np.sqrt(n)
        y = rng.standard_normal(n) + X[:, 0]
        data = Dataset(X=X, y=y)
        lam = 8.0
        beta = lasso_fit(data, lam)
        corr = X.T @ y / n
        expected = np.sign(corr) * np.maximum(np.abs(corr) - lam / (2 * n), 0.0)
        assert np.allclose(beta, expected, atol=1e-9)

    def test_kkt_residual_small(self):
        rng = np.random.default_rng(8)
        data = Dataset(X=rng.standard_normal((40, 10)), y=rng.standard_normal(40))
        lam = 5.0
        beta = lasso_fit(data, lam)
        assert lasso_kkt_residual(data, beta, lam) <= 1e-6

    def test_support_recovery_rate(self):
        hits = 0
        for seed in range(50):
            data = gen_synthetic(
                SyntheticSpec(n=200, p=50, k=3, signal_scale=6.0, seed=1000 + seed)
            )
            lam = lasso_lambda(200, 50, 1.0)
            sup = set(support_of(lasso_fit(data, lam)).tolist())
            truth = set(data.z_star.active().tolist())
            if truth <= sup and len(sup - truth) <= 3:
                hits += 1
        assert hits >= 45


class TestWarmStart:
    def test_huge_lambda_gives_empty_base(self, small_prior):
        rng = np.random.default_rng(9)
        data = Dataset(X=rng.standard_normal((20, 4)), y=rng.standard_normal(20))
        state, S = warm_start(data, small_prior, lam=1e9, max_extra=1, pool_size=2)
        assert state.z.active_count == 0
        assert np.all(state.beta == 0.0)
        assert S.base.active_count == 0

    def test_truth_injection(self, small_prior):
        data = gen_synthetic(SyntheticSpec(n=40, p=6, k=2, signal_scale=5.0, seed=10))
        state, S = warm_start(data, small_prior, lam=1.0, use_truth=True)
        assert state.z == data.z_star

    def test_set_size_combinatorics(self, small_prior):
        data = gen_synthetic(SyntheticSpec(n=60, p=10, k=2, signal_scale=6.0, seed=11))
        lam = lasso_lambda(60, 10, 1.0)
        state, S = warm_start(data, small_prior, lam, max_extra=2, pool_size=5)
        pool_extras = 5
        from math import comb

        assert len(S) == sum(comb(pool_extras, i) for i in range(3))


class TestCoherence:
    def test_orthogonal_design_is_zero(self, small_prior):
        data = gen_synthetic(SyntheticSpec(n=16, p=6, k=1, design="orthogonal", seed=12))
        for k in (0, 1, 2):
            stat = coherence(data, small_prior, k)
            assert stat.value == pytest.approx(0.0, abs=1e-8)
            assert stat.exhaustive

    def test_duplicate_columns_lower_bound(self, small_prior):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((10, 4))
        X[:, 1] = X[:, 0]
        X *= np.sqrt(10) / np.linalg.norm(X, axis=0)
        data = Dataset(X=X, y=rng.standard_normal(10))
        stat = coherence(data, small_prior, 0)
        assert stat.value >= 10.0 - 1e-9

    def test_pool_restriction_with_full_pool_matches(self, small_prior):
        rng = np.random.default_rng(14)
        data = Dataset(X=rng.standard_normal((12, 6)), y=rng.standard_normal(12))
        full_pool = [c for size in range(3) for c in combinations(range(6), size)]
        a = coherence(data, small_prior, 2)
        b = coherence(data, small_prior, 2, support_pool=full_pool)
        assert a.value == pytest.approx(b.value, abs=1e-12)
        assert a.exhaustive and not b.exhaustive

    def test_matches_dense_whitened_oracle(self, small_prior):
        rng = np.random.default_rng(22)
        data = Dataset(X=rng.standard_normal((10, 6)), y=rng.standard_normal(10))
        k = 2
        ours = coherence(data, small_prior, k)
        c = small_prior.tau1**2 / small_prior.sigma**2
        best = -np.inf
        for size in range(k + 1):
            for sup in combinations(range(6), size):
                Xa = data.X[:, list(sup)]
                M = np.linalg.inv(np.eye(10) + c * Xa @ Xa.T)
                for j in range(6):
                    if j in sup:
                        continue
                    for i in range(6):
                        if i == j:
                            continue
                        best = max(best, abs(float(data.X[:, j] @ M @ data.X[:, i])))
        assert ours.value == pytest.approx(best, abs=1e-10)


class TestRestrictedEig:
    def test_orthogonal_design_equals_n(self, small_prior):
        data = gen_synthetic(SyntheticSpec(n=18, p=6, k=1, design="orthogonal", seed=15))
        stat = restricted_eig(data, small_prior, 2)
        assert stat.value == pytest.approx(18.0, rel=1e-9)

    def test_duplicate_column_collapses(self, small_prior):
        rng = np.random.default_rng(16)
        X = rng.standard_normal((12, 5))
        X[:, 3] = X[:, 2]
        X *= np.sqrt(12) / np.linalg.norm(X, axis=0)
        data = Dataset(X=X, y=rng.standard_normal(12))
        stat = restricted_eig(data, small_prior, 2)
        assert stat.value <= 1e-6 * 12

    def test_matches_dense_eigen_oracle(self, small_prior):
        rng = np.random.default_rng(17)
        data = Dataset(X=rng.standard_normal((9, 6)), y=rng.standard_normal(9))
        k = 2
        ours = restricted_eig(data, small_prior, k)

        c = small_prior.tau1**2 / small_prior.sigma**2
        best = np.inf
        for size in range(k + 1):
            for sup in combinations(range(6), size):
                Xa = data.X[:, list(sup)]
                M = np.linalg.inv(np.eye(9) + c * Xa @ Xa.T)
                outside = [j for j in range(6) if j not in sup]
                for vsize in range(1, k + 1):
                    for vs in combinations(outside, vsize):
                        Xv = data.X[:, list(vs)]
                        best = min(best, float(np.linalg.eigvalsh(Xv.T @ M @ Xv)[0]))
        assert ours.value == pytest.approx(best, abs=1e-10)


class TestBetaMin:
    def test_pass_with_margin(self):
        data = gen_synthetic(SyntheticSpec(n=100, p=16, k=2, signal_scale=4.0, seed=18))
        prior = suggest_prior(100, 16, 1.0, 1.0)
        report = beta_min_check(data, prior, c=1.0)
        assert report.passed
        assert report.margin == pytest.approx(4.0, rel=1e-12)

    def test_fail_on_null_signal(self):
        data = gen_synthetic(SyntheticSpec(n=100, p=16, k=0, seed=19))
        prior = suggest_prior(100, 16, 1.0, 1.0)
        assert not beta_min_check(data, prior).passed

    def test_boundary_margin_one(self):
        data = gen_synthetic(SyntheticSpec(n=100, p=16, k=2, signal_scale=2.0, seed=20))
        prior = suggest_prior(100, 16, 1.0, 1.0)
        report = beta_min_check(data, prior, c=2.0)
        assert report.margin == pytest.approx(1.0, rel=1e-12)
        assert report.passed

    def test_requires_truth(self, small_prior):
        rng = np.random.default_rng(21)
        data = Dataset(X=rng.standard_normal((10, 3)), y=rng.standard_normal(10))
        with pytest.raises(ValueError):
            beta_min_check(data, small_prior)
