"""Diagnostics estimator tests: TV, W2, ESS, contraction trends."""

import numpy as np
import pytest
from spikeslab import (
    ModelIndicator,
    PosteriorTable,
    ess,
    enumerate_posterior,
    gen_synthetic,
    inclusion_probs,
    restricted_table,
    sliced_w2,
    suggest_prior,
    table_tv,
    threshold_models,
    w2_1d,
    w2_exact,
    z_tv,
    SyntheticSpec,
)
from spikeslab.diagnostics import contraction_metrics, empirical_model_freqs


def random_table(p, rng):
    raw = rng.dirichlet(np.ones(1 << p))
    entries = {ModelIndicator.from_int(p, c): float(raw[c]) for c in range(1 << p)}
    total = sum(entries.values())
    entries = {z: pr / total for z, pr in entries.items()}
    return PosteriorTable(entries, 0.0)


def sample_from_table(table, m, rng):
    models = list(table.entries)
    probs = np.array([table.entries[z] for z in models])
    probs /= probs.sum()
    idx = rng.choice(len(models), size=m, p=probs)
    return np.array([models[i].bits for i in idx], dtype=np.uint8)


class TestZTv:
    def test_samples_from_table_have_small_tv(self):
        rng = np.random.default_rng(0)
        table = random_table(4, rng)
        samples = sample_from_table(table, 1_000_000, rng)
        assert z_tv(samples, table) <= 0.01

    def test_point_mass_vs_uniform(self):
        p = 2
        entries = {ModelIndicator.from_int(p, c): 0.25 for c in range(4)}
        table = PosteriorTable(entries, 0.0)
        samples = np.tile(ModelIndicator.from_int(p, 3).bits, (1000, 1))
        assert z_tv(samples, table) == pytest.approx(0.75, abs=1e-12)

    def test_identical_distributions_zero(self):
        p = 3
        entries = {ModelIndicator.from_int(p, c): (1.0 if c == 5 else 0.0) for c in range(8)}
        table = PosteriorTable(entries, 0.0)
        samples = np.tile(ModelIndicator.from_int(p, 5).bits, (100, 1))
        assert z_tv(samples, table) == 0.0

    def test_table_tv_symmetric_and_triangle(self):
        rng = np.random.default_rng(1)
        a, b, c = (random_table(3, rng) for _ in range(3))
        assert table_tv(a, b) == pytest.approx(table_tv(b, a), abs=1e-15)
        assert table_tv(a, c) <= table_tv(a, b) + table_tv(b, c) + 1e-12
        assert 0.0 <= table_tv(a, b) <= 1.0


class TestSimpleEstimators:
    def test_inclusion_probs_all_ones(self):
        samples = np.ones((50, 4), dtype=np.uint8)
        assert np.array_equal(inclusion_probs(samples), np.ones(4))

    def test_empirical_freqs_sum_to_one(self):
        rng = np.random.default_rng(2)
        samples = rng.integers(0, 2, size=(500, 3)).astype(np.uint8)
        freqs = empirical_model_freqs(samples)
        assert sum(freqs.values()) == pytest.approx(1.0, abs=1e-9)

    def test_threshold_models(self):
        out = np.array([[0.5, -0.01], [-2.0, 0.2]])
        assert np.array_equal(
            threshold_models(out, 0.1), np.array([[1, 0], [1, 1]], dtype=np.uint8)
        )


class TestW2:
    def test_identity_and_shift(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(400)
        assert w2_1d(a, a) == 0.0
        assert w2_1d(a, a + 1.37) == pytest.approx(1.37, abs=1e-12)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(4)
        a, b, c = (rng.standard_normal(256) for _ in range(3))
        assert w2_1d(a, c) <= w2_1d(a, b) + w2_1d(b, c) + 1e-12

    def test_unequal_lengths_via_quantiles(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal(1000)
        b = rng.standard_normal(700) + 2.0
        assert w2_1d(a, b) == pytest.approx(2.0, abs=0.15)

    def test_exact_assignment_shift(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((300, 3))
        shift = np.array([1.0, -0.5, 0.2])
        assert w2_exact(a, a + shift) == pytest.approx(np.linalg.norm(shift), abs=1e-9)

    def test_exact_assignment_cap(self):
        a = np.zeros((600, 2))
        with pytest.raises(ValueError):
            w2_exact(a, a)

    def test_sliced_matches_shift(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((2000, 2))
        b = rng.standard_normal((2000, 2))
        b[:, 0] += 3.0
        est = sliced_w2(a, b, n_dirs=256, rng=rng)
        # E[(u^T shift)^2] over the sphere = ||shift||^2 / p
        assert est == pytest.approx(3.0 / np.sqrt(2), rel=0.1)


class TestEss:
    def test_iid_series(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(10_000)
        assert 0.8 * 10_000 <= ess(x) <= 1.2 * 10_000

    def test_correlated_series_shrinks(self):
        rng = np.random.default_rng(9)
        n = 20_000
        x = np.empty(n)
        x[0] = 0.0
        for i in range(1, n):
            x[i] = 0.95 * x[i - 1] + rng.standard_normal()
        # AR(1) with rho=0.95 has IACT = (1+rho)/(1-rho) = 39
        assert ess(x) < 0.1 * n

    def test_constant_series(self):
        assert ess(np.ones(100)) == 100.0


class TestContraction:
    def test_restricted_table_with_full_pool_matches_enumeration(self, small_prior):
        data = gen_synthetic(SyntheticSpec(n=30, p=6, k=2, signal_scale=5.0, seed=10))
        full = enumerate_posterior(data, small_prior)
        restricted = restricted_table(data, small_prior, pool=range(6))
        assert table_tv(full, restricted) <= 1e-12

    def test_null_signal_concentrates_on_empty_model(self):
        hits = 0
        for seed in range(10):
            data = gen_synthetic(SyntheticSpec(n=120, p=8, k=0, seed=40 + seed))
            prior = suggest_prior(120, 8, 1.0, 1.0)
            table = enumerate_posterior(data, prior)
            if table.prob(ModelIndicator.zeros(8)) > 0.5:
                hits += 1
        assert hits >= 8

    def test_larger_delta_prefers_sparser_models(self):
        data = gen_synthetic(SyntheticSpec(n=100, p=8, k=2, signal_scale=3.0, seed=11))
        mean_sizes = []
        for delta in (0.5, 1.0, 2.0):
            prior = suggest_prior(100, 8, 1.0, delta)
            table = enumerate_posterior(data, prior)
            mean_sizes.append(sum(pr * z.active_count for z, pr in table.items()))
        assert mean_sizes[0] >= mean_sizes[1] >= mean_sizes[2]

    def test_contraction_metrics_on_strong_signal(self):
        data = gen_synthetic(SyntheticSpec(n=150, p=8, k=2, signal_scale=6.0, seed=12))
        prior = suggest_prior(150, 8, 1.0, 1.0)
        table = enumerate_posterior(data, prior)
        prob_true, oversize, ball = contraction_metrics(
            data, prior, table, omega=1.0, rng=np.random.default_rng(0)
        )
        assert prob_true > 0.8
        assert oversize < 0.1
        assert 0.0 <= ball <= 1.0
        assert ball > 0.5

    def test_contraction_report_aggregation(self):
        from spikeslab.diagnostics import ContractionRow, contraction_report

        rows = []
        for seed in range(5):
            data = gen_synthetic(SyntheticSpec(n=150, p=8, k=2, signal_scale=6.0, seed=60 + seed))
            prior = suggest_prior(150, 8, 1.0, 1.0)
            table = enumerate_posterior(data, prior)
            pt, ov, ball = contraction_metrics(
                data, prior, table, omega=1.0, rng=np.random.default_rng(seed)
            )
            rows.append(ContractionRow(seed, pt, ov, ball, exhaustive=True))
        report = contraction_report(rows)
        assert report.frac_above(0.5) >= 0.8
        assert len(report.long_rows()) == 15
        assert "mean pi(z*|y)" in report.summary_text()
