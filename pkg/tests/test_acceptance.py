"""Acceptance suite: one test per exit criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines; every tolerance is pinned here, nothing is calibrated at runtime.
"""

import time

import numpy as np
import pytest

from spikeslab import (
    Dataset,
    GibbsConfig,
    JointState,
    LowRankCache,
    ModelIndicator,
    Prior,
    RdTarget,
    SlocConfig,
    SyntheticSpec,
    WarmStartSet,
    beta_conditional_params,
    enumerate_posterior,
    gen_synthetic,
    gibbs_run,
    inclusion_probs,
    martingale_check,
    model_marginal_log,
    model_ratio_log,
    pg_sample,
    sample_active_gaussian,
    sb_em_sample,
    sl_drift,
    sl_run,
    suggest_prior,
    threshold_models,
    w2_1d,
    z_tv,
)
from spikeslab.datagen import lasso_fit, support_of
from spikeslab.diagnostics import gaussian_w2, restricted_table, sl_inclusion_threshold
from spikeslab.randomdesign import rd_log_f
from spikeslab.sloc import LocalizationState

from conftest import random_dataset
from oracles import grid_quantiles, tilted_mixture_mean


def report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def oracle_instance():
    """p=8, n=20, k=2 instance under the standard prior scaling."""
    data = gen_synthetic(SyntheticSpec(n=20, p=8, k=2, signal_scale=6.0, seed=1))
    prior = suggest_prior(20, 8, 1.0, 1.0)
    table = enumerate_posterior(data, prior)
    return data, prior, table


@pytest.fixture(scope="module")
def slab_only_instance():
    """q ~ 1 collapses the mixture: the posterior is an explicit Gaussian."""
    rng = np.random.default_rng(3)
    n, p = 6, 4
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n) + X[:, 0]
    data = Dataset(X=X, y=y)
    prior = Prior(q=1 - 1e-12, tau0=1e-3, tau1=1.5, sigma=1.0)
    S = WarmStartSet([ModelIndicator.ones(p)], ModelIndicator.ones(p), 0)
    P = data.xtx / prior.sigma**2 + np.eye(p) / prior.tau1**2
    cov = np.linalg.inv(P)
    mean = cov @ (data.xty / prior.sigma**2)
    return data, prior, S, mean, cov


def truth_init(data, prior):
    beta = np.zeros(data.p)
    if data.z_star.active_count:
        params = beta_conditional_params(data.z_star, data, prior)
        beta[params.active] = params.mean
    return JointState(beta, data.z_star)


def test_a01_gibbs_oracle_tv(oracle_instance):
    data, prior, table = oracle_instance
    config = GibbsConfig(sweeps=200_000, burn_in=20_000, seed=7)
    run = gibbs_run(data, prior, config, truth_init(data, prior))
    tv = z_tv(run.z_bits, table)
    ok = tv <= 0.05 and run.wall_time <= 120.0
    report("A1 gibbs-oracle-tv", ok, f"TV={tv:.4f} (<=0.05), {run.wall_time:.0f}s (<=120s)")


def test_a02_sloc_oracle_tv(oracle_instance):
    data, prior, table = oracle_instance
    S = WarmStartSet.build(data.z_star, range(data.p), 2)
    config = SlocConfig(horizon=64.0, step=0.01, mc_paths=5000, seed=2)
    run = sl_run(data, prior, S, config)
    thr = sl_inclusion_threshold(data, prior)
    zb = threshold_models(run.outputs, thr)
    gap = float(np.max(np.abs(inclusion_probs(zb) - table.marginal_inclusion())))
    tv = z_tv(zb, table)
    ok = gap <= 0.05 and tv <= 0.08 and run.wall_time <= 300.0
    report(
        "A2 sloc-oracle-tv", ok,
        f"incl gap={gap:.4f} (<=0.05), TV={tv:.4f} (<=0.08), {run.wall_time:.0f}s (<=300s)",
    )


def test_a03_exact_drift_equivalence():
    rng = np.random.default_rng(5)
    prior = Prior(q=0.3, tau0=0.3, tau1=2.5, sigma=1.0)
    data = random_dataset(4, 2, rng, k=1, signal=1.2)
    S = WarmStartSet.full(2)
    worst = 0.0
    for _ in range(50):
        theta = rng.standard_normal(2) * 1.5
        t = float(rng.uniform(0.0, 3.0))
        ours = sl_drift(LocalizationState(theta, t), S, data, prior)
        oracle = tilted_mixture_mean(data.X, data.y, prior, theta, t)
        worst = max(worst, float(np.max(np.abs(ours - oracle))))
    ok = worst <= 1e-6
    report("A3 exact-drift-equivalence", ok, f"max |drift - quadrature| = {worst:.2e} (<=1e-6)")


def test_a04_fast_gaussian_sampler():
    rng = np.random.default_rng(8)
    worst_mean, worst_cov = 0.0, 0.0
    for trial in range(5):
        data = random_dataset(5, 3, rng, k=1, signal=1.0)
        prior = Prior(q=0.4, tau0=0.25, tau1=1.5, sigma=1.0)
        z = ModelIndicator.from_support(3, [0, 2])
        cache = LowRankCache(data, prior, z)
        sub = np.random.default_rng(100 + trial)
        draws = np.array(
            [sample_active_gaussian(z, data, prior, cache, sub) for _ in range(200_000)]
        )
        Xa = data.X[:, [0, 2]]
        Sigma = Xa.T @ Xa + (prior.sigma**2 / prior.tau1**2) * np.eye(2)
        target_cov = prior.sigma**2 * np.linalg.inv(Sigma)
        target_mean = np.linalg.solve(Sigma, Xa.T @ data.y)
        se = np.sqrt(np.diag(target_cov) / draws.shape[0])
        worst_mean = max(worst_mean, float(np.max(np.abs(draws.mean(axis=0) - target_mean) / se)))
        rel = np.linalg.norm(np.cov(draws.T) - target_cov, 2) / np.linalg.norm(target_cov, 2)
        worst_cov = max(worst_cov, float(rel))
    ok = worst_mean <= 4.0 and worst_cov <= 0.05
    report(
        "A4 fast-gaussian-sampler", ok,
        f"max |mean err|/SE = {worst_mean:.2f} (<=4), max cov rel err = {worst_cov:.4f} (<=0.05)",
    )


def test_a05_w2_decay(slab_only_instance):
    data, prior, S, mean, cov = slab_only_instance
    p = data.p
    vals = []
    for T in (4.0, 16.0, 64.0):
        run = sl_run(data, prior, S, SlocConfig(horizon=T, step=0.01, mc_paths=4000, seed=11))
        w2 = gaussian_w2(run.outputs.mean(axis=0), np.cov(run.outputs.T), mean, cov) / np.sqrt(p)
        vals.append(w2)
    bound = 2.0 / np.sqrt(64.0) * 1.5
    ok = vals[0] > vals[1] > vals[2] and vals[2] <= bound
    report(
        "A5 w2-decay", ok,
        f"W2/sqrt(p) = {vals[0]:.4f} > {vals[1]:.4f} > {vals[2]:.4f}, final <= {bound:.3f}",
    )


def test_a06_martingale(slab_only_instance):
    data, prior, S, _, _ = slab_only_instance
    config = SlocConfig(horizon=64.0, step=0.01, mc_paths=5000, seed=13)
    rep = martingale_check(data, prior, S, config)
    worst = float(np.max(rep.max_dev_over_se))
    ok = worst <= 4.0
    report("A6 martingale", ok, f"max |mean drift - a(0,0)| / SE = {worst:.2f} (<=4)")


def test_a07_posterior_contraction_at_scale():
    hits, probs = 0, []
    for seed in range(50):
        data = gen_synthetic(SyntheticSpec(n=200, p=64, k=3, signal_scale=6.0, seed=2000 + seed))
        prior = suggest_prior(200, 64, 1.0, 1.0)
        lam = 5.0 * np.sqrt(2.0 * 200 * np.log(64))
        sup = support_of(lasso_fit(data, lam)).tolist()
        ranked = np.argsort(-np.abs(data.xty))[:8].tolist()
        pool = sorted(set(sup) | set(int(j) for j in ranked))[:12]
        table = restricted_table(data, prior, pool)
        prob = table.prob(data.z_star)
        probs.append(prob)
        hits += prob >= 0.9
    ok = hits >= 45
    report(
        "A7 posterior-contraction", ok,
        f"pi(z*|y) >= 0.9 in {hits}/50 seeds (need >=45); min={min(probs):.4f}",
    )


def test_a08_ill_design_separation():
    rng = np.random.default_rng(0)
    n, p, rho, amp = 20, 8, 0.99, 11.0
    X = rng.standard_normal((n, p))
    X[:, 1] = rho * X[:, 0] + np.sqrt(1 - rho**2) * X[:, 1]
    X *= np.sqrt(n) / np.linalg.norm(X, axis=0)
    beta_star = np.zeros(p)
    beta_star[0], beta_star[1] = amp, -amp  # signal along the pair difference
    y = X @ beta_star + rng.standard_normal(n)
    data = Dataset(X=X, y=y, beta_star=beta_star,
                   z_star=ModelIndicator.from_support(p, [0, 1]))
    prior = suggest_prior(n, p, 1.0, 1.0)
    table = enumerate_posterior(data, prior)

    run = gibbs_run(data, prior, GibbsConfig(sweeps=200_000, burn_in=20_000, seed=7),
                    truth_init(data, prior))
    tv_gibbs = z_tv(run.z_bits, table)
    zz = run.z_bits[:, :2]
    joint_flips = float(
        np.mean((zz[1:, 0] != zz[:-1, 0]) & (zz[1:, 1] != zz[:-1, 1]))
    )

    S = WarmStartSet.build(ModelIndicator.zeros(p), range(p), 2)
    sl = sl_run(data, prior, S, SlocConfig(horizon=64.0, step=0.04, mc_paths=2000, seed=9))
    zb = threshold_models(sl.outputs, sl_inclusion_threshold(data, prior))
    tv_sl = z_tv(zb, table)

    ok = tv_sl <= tv_gibbs and joint_flips < 0.01 and sl.wall_time <= run.wall_time
    report(
        "A8 ill-design-separation", ok,
        f"SL TV={tv_sl:.3f} <= Gibbs TV={tv_gibbs:.3f}; joint-flip rate={joint_flips:.2e} "
        f"(<0.01); SL {sl.wall_time:.0f}s <= Gibbs {run.wall_time:.0f}s",
    )


def test_a09_bridge_inner_sampler():
    rng = np.random.default_rng(11)
    prior = Prior(q=0.2, tau0=0.5, tau1=2.0, sigma=1.0)
    target = RdTarget(y=np.zeros(3), prior=prior)  # gamma = 4 tau0^2 = 1
    z = ModelIndicator.zeros(1)
    draws = sb_em_sample(z, target, steps=100, mc_samples=256, rng=rng, n_samples=10_000)

    def log_target(xs):
        return rd_log_f(xs[:, None], z, target) - xs**2 / (2 * target.gamma)

    oracle = grid_quantiles(log_target, -6, 6, 10_000)
    w2 = w2_1d(draws[:, 0], oracle)

    off = sb_em_sample(z, target, steps=10, mc_samples=4, rng=np.random.default_rng(12),
                       n_samples=100_000, drift_off=True)
    var_rel = float(np.max(np.abs(off.var(axis=0) - target.gamma) / target.gamma))
    ok = w2 <= 0.05 and var_rel <= 0.05
    report(
        "A9 bridge-inner-sampler", ok,
        f"W2 to quadrature = {w2:.4f} (<=0.05); drift-off var rel err = {var_rel:.4f} (<=0.05)",
    )


def test_a10_polya_gamma_laplace_transform():
    rng = np.random.default_rng(14)
    draws = np.array([pg_sample(0.0, rng) for _ in range(100_000)])
    worst = 0.0
    for phi in (0.5, 1.0, 2.0):
        emp = float(np.mean(np.exp(-draws * phi**2 / 2)))
        worst = max(worst, abs(emp - 1.0 / np.cosh(phi / 2)))
    ok = worst <= 0.01
    report("A10 polya-gamma-identity", ok, f"max |E exp - 1/cosh| = {worst:.5f} (<=0.01)")


def test_a11_invariant_suites():
    failures = []
    base_rng = np.random.default_rng(99)

    # 50 x normalization of the enumeration oracle
    for i in range(50):
        rng = np.random.default_rng(10_000 + i)
        prior = Prior(q=float(rng.uniform(0.05, 0.6)), tau0=0.2, tau1=2.0, sigma=1.0)
        data = random_dataset(6, 6, rng, k=int(rng.integers(0, 3)), signal=1.5)
        total = sum(enumerate_posterior(data, prior).entries.values())
        if abs(total - 1.0) > 1e-10:
            failures.append(f"normalization i={i}: {total}")

    # 50 x ratio identity on random nested pairs
    for i in range(50):
        rng = np.random.default_rng(20_000 + i)
        prior = Prior(q=0.3, tau0=0.25, tau1=1.8, sigma=0.9)
        data = random_dataset(5, 5, rng)
        bits = rng.integers(0, 2, 5).astype(np.uint8)
        z1 = ModelIndicator(bits)
        z2 = ModelIndicator(bits | rng.integers(0, 2, 5).astype(np.uint8))
        ratio = model_ratio_log(z1, z2, data, prior)
        diff = model_marginal_log(z2, data, prior) - model_marginal_log(z1, data, prior)
        if abs(ratio - diff) > 1e-10:
            failures.append(f"ratio i={i}: {abs(ratio - diff):.2e}")

    # 50 x cache coherence after random flip sequences
    for i in range(50):
        rng = np.random.default_rng(30_000 + i)
        prior = Prior(q=0.3, tau0=0.3, tau1=2.0, sigma=1.0)
        data = random_dataset(6, 5, rng)
        state = ModelIndicator.zeros(5)
        cache = LowRankCache(data, prior, state)
        for _ in range(30):
            state = state.with_flipped(int(rng.integers(5)))
            cache.update(state)
        gap = cache.coherence_gap(base_rng)
        if gap > 1e-6:
            failures.append(f"cache i={i}: gap={gap:.2e}")

    # 50 x convex-combination drift bounds
    for i in range(50):
        rng = np.random.default_rng(40_000 + i)
        prior = Prior(q=0.3, tau0=0.3, tau1=2.0, sigma=1.0)
        data = random_dataset(5, 3, rng, k=1)
        S = WarmStartSet.full(3)
        state = LocalizationState(rng.standard_normal(3) * 2, float(rng.uniform(0, 8)))
        from spikeslab import tilted_component

        vs = np.array([tilted_component(z, state, data, prior)[0] for z in S])
        drift = sl_drift(state, S, data, prior)
        if np.any(drift < vs.min(axis=0) - 1e-9) or np.any(drift > vs.max(axis=0) + 1e-9):
            failures.append(f"drift-bounds i={i}")

    ok = not failures
    report(
        "A11 invariant-suites", ok,
        f"200 randomized instances, {len(failures)} failures"
        + (f" ({failures[:3]})" if failures else ""),
    )
