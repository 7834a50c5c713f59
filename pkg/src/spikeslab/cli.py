"""Experiment command line.

Subcommands: generate, gibbs, sloc, rd-gibbs, logistic, oracle, diagnose,
design-stats, bench.  Every run is driven by a flat INI config (sections per
module) plus a single 64-bit seed; output files carry the config hash, so a
rerun with the same seed and config is byte-identical.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 guard violation.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as sio
from . import kernels
from .datagen import (
    SyntheticSpec,
    beta_min_check,
    coherence,
    gen_synthetic,
    lasso_fit,
    restricted_eig,
    suggest_prior,
    support_of,
    warm_start,
)
from .diagnostics import inclusion_probs, sl_inclusion_threshold, threshold_models, z_tv
from .gibbs import GibbsConfig, gibbs_run
from .logistic import logistic_gibbs_run
from .model import beta_conditional_params, enumerate_posterior
from .randomdesign import RdTarget, rd_gibbs_run
from .sloc import SlocConfig, WarmStartSet, sl_run
from .types import (
    ConvergenceError,
    EnumerationGuardError,
    JointState,
    ModelIndicator,
    NumericalError,
    Prior,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_GUARD = 4


def _get(cfg, section, key, default=None, cast=str):
    if not cfg.has_section(section) or key not in cfg[section]:
        if default is None:
            raise sio.ConfigError(f"missing [{section}] {key}")
        raw = default
    else:
        raw = cfg[section][key]
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _load_data(cfg, out_dir):
    path = Path(_get(cfg, "data", "path"))
    if not path.is_absolute():
        path = out_dir / path
    return sio.read_dataset(path)


def _build_prior(cfg, data, sigma) -> Prior:
    mode = _get(cfg, "prior", "mode", default="suggest")
    if mode == "suggest":
        delta = _get(cfg, "prior", "delta", default="1.0", cast=float)
        return suggest_prior(data.n, data.p, sigma, delta)
    if mode == "explicit":
        return Prior(
            q=_get(cfg, "prior", "q", cast=float),
            tau0=_get(cfg, "prior", "tau0", cast=float),
            tau1=_get(cfg, "prior", "tau1", cast=float),
            sigma=_get(cfg, "prior", "sigma", default=str(sigma), cast=float),
            delta=_get(cfg, "prior", "delta", default="1.0", cast=float),
        )
    raise sio.ConfigError(f"unknown prior mode {mode!r}")


def _initial_state(cfg, section, data, prior):
    kind = _get(cfg, section, "init", default="zero")
    if kind == "zero":
        return JointState(np.zeros(data.p), ModelIndicator.zeros(data.p))
    if kind == "truth":
        if not data.has_truth:
            raise sio.ConfigError("init=truth requires a dataset with a truth sidecar")
        beta = np.zeros(data.p)
        if data.z_star.active_count:
            params = beta_conditional_params(data.z_star, data, prior)
            beta[params.active] = params.mean
        return JointState(beta, data.z_star)
    if kind == "lasso":
        lam = _lasso_lambda(cfg, section, data, prior)
        state, _ = warm_start(data, prior, lam)
        return state
    raise sio.ConfigError(f"unknown init {kind!r}")


def _lasso_lambda(cfg, section, data, prior):
    raw = _get(cfg, section, "lasso_lambda", default="auto")
    if raw == "auto":
        return 5.0 * prior.sigma * np.sqrt(2.0 * data.n * np.log(data.p))
    return float(raw)


def _parse_pairs(raw: str):
    pairs = []
    for token in raw.split():
        a, b = token.split(":")
        pairs.append((int(a), int(b)))
    return pairs


def cmd_generate(cfg, args, out_dir):
    spec = SyntheticSpec(
        n=_get(cfg, "generate", "n", cast=int),
        p=_get(cfg, "generate", "p", cast=int),
        k=_get(cfg, "generate", "k", cast=int),
        signal_scale=_get(cfg, "generate", "signal_scale", default="4.0", cast=float),
        design=_get(cfg, "generate", "design", default="gaussian_iid"),
        rho=_get(cfg, "generate", "rho", default="0.0", cast=float),
        corr_pairs=_parse_pairs(_get(cfg, "generate", "corr_pairs", default="")),
        normalize_columns=_get(cfg, "generate", "normalize_columns", default="true", cast=bool),
        seed=args.seed if args.seed is not None else _get(cfg, "generate", "seed", default="0", cast=int),
    )
    sigma = _get(cfg, "generate", "sigma", default="1.0", cast=float)
    data = gen_synthetic(spec, sigma=sigma)
    out = out_dir / _get(cfg, "generate", "out", default="dataset.txt")
    sio.write_dataset(out, data, sigma)
    print(f"wrote {out} (n={data.n}, p={data.p}, k={spec.k})")
    return EXIT_OK


def _chain_seeds(seed, chains):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(chains)]


def _gibbs_one_chain(payload):
    (data_path, prior_tuple, conf_dict, init_kind, chain_idx, seed_entropy, out_path, hash_) = payload
    data, sigma = sio.read_dataset(data_path)
    prior = Prior(*prior_tuple)
    cfg_obj = GibbsConfig(**conf_dict)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_entropy).spawn(chain_idx + 1)[chain_idx]))
    if init_kind == "truth":
        beta = np.zeros(data.p)
        if data.z_star.active_count:
            params = beta_conditional_params(data.z_star, data, prior)
            beta[params.active] = params.mean
        init = JointState(beta, data.z_star)
    else:
        init = JointState(np.zeros(data.p), ModelIndicator.zeros(data.p))
    run = gibbs_run(data, prior, cfg_obj, init, rng=rng)
    header = {
        "config_hash": hash_,
        "chain": chain_idx,
        "seed": seed_entropy,
        "lazy_fraction": run.lazy_fraction,
        "cache_rebuilds": run.cache_rebuilds,
        "kernel_backend": kernels.BACKEND,
    }
    sio.write_samples(out_path, run.sweeps, run.z_bits, run.beta, run.log_joint, header=header)
    return str(out_path)


def cmd_gibbs(cfg, args, out_dir):
    data_path = Path(_get(cfg, "data", "path"))
    if not data_path.is_absolute():
        data_path = out_dir / data_path
    data, sigma = sio.read_dataset(data_path)
    prior = _build_prior(cfg, data, sigma)
    seed = args.seed if args.seed is not None else _get(cfg, "gibbs", "seed", default="0", cast=int)
    chains = _get(cfg, "gibbs", "chains", default="1", cast=int)
    conf = dict(
        sweeps=_get(cfg, "gibbs", "sweeps", cast=int),
        burn_in=_get(cfg, "gibbs", "burn_in", default="0", cast=int),
        thin=_get(cfg, "gibbs", "thin", default="1", cast=int),
        blocked_z=_get(cfg, "gibbs", "blocked", default="false", cast=bool),
        random_scan=_get(cfg, "gibbs", "random_scan", default="false", cast=bool),
        seed=seed,
    )
    init_kind = _get(cfg, "gibbs", "init", default="zero")
    hash_ = sio.config_hash(cfg, {"seed": seed})
    stem = _get(cfg, "gibbs", "out", default="gibbs_samples.csv")
    prior_tuple = (prior.q, prior.tau0, prior.tau1, prior.sigma, prior.delta)
    payloads = []
    for c in range(chains):
        out_path = out_dir / (stem if chains == 1 else stem.replace(".csv", f"_chain{c:02d}.csv"))
        payloads.append((str(data_path), prior_tuple, conf, init_kind, c, seed, str(out_path), hash_))
    if args.jobs > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            written = list(pool.map(_gibbs_one_chain, payloads))
    else:
        written = [_gibbs_one_chain(pl) for pl in payloads]
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_oracle(cfg, args, out_dir):
    data, sigma = _load_data(cfg, out_dir)
    prior = _build_prior(cfg, data, sigma)
    p_max = _get(cfg, "oracle", "p_max", default="16", cast=int)
    table = enumerate_posterior(data, prior, p_max=p_max)
    out = out_dir / _get(cfg, "oracle", "out", default="table.csv")
    sio.write_table(out, table, header={"config_hash": sio.config_hash(cfg)})
    total = sum(table.entries.values())
    print(f"wrote {out} ({len(table)} models, sum={total:.12f})")
    return EXIT_OK


def cmd_sloc(cfg, args, out_dir):
    data, sigma = _load_data(cfg, out_dir)
    prior = _build_prior(cfg, data, sigma)
    seed = args.seed if args.seed is not None else _get(cfg, "sloc", "seed", default="0", cast=int)
    config = SlocConfig(
        horizon=_get(cfg, "sloc", "horizon", default="64.0", cast=float),
        step=_get(cfg, "sloc", "step", default="0.01", cast=float),
        mc_paths=_get(cfg, "sloc", "mc_paths", default="1000", cast=int),
        seed=seed,
    )
    base_kind = _get(cfg, "sloc", "base", default="lasso")
    max_extra = _get(cfg, "sloc", "max_extra", default="2", cast=int)
    pool_size = _get(cfg, "sloc", "pool_size", default="8", cast=int)
    if base_kind == "truth":
        if not data.has_truth:
            raise sio.ConfigError("base=truth requires a truth sidecar")
        base = data.z_star
        pool = set(base.active().tolist())
        ranked = np.argsort(-np.abs(data.xty))
        for j in ranked:
            if len(pool) >= base.active_count + pool_size:
                break
            pool.add(int(j))
        S = WarmStartSet.build(base, pool, max_extra)
    elif base_kind == "lasso":
        _, S = warm_start(data, prior, _lasso_lambda(cfg, "sloc", data, prior),
                          max_extra=max_extra, pool_size=pool_size)
    elif base_kind == "empty":
        ranked = np.argsort(-np.abs(data.xty))[: min(data.p, pool_size)]
        S = WarmStartSet.build(ModelIndicator.zeros(data.p), [int(j) for j in ranked], max_extra)
    else:
        raise sio.ConfigError(f"unknown sloc base {base_kind!r}")
    run = sl_run(data, prior, S, config, trace=args.trace)
    out = out_dir / _get(cfg, "sloc", "out", default="sloc_outputs.csv")
    header = {
        "config_hash": sio.config_hash(cfg, {"seed": seed}),
        "n_models": len(S),
        "horizon": config.horizon,
        "step": config.step,
    }
    sio.write_matrix_csv(out, run.outputs, header=header, col_prefix="beta")
    if args.trace and run.trace:
        trace_out = Path(str(out) + ".trace")
        with trace_out.open("w") as fh:
            fh.write("t,mean_drift_norm,top_model\n")
            for t, norm, top in run.trace:
                fh.write(f"{t},{norm:.6g},{top}\n")
        print(f"wrote {trace_out}")
    print(f"wrote {out} ({config.mc_paths} paths, |S|={len(S)}, {run.wall_time:.2f}s)")
    return EXIT_OK


def cmd_rd_gibbs(cfg, args, out_dir):
    data, sigma = _load_data(cfg, out_dir)
    prior = _build_prior(cfg, data, sigma)
    seed = args.seed if args.seed is not None else _get(cfg, "rd", "seed", default="0", cast=int)
    gamma_raw = _get(cfg, "rd", "gamma", default="auto")
    target = RdTarget(
        y=data.y, prior=prior, gamma=None if gamma_raw == "auto" else float(gamma_raw)
    )
    config = GibbsConfig(
        sweeps=_get(cfg, "rd", "sweeps", cast=int),
        burn_in=_get(cfg, "rd", "burn_in", default="0", cast=int),
        thin=_get(cfg, "rd", "thin", default="1", cast=int),
        seed=seed,
    )
    p_dim = _get(cfg, "rd", "p", default=str(data.p), cast=int)
    init = JointState(np.zeros(p_dim), ModelIndicator.zeros(p_dim))
    run = rd_gibbs_run(
        target, config, init,
        em_steps=_get(cfg, "rd", "em_steps", default="100", cast=int),
        mc_samples=_get(cfg, "rd", "mc_samples", default="256", cast=int),
    )
    out = out_dir / _get(cfg, "rd", "out", default="rd_samples.csv")
    sio.write_samples(out, run.sweeps, run.z_bits, run.beta,
                      header={"config_hash": sio.config_hash(cfg, {"seed": seed})})
    print(f"wrote {out} ({run.beta.shape[0]} states, {run.wall_time:.2f}s)")
    return EXIT_OK


def cmd_logistic(cfg, args, out_dir):
    data, sigma = _load_data(cfg, out_dir)
    prior = _build_prior(cfg, data, sigma)
    seed = args.seed if args.seed is not None else _get(cfg, "logistic", "seed", default="0", cast=int)
    config = GibbsConfig(
        sweeps=_get(cfg, "logistic", "sweeps", cast=int),
        burn_in=_get(cfg, "logistic", "burn_in", default="0", cast=int),
        thin=_get(cfg, "logistic", "thin", default="1", cast=int),
        seed=seed,
    )
    keep_omega = _get(cfg, "logistic", "keep_omega", default="false", cast=bool)
    run = logistic_gibbs_run(data, prior, config, keep_omega=keep_omega)
    out = out_dir / _get(cfg, "logistic", "out", default="logistic_samples.csv")
    sio.write_samples(out, run.sweeps, run.z_bits, run.beta, omega=run.omega,
                      header={"config_hash": sio.config_hash(cfg, {"seed": seed})})
    print(f"wrote {out} ({run.beta.shape[0]} states)")
    return EXIT_OK


def cmd_diagnose(cfg, args, out_dir):
    table = sio.read_table(out_dir / _get(cfg, "diagnose", "table"))
    samples_path = out_dir / _get(cfg, "diagnose", "samples")
    mode = _get(cfg, "diagnose", "mode", default="gibbs")
    data_path = _get(cfg, "diagnose", "data", default="")
    if mode == "gibbs":
        stream = sio.read_samples(samples_path)
        zbits = stream["z_bits"]
    elif mode == "sloc":
        rows = np.loadtxt(samples_path, delimiter=",", skiprows=_count_header(samples_path))
        rows = np.atleast_2d(rows)
        thr_raw = _get(cfg, "diagnose", "threshold", default="auto")
        if thr_raw == "auto":
            if not data_path:
                raise sio.ConfigError("threshold=auto needs [diagnose] data for the instance scale")
            data, sigma = sio.read_dataset(out_dir / data_path)
            prior = _build_prior(cfg, data, sigma)
            thr = sl_inclusion_threshold(data, prior)
        else:
            thr = float(thr_raw)
        zbits = threshold_models(rows, thr)
    else:
        raise sio.ConfigError(f"unknown diagnose mode {mode!r}")
    tv = z_tv(zbits, table)
    incl = inclusion_probs(zbits)
    ref_incl = table.marginal_inclusion()
    out = out_dir / _get(cfg, "diagnose", "out", default="diagnose_report.csv")
    with out.open("w") as fh:
        fh.write(f"# config_hash={sio.config_hash(cfg)}\n")
        fh.write(f"# tv={tv:.6f}\n")
        fh.write("coordinate,inclusion_sampler,inclusion_oracle,abs_diff\n")
        for j in range(len(incl)):
            fh.write(f"{j},{incl[j]:.6f},{ref_incl[j]:.6f},{abs(incl[j]-ref_incl[j]):.6f}\n")
    print(f"TV(sampler, oracle) = {tv:.4f}")
    print(f"max inclusion gap = {np.max(np.abs(incl - ref_incl)):.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def _count_header(path):
    count = 0
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                count += 1
                continue
            try:
                float(line.split(",")[0])
                break
            except ValueError:
                count += 1
    return count


def cmd_design_stats(cfg, args, out_dir):
    data, sigma = _load_data(cfg, out_dir)
    prior = _build_prior(cfg, data, sigma)
    k = _get(cfg, "design-stats", "k", default="2", cast=int)
    pool = None
    if data.p > 12 or k > 3:
        lam = _lasso_lambda(cfg, "design-stats", data, prior)
        sup = support_of(lasso_fit(data, lam)).tolist()
        ranked = np.argsort(-np.abs(data.xty))[: max(8, 2 * k)].tolist()
        from itertools import combinations

        cols = sorted(set(sup) | set(int(j) for j in ranked))
        pool = [c for size in range(k + 1) for c in combinations(cols, size)]
    coh = coherence(data, prior, k, support_pool=pool)
    rei = restricted_eig(data, prior, k, support_pool=pool,
                         v_pool=None if pool is None else pool)
    lines = [
        f"coherence_k{k}={coh.value:.6g} exhaustive={coh.exhaustive}",
        f"restricted_eig_k{k}={rei.value:.6g} exhaustive={rei.exhaustive}",
    ]
    if data.has_truth:
        report = beta_min_check(data, prior, c=_get(cfg, "design-stats", "c", default="2.0", cast=float))
        lines.append(
            f"beta_min_pass={report.passed} margin={report.margin:.4g} threshold={report.threshold:.4g}"
        )
    out = out_dir / _get(cfg, "design-stats", "out", default="design_stats.txt")
    out.write_text(f"# config_hash={sio.config_hash(cfg)}\n" + "\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bench(cfg, args, out_dir):
    """Wall-time table: kernel backends head to head plus per-step sampler costs."""
    rows = []
    rng_data = np.random.default_rng(0)
    n, p = 40, 16
    X = rng_data.standard_normal((n, p))
    from .types import Dataset

    data = Dataset(X=X, y=rng_data.standard_normal(n))
    prior = suggest_prior(n, p, 1.0, 1.0)

    c_arr = np.linspace(-3, 3, 20_000)
    for name, impl in kernels.backends():
        t0 = time.perf_counter()
        impl.pg_draws(c_arr, np.random.default_rng(1))
        rows.append(("pg_draws_20k", name, time.perf_counter() - t0))

    gram = data.xtx.copy()
    b = data.xty.copy()
    beta = rng_data.standard_normal(p)
    order = np.arange(p, dtype=np.int64)
    for name, impl in kernels.backends():
        zb = np.zeros(p, dtype=np.uint8)
        s = gram @ (beta * zb)
        rng = np.random.default_rng(2)
        t0 = time.perf_counter()
        for _ in range(2_000):
            impl.z_scan(gram, b, beta, zb, s, -2.0, 1.0, 1.0, order, rng)
        rows.append(("z_scan_2k_sweeps", name, time.perf_counter() - t0))

    init = JointState(np.zeros(p), ModelIndicator.zeros(p))
    t0 = time.perf_counter()
    gibbs_run(data, prior, GibbsConfig(sweeps=2_000, seed=3), init)
    rows.append(("gibbs_2k_sweeps", kernels.BACKEND, time.perf_counter() - t0))

    S = WarmStartSet.build(ModelIndicator.zeros(p), range(6), 2)
    t0 = time.perf_counter()
    sl_run(data, prior, S, SlocConfig(horizon=1.0, step=0.01, mc_paths=256, seed=4))
    rows.append(("sloc_100_steps_256_paths", "numpy", time.perf_counter() - t0))

    out = out_dir / _get(cfg, "bench", "out", default="bench.csv")
    with out.open("w") as fh:
        fh.write("benchmark,backend,seconds\n")
        for name, backend, sec in rows:
            fh.write(f"{name},{backend},{sec:.6f}\n")
    width = max(len(r[0]) for r in rows)
    for name, backend, sec in rows:
        print(f"{name:<{width}}  {backend:<8}  {sec:8.4f}s")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "gibbs": cmd_gibbs,
    "sloc": cmd_sloc,
    "rd-gibbs": cmd_rd_gibbs,
    "logistic": cmd_logistic,
    "oracle": cmd_oracle,
    "diagnose": cmd_diagnose,
    "design-stats": cmd_design_stats,
    "bench": cmd_bench,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spikeslab", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", required=True, help="INI experiment config")
    parser.add_argument("--out-dir", default=".", help="directory for artifacts")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="process parallelism over chains")
    parser.add_argument("--trace", action="store_true", help="dump drift traces (sloc)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = sio.load_config(args.config)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out_dir)
    except EnumerationGuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConvergenceError, NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (sio.ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
