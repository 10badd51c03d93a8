"""Acceptance suite: one pass/fail line per criterion, printed at the end of the run."""
import math
import time

import numpy as np
import pytest
from scipy import stats

from evoset import csrw, embedding, evolving_set as es, exact_chain, harness, isoperimetry as iso, percolation
from evoset.dyn_graph import DynEnv
from evoset.graphs import e2, e3, zd_box

from conftest import LAW_AUDIT

N_FUZZ = 500
TOL = 1e-12


@pytest.fixture(scope="module")
def fuzzed():
    rng = harness.replica_rng(1234, 0)
    return [harness.random_env_fuzzer(8, int(rng.integers(1, 5)), rng, exact=True) for _ in range(N_FUZZ)]


def _summarise(records):
    fails = [r for r in records if not r.passed]
    return fails, max((abs(r.value) for r in records), default=0.0)


def test_c01_duality_identity(fuzzed, acceptance):
    t0 = time.perf_counter()
    records = []
    for env in [e2(exact=True), e3(exact=True), e2(), e3(), e2(scale_at_1=2, exact=True)]:
        records += harness.identity_records(env, coupling=False, embedding_check=False)
    for env in fuzzed:
        records += harness.identity_records(env, coupling=False, embedding_check=False)
    elapsed = time.perf_counter() - t0
    duality = [r for r in records if r.anchor == "duality-identity"]
    fails, worst = _summarise(duality)
    ok = not fails and elapsed < 120
    acceptance(1, "duality identity", ok,
               f"{len(duality)} envs, worst error {worst:.3g} (exact envs must be 0), {elapsed:.1f}s")
    assert not fails
    assert elapsed < 120


def test_c03_drift_inequalities(fuzzed, acceptance):
    records = []
    for env in [e2(exact=True), e3(exact=True)] + fuzzed:
        records += harness.drift_records(env, harness.DEFAULT_ALPHAS)
    fails, _ = _summarise(records)
    n_states = sum(len(harness.reachable_states(env)) for env in fuzzed[:20])
    acceptance(3, "drift inequalities", not fails,
               f"{len(records)} (env, alpha) checks, {len(fails)} failures; ~{n_states} states in first 20 envs")
    assert not fails


def test_c04_coupling(acceptance):
    rng = harness.replica_rng(4, 0)
    envs = [e2(exact=True), e3(exact=True)]
    envs += [harness.random_env_fuzzer(6, int(rng.integers(1, 4)), rng, exact=True) for _ in range(60)]
    records = []
    for env in envs:
        records += harness.coupling_records(env, TOL, t_max=3)
    fails, worst = _summarise(records)
    acceptance(4, "walk/evolving-set coupling", not fails,
               f"{len(envs)} envs (<= 6 vertices, t <= 3), worst error {worst:.3g}")
    assert not fails


def test_c05_complement_duality(acceptance):
    rng = harness.replica_rng(5, 0)
    records = []
    for _ in range(100):
        env = harness.random_env_fuzzer(8, 2, rng, exact=True, constant_pi=True)
        records += harness.complement_records(env, rng, n_sets=5)
    fails, worst = _summarise(records)
    acceptance(5, "complement duality", not fails, f"100 constant-pi envs x 5 sets, worst error {worst:.3g}")
    assert not fails


def test_c06_embedding(fuzzed, acceptance):
    rng = np.random.default_rng(6)
    # (a) s = 0 on every reachable state of every fuzzed env
    s0 = []
    for env in fuzzed:
        f = env.as_float()
        for t, members in harness.reachable_states(env):
            s0.append(abs(embedding.m_interpolate(f, members, t, 0.0, 0.0) - float(es.set_mass(env, t, members))))
    s0_ok = max(s0) <= TOL
    # (b) intra-step martingale: bridge law marginal N(0, s) through the endpoint
    z_worst = 0.0
    for env in fuzzed[:10]:
        f = env.as_float()
        t, members = harness.reachable_states(env)[0]
        for s in (0.25, 0.5, 0.9):
            ends = rng.standard_normal(100_000)
            b = embedding.sample_bridge(ends, s, rng)
            vals = embedding.m_interpolate(f, members, t, s, b)
            target = float(es.set_mass(env, t, members))
            se = vals.std(ddof=1) / math.sqrt(len(vals))
            z = 0.0 if se == 0 else (vals.mean() - target) / se
            z_worst = max(z_worst, abs(z))
    mart_ok = z_worst <= 4
    # (c) endpoint limit with the bridge pinned at its mean, non-tie thresholds only
    limit_ok, checked = True, 0
    for env in fuzzed[:40]:
        f = env.as_float()
        for t, members in harness.reachable_states(env)[:5]:
            z = rng.standard_normal()
            ys, h = embedding.thresholds(f, members, t)
            if np.min(np.abs(h - z)) < 0.05:
                continue
            law = es.successor_law(f, es.SetState.of(f, t, members))
            nxt = float(es.set_mass(f, t + 1, es.sample_step(law, float(embedding.drive_uniforms(z)))))
            bounds = []
            for s in (0.9, 0.99, 0.999):
                m = embedding.m_interpolate(f, members, t, s, s * z)
                bound, _ = embedding.endpoint_error_bound(f, members, t, z, s)
                bounds.append(bound)
                limit_ok &= abs(m - nxt) <= bound + 1e-12
            limit_ok &= bounds[0] >= bounds[1] >= bounds[2]
            checked += 1
    ok = s0_ok and mart_ok and limit_ok and checked > 0
    acceptance(6, "continuous embedding", ok,
               f"s=0 worst {max(s0):.3g}; intra-step max |z| {z_worst:.2f}; endpoint limit on {checked} states")
    assert s0_ok and mart_ok and limit_ok and checked > 0


def test_c07_heat_kernel_decay(acceptance):
    t0 = time.perf_counter()
    env = zd_box(3, 10, horizon=200, boundary="wired", elliptic=(0.5, 2.0), rng=np.random.default_rng(7))
    rows = exact_chain.decay_envelope(env, 0, iso.IsoConfig(d=3, mode="lattice-analytic"), 200)
    records = harness.decay_records(rows)
    elapsed = time.perf_counter() - t0
    vals = [r[3] for r in rows if r[0] >= 1]
    ok = all(r.passed for r in records) and elapsed < 600
    acceptance(7, "heat-kernel decay envelope", ok,
               f"max over t in [1,100] {max(vals[:100]):.4g}, over [101,200] {max(vals[100:]):.4g}, {elapsed:.1f}s")
    assert ok


def _real_time_env(horizon):
    edges = [
        ("a", "b", 1.0, [(2.5, 2.0)]),
        ("b", "c", 1.0, [(17.25, 3.0)]),
        ("a", "a", 1.0),
        ("c", "a", 0.5),
    ]
    return DynEnv.from_edges(["a", "b", "c"], edges, horizon)


def test_c08_csrw_thinning(acceptance):
    env = _real_time_env(50.0)
    paths = [csrw.simulate_csrw(env, "a", 50.0, harness.replica_rng(8, r)) for r in range(10_000)]
    counts = np.array([len(p.jump_times) for p in paths])
    band = harness.poisson_band_records(counts, 2.0, 50.0)
    gaps = csrw.interjump_gaps(paths)
    ks = stats.kstest(gaps, "expon")
    ok = all(r.passed for r in band) and ks.pvalue >= 0.01
    acceptance(8, "CSRW thinning", ok,
               f"N_50 mean {counts.mean():.2f} var {counts.var(ddof=1):.2f} "
               f"(z {band[0].value:.2f}, {band[1].value:.2f}); KS p={ks.pvalue:.3f}")
    assert ok


def test_c09_percolation_transience(acceptance):
    t_max, n_walks = 100_000, 1000
    cfg = percolation.PercConfig(d=3, L=60, p=0.4, seed=9)
    cluster = percolation.generate_cluster(cfg)
    env = percolation.growing_env(cluster, cfg, horizon=t_max)
    main = percolation.transience_experiment(env, n_walks, t_max, harness.replica_rng(9, 0))
    ctrl_cfg = percolation.PercConfig(d=1, L=2000, p=1.0, seed=9)
    ctrl_env = percolation.growing_env(percolation.generate_cluster(ctrl_cfg), ctrl_cfg, horizon=t_max)
    ctrl = percolation.transience_experiment(ctrl_env, n_walks, t_max, harness.replica_rng(9, 1))
    ok = 5 * main.late_return_fraction <= ctrl.late_return_fraction
    acceptance(9, "percolation transience trend", ok,
               f"late-return d=3 {main.late_return_fraction:.3f} vs d=1 control {ctrl.late_return_fraction:.3f}; "
               f"kill fraction d=3 {main.kill_fraction:.3f}, control {ctrl.kill_fraction:.3f}")
    assert ok


def _iso_suite_graphs(rng):
    graphs = [e2(), e3(), zd_box(2, 4), zd_box(3, 2, boundary="wired"), zd_box(2, 3, boundary="wired")]
    graphs += [harness.random_env_fuzzer(8, 1, rng, exact=False) for _ in range(20)]
    for n in (10, 12, 14, 16):
        u, v = np.triu_indices(n, 1)
        keep = rng.random(len(u)) < 0.35
        chain = np.arange(n - 1)
        eu = np.concatenate([u[keep], chain, np.arange(n)])
        ev = np.concatenate([v[keep], chain + 1, np.arange(n)])
        pairs = {}
        for a, b in zip(eu, ev):
            pairs[(int(a), int(b))] = float(rng.uniform(0.2, 3.0))
        graphs.append(DynEnv(n, [p[0] for p in pairs], [p[1] for p in pairs], list(pairs.values()), 0))
    return graphs


def test_c10_isoperimetry_oracles(acceptance):
    rng = np.random.default_rng(10)
    worst_gap, worst_singleton, count = 0.0, math.inf, 0
    for env in _iso_suite_graphs(rng):
        for t in range(int(env.horizon) + 1):
            w, pi, _ = iso._restricted(env, t)
            for d in (1.5, 2.0, 3.0):
                for half in (False, True):
                    k1, _ = iso.kappa_gray(w, pi, d, half)
                    k2 = iso.kappa_bruteforce(w, pi, d, half)
                    worst_gap = max(worst_gap, abs(k1 - k2) / max(1.0, abs(k2)))
                    count += 1
                k_exact = iso.kappa(env, t, iso.IsoConfig(d=d, mode="exact"))
                worst_singleton = min(worst_singleton, iso.singleton_bound(env, t, d) - k_exact)
    ok = worst_gap <= 1e-12 and worst_singleton >= -1e-12
    acceptance(10, "isoperimetry oracles", ok,
               f"{count} enumerator pairs, worst relative gap {worst_gap:.3g}; "
               f"min singleton slack {worst_singleton:.3g}")
    assert ok


def test_c02_martingale_every_law(fuzzed, acceptance):
    # runs last in this module: every successor law built so far in the session was audited
    for env in [e2(exact=True), e3(exact=True), e2(), e3()] + fuzzed[:50]:
        harness.reachable_states(env)
    ok = LAW_AUDIT["exact_violations"] == 0 and LAW_AUDIT["worst"] <= TOL
    acceptance(2, "set-mass martingale", ok,
               f"{LAW_AUDIT['count']} laws audited; exact violations {LAW_AUDIT['exact_violations']}, "
               f"float worst {LAW_AUDIT['worst']:.3g}")
    assert ok
