import json

import numpy as np
import pytest

from evoset.dyn_graph import DynEnv, laziness_coefficient, monotonicity_report
from evoset.errors import ConfigError
from evoset.isoperimetry import kappa_gray
from evoset.percolation import (
    PercConfig, RetryCapError, box_bonds, cluster_document, generate_cluster, growing_env,
    transience_experiment, write_summary_json,
)


def test_box_bonds_count():
    for d, L in [(1, 3), (2, 2), (3, 1)]:
        u, v = box_bonds(d, L)
        side = 2 * L + 1
        assert len(u) == d * side ** (d - 1) * (side - 1)


def test_full_retention_is_whole_box():
    c = generate_cluster(PercConfig(d=3, L=3, p=1.0))
    assert len(c.vertices) == 7**3
    assert len(c.closed_u) == 0
    assert tuple(c.coords[c.origin]) == (0, 0, 0)


def test_zero_retention_exhausts_retries():
    with pytest.raises(RetryCapError):
        generate_cluster(PercConfig(d=3, L=3, p=0.0, max_retries=3))


def test_cluster_is_connected_component():
    c = generate_cluster(PercConfig(d=2, L=6, p=0.6, seed=3))
    # oracle: breadth-first search over open bonds from the origin
    nbrs = {i: set() for i in range(len(c.vertices))}
    for a, b in zip(c.open_u, c.open_v):
        nbrs[a].add(b)
        nbrs[b].add(a)
    seen, frontier = {c.origin}, [c.origin]
    while frontier:
        x = frontier.pop()
        for y in nbrs[x] - seen:
            seen.add(y)
            frontier.append(y)
    assert len(seen) == len(c.vertices)


def test_config_validation():
    with pytest.raises(ConfigError) as info:
        PercConfig(d=3, L=5, p=1.5)
    assert info.value.field == "perc.p"


def test_growing_env_loops_and_monotonicity():
    cfg = PercConfig(d=2, L=3, p=0.6, seed=1)
    c = generate_cluster(cfg)
    grow = PercConfig(d=2, L=3, p=0.6, seed=1, growth_schedule=[(1, list(zip(c.closed_u, c.closed_v)))])
    env = growing_env(c, grow, horizon=2)
    rep = monotonicity_report(env)
    assert rep.is_nondecreasing
    assert rep.beta[1] <= 1
    assert laziness_coefficient(env) == 0.5
    assert np.all(env.pi(1) >= env.pi(0))
    assert np.all(env.pi(2) <= 4 * 2)


def test_static_cluster_without_schedule():
    cfg = PercConfig(d=2, L=3, p=0.8, seed=2)
    env = growing_env(generate_cluster(cfg), cfg)
    assert len(env.change_times) == 0


def test_schedule_outside_cluster_rejected():
    cfg = PercConfig(d=2, L=3, p=0.8, seed=2)
    c = generate_cluster(cfg)
    bad = PercConfig(d=2, L=3, p=0.8, seed=2, growth_schedule=[(1, [(0, len(c.vertices) + 5)])])
    with pytest.raises(ConfigError):
        growing_env(c, bad)


def test_insertion_raises_counting_kappa_on_tiny_clusters():
    checked = 0
    for seed in range(40):
        cfg = PercConfig(d=2, L=2, p=0.45, seed=seed, min_fraction=0.0)
        c = generate_cluster(cfg)
        if not 3 <= len(c.vertices) <= 18 or len(c.closed_u) == 0:
            continue
        grow = PercConfig(d=2, L=2, p=0.45, seed=seed, growth_schedule=[(1, list(zip(c.closed_u, c.closed_v)))])
        env = growing_env(c, grow, horizon=1)
        ks = []
        for t in (0, 1):
            w = np.asarray(env.snapshot(t).dense, float)
            np.fill_diagonal(w, 0)  # edge boundary only, as in the bond count
            ks.append(kappa_gray(w, w.sum(axis=1), 2.0, True, counting=True)[0])
        assert ks[1] >= ks[0] - 1e-12
        checked += 1
    assert checked >= 3


def frozen_env():
    coords = np.array([[0, 0, 0], [1, 0, 0]])
    return DynEnv(2, [0, 1], [0, 1], [1.0, 1.0], 100,
                  meta={"origin": 0, "coords": coords, "on_box_boundary": np.array([False, True])})


def test_frozen_walk_flags_non_transient(rng):
    s = transience_experiment(frozen_env(), 10, 100, rng)
    assert s.returns.tolist() == [100] * 10
    assert s.late_return_fraction == 1.0
    assert s.flags_non_transient()
    assert s.kill_fraction == 0.0


def test_walk_distance_and_kill_accounting(rng):
    cfg = PercConfig(d=2, L=8, p=1.0)
    env = growing_env(generate_cluster(cfg), cfg, horizon=400)
    s = transience_experiment(env, 200, 400, rng)
    assert s.max_l1 <= 400
    assert np.all((s.kill_time >= 8) | (s.kill_time == -1))  # at least L steps to reach the boundary
    assert 0 < s.kill_fraction <= 1


def test_one_dimensional_control_is_recurrent(rng):
    cfg = PercConfig(d=1, L=500, p=1.0)
    env = growing_env(generate_cluster(cfg), cfg, horizon=4000)
    s = transience_experiment(env, 300, 4000, rng)
    # arcsine law: P(last zero before half time) = 1/2
    assert 0.35 < s.late_return_fraction < 0.65


def test_summary_json_and_document(tmp_path, rng):
    cfg = PercConfig(d=2, L=2, p=1.0)
    c = generate_cluster(cfg)
    env = growing_env(c, cfg, horizon=10)
    s = transience_experiment(env, 5, 10, rng)
    write_summary_json(s, tmp_path / "s.json", seed=cfg.seed, p=cfg.p, L=cfg.L, d=cfg.d)
    doc = json.loads((tmp_path / "s.json").read_text())
    for key in ("seed", "p", "L", "d", "return_histogram", "kill_fraction"):
        assert key in doc
    cd = cluster_document(c, env)
    assert len(cd["vertices"]) == 25 and cd["percolation"]["p"] == 1.0
