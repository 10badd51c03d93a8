"""Experiment configuration, seeded task runners and machine-readable reports."""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import csrw, embedding, evolving_set as es, exact_chain, isoperimetry as iso, percolation
from .dyn_graph import DynEnv, laziness_coefficient, monotonicity_report
from .errors import ConfigError
from .graphs import from_document

log = logging.getLogger(__name__)

TASKS = (
    "verify-identities", "drift-suite", "evolving-sim", "kernel-decay",
    "csrw-sim", "percolation-transience", "kappa-table",
)

# record anchors name the property being checked
ANCHORS = frozenset({
    "duality-identity", "set-mass-martingale", "drift-inequalities",
    "coupling-walk-marginal", "coupling-set-marginal", "coupling-uniform-on-set",
    "complement-duality", "embedding-integer-times", "embedding-intra-step-martingale",
    "embedding-endpoint-limit", "heat-kernel-decay", "csrw-ring-count", "csrw-jump-intervals",
    "strong-transience", "isoperimetric-singleton-bound", "isoperimetric-enumerators",
    "plumbing",
})

DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 1.5, 2.0)
WORKERS_ENV = "EVOSET_WORKERS"


# -- reports -------------------------------------------------------------------------

@dataclass
class Record:
    anchor: str
    name: str
    passed: bool
    value: float
    tolerance: float

    def __post_init__(self):
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")
        self.passed = bool(self.passed)
        self.value = _num(self.value)
        self.tolerance = _num(self.tolerance)


def _num(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


@dataclass
class RunReport:
    task: str
    seed: int
    env_digest: str | None = None
    records: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self):
        return [r for r in self.records if not r.passed]

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=_num))


# -- configuration ---------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    task: str
    env: dict | None = None
    iso: iso.IsoConfig | None = None
    seed: int = 0
    replicas: int = 1
    horizon: int | None = None
    out: str | None = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, task=None, seed=None, out=None) -> "ExperimentConfig":
        doc = dict(doc or {})
        task = task or doc.pop("task", None)
        doc.pop("task", None)
        if task not in TASKS:
            raise ConfigError("task", f"must be one of {TASKS}, got {task!r}")
        iso_doc = doc.pop("iso", None)
        iso_cfg = None
        if iso_doc is not None:
            if "d" not in iso_doc:
                raise ConfigError("iso.d", "isoperimetric dimension is required")
            iso_cfg = iso.IsoConfig(**{k: iso_doc[k] for k in ("d", "mode", "lam", "measure") if k in iso_doc})
        cfg = cls(
            task=task,
            env=doc.pop("env", None),
            iso=iso_cfg,
            seed=doc.pop("seed", 0) if seed is None else seed,
            replicas=doc.pop("replicas", 1),
            horizon=doc.pop("horizon", None),
            out=doc.pop("out", None) if out is None else out,
            params=doc.pop("params", {}),
        )
        cfg.params.update(doc)  # remaining top-level keys are task parameters
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        if not isinstance(self.replicas, int) or self.replicas < 1:
            raise ConfigError("replicas", "must be a positive integer")
        if self.horizon is not None and (not isinstance(self.horizon, (int, float)) or self.horizon < 0):
            raise ConfigError("horizon", "must be a nonnegative number")
        needs_env = self.task != "percolation-transience"
        if needs_env and self.env is None and not self.params.get("fuzz"):
            raise ConfigError("env", f"task {self.task} needs an environment")
        if self.task in ("kappa-table", "kernel-decay") and self.iso is None:
            raise ConfigError("iso.d", f"task {self.task} needs the isoperimetric dimension")
        if self.task == "drift-suite":
            alphas = self.params.get("alphas", DEFAULT_ALPHAS)
            for a in alphas:
                if a == 1:
                    raise ConfigError("params.alphas", "alpha=1 vacuous: the drift bound is an identity")
                if not a > 0:
                    raise ConfigError("params.alphas", "alphas must be positive")
        if self.task == "percolation-transience":
            if "perc" not in self.params:
                raise ConfigError("perc", "percolation-transience needs a 'perc' block")
            for key in ("d", "L", "p"):
                if key not in self.params["perc"]:
                    raise ConfigError(f"perc.{key}", "required")
        if self.task == "csrw-sim" and "t_max" not in self.params:
            raise ConfigError("params.t_max", "csrw-sim needs t_max")

    def build_env(self, rng=None) -> DynEnv:
        doc = dict(self.env)
        if self.horizon is not None:
            doc["horizon"] = self.horizon
        return from_document(doc, rng=rng)


def load_config(path, **overrides) -> ExperimentConfig:
    text = Path(path).read_text()
    if str(path).endswith((".yml", ".yaml")):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    return ExperimentConfig.from_dict(doc, **overrides)


# -- seeded streams ----------------------------------------------------------------------

def replica_rng(seed, replica) -> np.random.Generator:
    """Stream for replica ``replica`` of master ``seed``; independent of worker layout."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def _map_replicas(fn, args_list):
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args_list)))  # map preserves replica order


# -- fuzzer -------------------------------------------------------------------------------

def random_env_fuzzer(n_vertices, horizon, rng, exact=True, constant_pi=False, min_vertices=2) -> DynEnv:
    """Random connected graph with rational weights and a non-decreasing schedule.

    Every vertex carries a loop of weight at least a third of its off-diagonal
    mass, so the stay probability is at least 1/4 at every time.  With
    ``constant_pi`` no weight ever changes.
    """
    if not 1 <= n_vertices <= 8:
        raise ConfigError("fuzz.n_vertices", "must lie in [1, 8]")
    if not 0 <= horizon <= 4:
        raise ConfigError("fuzz.horizon", "must lie in [0, 4]")
    n = int(rng.integers(min(min_vertices, n_vertices), n_vertices + 1))
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.3:
                pairs.add((u, v))
    pairs = sorted(pairs)

    def rational():
        return Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 5)))

    w = {e: rational() for e in pairs}
    loop_ratio = [Fraction(int(rng.integers(1, 4)), 3) for _ in range(n)]  # 1/3, 2/3 or 1

    def off_mass(weights):
        off = [Fraction(0)] * n
        for (u, v), x in weights.items():
            off[u] += x
            off[v] += x
        return off

    loops = [max(o * r, Fraction(1)) for o, r in zip(off_mass(w), loop_ratio)]
    changes = {e: [] for e in pairs}
    loop_changes = [[] for _ in range(n)]
    if not constant_pi:
        cur = dict(w)
        for t in range(1, horizon + 1):
            for e in pairs:
                if rng.random() < 0.3:
                    cur[e] = cur[e] * (Fraction(3, 2) if rng.random() < 0.5 else 2)
                    changes[e].append((t, cur[e]))
            off = off_mass(cur)
            for x in range(n):
                need = off[x] * loop_ratio[x]
                grow = rng.random() < 0.15
                new = max(loops[x] * (2 if grow else 1), need)
                if new != loops[x]:
                    loops[x] = new
                    loop_changes[x].append((t, new))
    conv = (lambda x: x) if exact else float
    edges = [(u, v, conv(w[(u, v)]), [(t, conv(x)) for t, x in changes[(u, v)]]) for u, v in pairs]
    base_loops = [max(o * r, Fraction(1)) for o, r in zip(off_mass(w), loop_ratio)]
    edges += [(x, x, conv(base_loops[x]), [(t, conv(v)) for t, v in loop_changes[x]]) for x in range(n)]
    return DynEnv.from_edges(list(range(n)), edges, horizon)


# -- exact identity suites ---------------------------------------------------------------

def _err(a, b):
    return abs(a - b)


def _ok(err, env, tol):
    return err == 0 if env.exact else err <= tol


def _fmax(values, env):
    return max(values, default=env.zero)


def identity_records(env: DynEnv, tol=1e-12, coupling=True, embedding_check=True, tag=""):
    """Duality, martingale, coupling and embedding-at-integer-time records for one env."""
    cache = es._LawCache(env)
    duality, law_errors = [], []
    starts = np.flatnonzero(env.support(0)).tolist()
    for x in starts:
        pi0 = env.pi(0)[x]
        for kernel in exact_chain.iter_kernels(env, 0, env.horizon):
            t = kernel.t
            dist = es.exact_set_distribution(env, env.label(x), t, cache)
            memb = dist.membership(env.n)
            pi_t = env.pi(t)
            for y in range(env.n):
                duality.append(_err(kernel.probs[x, y], pi_t[y] / pi0 * memb[y]))
    for (t, members), law in cache.laws.items():
        law_errors.append(_err(law.expected_mass(env), cache.mass(t, members)))
    recs = [
        Record("duality-identity", f"duality{tag}", _ok(_fmax(duality, env), env, tol), _fmax(duality, env), tol),
        Record("set-mass-martingale", f"martingale{tag}", _ok(_fmax(law_errors, env), env, tol),
               _fmax(law_errors, env), tol),
    ]
    if coupling and env.n <= es.MAX_JOINT_DP_VERTICES:
        recs += coupling_records(env, tol, tag)
    if embedding_check:
        errs = []
        for (t, members) in cache.laws:
            if members:
                m = embedding.m_interpolate(env, members, t, 0.0, 0.0)
                errs.append(abs(m - float(cache.mass(t, members))))
        e = max(errs, default=0.0)
        recs.append(Record("embedding-integer-times", f"embedding_s0{tag}", e <= tol * max(1.0, _scale(env)), e, tol))
    return recs


def _scale(env):
    return float(max(np.asarray(env.pi(t), dtype=float).sum() for t in range(int(env.horizon) + 1)))


def coupling_records(env: DynEnv, tol=1e-12, tag="", t_max=3):
    cache = es._LawCache(env)
    walk_err, set_err, unif_err = [], [], []
    t_end = min(t_max, env.horizon)
    for x in np.flatnonzero(env.support(0)).tolist():
        start = env.label(x)
        for kernel in exact_chain.iter_kernels(env, 0, t_end):
            t = kernel.t
            joint = es.joint_exact_distribution(env, start, t, cache)
            walk = [env.zero] * env.n
            sets = {}
            for (y, s), p in joint.items():
                walk[y] += p
                sets[s] = sets.get(s, env.zero) + p
            walk_err.extend(_err(walk[y], kernel.probs[x, y]) for y in range(env.n))
            hat = es.conditioned_set_distribution(env, start, t, cache).support
            for s in set(sets) | set(hat):
                set_err.append(_err(sets.get(s, env.zero), hat.get(s, env.zero)))
            for traj, xs in es.joint_path_distribution(env, start, t, cache).items():
                s_t = traj[-1]
                total = sum(xs.values())
                mass = cache.mass(t, s_t)
                pi_t = env.pi(t)
                for w in range(env.n):
                    target = pi_t[w] / mass if w in s_t else env.zero
                    unif_err.append(_err(xs.get(w, env.zero) / total, target))
    out = []
    for anchor, name, errs in (
        ("coupling-walk-marginal", "coupling_walk", walk_err),
        ("coupling-set-marginal", "coupling_set", set_err),
        ("coupling-uniform-on-set", "coupling_uniform", unif_err),
    ):
        e = _fmax(errs, env)
        out.append(Record(anchor, f"{name}{tag}", _ok(e, env, tol), e, tol))
    return out


def reachable_states(env: DynEnv):
    """Every nonempty (t, S) reachable from a singleton before the horizon."""
    cache = es._LawCache(env)
    for x in np.flatnonzero(env.support(0)).tolist():
        es.exact_set_distribution(env, env.label(x), env.horizon, cache)
    return sorted({k for k in cache.laws if k[1]}, key=lambda k: (k[0], sorted(k[1])))


def drift_records(env: DynEnv, alphas=DEFAULT_ALPHAS, gamma=None, tol=1e-12, tag=""):
    if gamma is None:
        gamma = min(float(laziness_coefficient(env)), 0.5)
    if not gamma > 0:
        raise ConfigError("gamma", "drift bounds need a lazy environment (gamma > 0)")
    out = []
    states = reachable_states(env)
    for alpha in alphas:
        worst, fails = math.inf, 0
        for t, members in states:
            r = es.drift_check(env, es.SetState.of(env, t, members), alpha, gamma, tol)
            slack = r.rhs - r.lhs if alpha < 1 else r.lhs - r.rhs
            worst = min(worst, slack)
            fails += not r.passed
        out.append(Record("drift-inequalities", f"drift_alpha_{alpha}{tag}", fails == 0, worst, tol))
    return out


def complement_records(env: DynEnv, rng, n_sets=5, tol=1e-12, tag=""):
    support = np.flatnonzero(env.support(0))
    worst = env.zero
    for _ in range(n_sets):
        members = frozenset(support[rng.random(len(support)) < 0.5].tolist())
        worst = max(worst, es.complement_dual_error(env, members, 0))
    return [Record("complement-duality", f"complement{tag}", _ok(worst, env, tol), worst, tol)]


# -- Monte Carlo helpers -----------------------------------------------------------------

def _simulate_set_replica(doc, horizon, start, steps, seed, replica, coupled):
    env = from_document({**doc, "horizon": horizon} if horizon is not None else doc)
    return es.simulate_evolving_set(env, start, steps, replica_rng(seed, replica), coupled)


def _csrw_replica(doc, horizon, start, t_max, seed, replica):
    env = from_document({**doc, "horizon": horizon} if horizon is not None else doc)
    return csrw.simulate_csrw(env, start, t_max, replica_rng(seed, replica))


def poisson_band_records(counts, rate, t, n_sigma=4.0):
    """Sample mean and variance of ring counts against Poisson(rate * t)."""
    counts = np.asarray(counts, dtype=float)
    n = len(counts)
    lam = rate * t
    mean_z = (counts.mean() - lam) / math.sqrt(lam / n)
    # Var of the sample variance for Poisson: (mu4 - sigma^4 (n-3)/(n-1)) / n, mu4 = lam + 3 lam^2
    var_se = math.sqrt((lam + 3 * lam**2 - lam**2 * (n - 3) / (n - 1)) / n)
    var_z = (counts.var(ddof=1) - lam) / var_se
    return [
        Record("csrw-ring-count", "ring_count_mean_z", abs(mean_z) <= n_sigma, mean_z, n_sigma),
        Record("csrw-ring-count", "ring_count_var_z", abs(var_z) <= n_sigma, var_z, n_sigma),
    ]


def ks_exponential_record(intervals, level=0.01):
    res = stats.kstest(intervals, "expon")
    return Record("csrw-jump-intervals", "effective_jump_ks_pvalue", res.pvalue >= level, res.pvalue, level)


def decay_records(rows, rel_tol=0.0):
    """Running max of the envelope over the second half must not exceed the first half's."""
    vals = np.array([r[3] for r in rows if r[0] >= 1])
    if len(vals) < 2:
        return [Record("heat-kernel-decay", "envelope_running_max", False, float("nan"), rel_tol)]
    half = len(vals) // 2
    first, second = float(vals[:half].max()), float(vals[half:].max())
    finite = bool(np.all(np.isfinite(vals)))
    ratio = second / first
    return [
        Record("heat-kernel-decay", "envelope_finite", finite, float(vals.max()), float("inf")),
        Record("heat-kernel-decay", "envelope_running_max_stable", finite and ratio <= 1 + rel_tol, ratio, 1 + rel_tol),
    ]


# -- task runners ------------------------------------------------------------------------

def _out_dir(cfg: ExperimentConfig):
    if cfg.out is None:
        return None
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fuzz_envs(cfg, rng, **kw):
    n_fuzz = int(cfg.params.get("fuzz", 0))
    n_max = int(cfg.params.get("fuzz_max_vertices", 8))
    h_max = int(cfg.params.get("fuzz_max_horizon", 4))
    exact = bool(cfg.params.get("exact", True))
    for k in range(n_fuzz):
        yield k, random_env_fuzzer(n_max, int(rng.integers(1, h_max + 1)), rng, exact=exact, **kw)


def _task_verify_identities(cfg, report, out):
    rng = replica_rng(cfg.seed, 0)
    if cfg.env is not None:
        env = cfg.build_env(rng)
        report.env_digest = env.digest()
        report.records += identity_records(env)
    for k, env in _fuzz_envs(cfg, rng):
        report.records += identity_records(env, tag=f"_fuzz{k}", coupling=env.n <= 6)
    n_const = int(cfg.params.get("complement_envs", 0))
    for k in range(n_const):
        env = random_env_fuzzer(8, 2, rng, exact=cfg.params.get("exact", True), constant_pi=True)
        report.records += complement_records(env, rng, tag=f"_const{k}")


def _task_drift_suite(cfg, report, out):
    rng = replica_rng(cfg.seed, 0)
    alphas = tuple(cfg.params.get("alphas", DEFAULT_ALPHAS))
    gamma = cfg.params.get("gamma")
    if cfg.env is not None:
        env = cfg.build_env(rng)
        report.env_digest = env.digest()
        report.records += drift_records(env, alphas, gamma)
    for k, env in _fuzz_envs(cfg, rng):
        report.records += drift_records(env, alphas, gamma, tag=f"_fuzz{k}")


def _task_evolving_sim(cfg, report, out):
    env = cfg.build_env()
    report.env_digest = env.digest()
    start = cfg.params.get("start", env.label(0))
    steps = int(cfg.params.get("steps", env.horizon))
    if not 0 <= steps <= env.horizon:
        raise ConfigError("params.steps", f"{steps} steps exceed the horizon {env.horizon}")
    coupled = bool(cfg.params.get("coupled", False))
    trajs = _map_replicas(_simulate_set_replica, [
        (cfg.env, cfg.horizon, start, steps, cfg.seed, r, coupled) for r in range(cfg.replicas)
    ])
    masses = np.array([[row[2] for row in tr] for tr in trajs])
    m0 = masses[0, 0]
    if not coupled and cfg.replicas > 1:
        for t in range(1, steps + 1):
            col = masses[:, t]
            se = col.std(ddof=1) / math.sqrt(len(col))
            z = (col.mean() - m0) / se if se > 0 else 0.0
            report.records.append(Record("set-mass-martingale", f"mc_mean_mass_t{t}", abs(z) <= 4, z, 4.0))
    report.summary["mean_mass"] = masses.mean(axis=0).tolist()
    if out:
        es.write_trajectories_csv(out / "trajectories.csv", trajs)
        report.artifacts.append("trajectories.csv")


def _task_kernel_decay(cfg, report, out):
    env = cfg.build_env(replica_rng(cfg.seed, 0))
    report.env_digest = env.digest()
    s = int(cfg.params.get("s", 0))
    t_end = int(cfg.params.get("t_end", env.horizon))
    rows = exact_chain.decay_envelope(env, s, cfg.iso, t_end)
    report.records += decay_records(rows, float(cfg.params.get("rel_tol", 0.0)))
    report.summary["envelope_max"] = max(r[3] for r in rows)
    if out:
        import csv

        with open(out / "decay.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "sup_normalized_heat", "psi_growth", "envelope"])
            for r in rows:
                w.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3])])
        report.artifacts.append("decay.csv")


def _task_csrw_sim(cfg, report, out):
    env = cfg.build_env()
    report.env_digest = env.digest()
    t_max = float(cfg.params["t_max"])
    if t_max > env.horizon:
        raise ConfigError("params.t_max", f"{t_max} exceeds the horizon {env.horizon}")
    start = cfg.params.get("start", env.label(0))
    paths = _map_replicas(_csrw_replica, [
        (cfg.env, cfg.horizon, start, t_max, cfg.seed, r) for r in range(cfg.replicas)
    ])
    counts = [len(p.jump_times) for p in paths]
    if len(paths) > 1:
        report.records += poisson_band_records(counts, csrw.CLOCK_RATE, t_max)
    gaps = csrw.interjump_gaps(paths)
    if len(gaps) > 1:
        report.records.append(ks_exponential_record(gaps))
    target = cfg.params.get("target")
    if target is not None:
        summary = csrw.return_statistics(paths, env.index(target))
        report.summary["visit_histogram"] = summary.histogram.tolist()
    if out:
        csrw.write_paths_csv(out / "csrw_paths.csv", paths, env)
        report.artifacts.append("csrw_paths.csv")


def _task_percolation(cfg, report, out):
    pdoc = dict(cfg.params["perc"])
    pdoc.setdefault("seed", cfg.seed)
    n_walks = int(cfg.params.get("n_walks", 1000))
    t_max = int(cfg.params.get("t_max", 100_000))
    pc = percolation.PercConfig(**pdoc)
    cluster = percolation.generate_cluster(pc)
    env = percolation.growing_env(cluster, pc, horizon=t_max)
    report.env_digest = env.digest()
    main = percolation.transience_experiment(env, n_walks, t_max, replica_rng(cfg.seed, 0))
    report.summary["main"] = main.to_dict(d=pc.d, L=pc.L, p=pc.p, seed=pc.seed, cluster_size=len(cluster.vertices))
    control_doc = cfg.params.get("control")
    if control_doc is not None:
        cc = percolation.PercConfig(**{"seed": cfg.seed, **control_doc})
        c_env = percolation.growing_env(percolation.generate_cluster(cc), cc, horizon=t_max)
        ctrl = percolation.transience_experiment(c_env, n_walks, t_max, replica_rng(cfg.seed, 1))
        report.summary["control"] = ctrl.to_dict(d=cc.d, L=cc.L, p=cc.p, seed=cc.seed)
        factor = float(cfg.params.get("factor", 5.0))
        ratio = ctrl.late_return_fraction / max(main.late_return_fraction, 1.0 / (n_walks + 1))
        ok = main.late_return_fraction * factor <= ctrl.late_return_fraction
        report.records.append(Record("strong-transience", "late_return_ratio", ok, ratio, factor))
    report.records.append(Record("plumbing", "kill_fraction_reported", True, main.kill_fraction, 1.0))
    if out:
        (out / "percolation.json").write_text(json.dumps(report.summary, indent=2))
        report.artifacts.append("percolation.json")


def _task_kappa_table(cfg, report, out):
    env = cfg.build_env(replica_rng(cfg.seed, 0))
    report.env_digest = env.digest()
    t_end = int(cfg.params.get("t_end", env.horizon))
    rows = iso.kappa_table(env, t_end, cfg.iso)
    if cfg.iso.mode != "lattice-analytic":
        worst = min(iso.singleton_bound(env, t, cfg.iso.d) - k for t, k, *_ in rows)
        report.records.append(Record("isoperimetric-singleton-bound", "singleton_bound", worst >= -1e-12, worst, 1e-12))
    if out:
        iso.write_kappa_csv(rows, out / "kappa.csv")
        report.artifacts.append("kappa.csv")


_RUNNERS = {
    "verify-identities": _task_verify_identities,
    "drift-suite": _task_drift_suite,
    "evolving-sim": _task_evolving_sim,
    "kernel-decay": _task_kernel_decay,
    "csrw-sim": _task_csrw_sim,
    "percolation-transience": _task_percolation,
    "kappa-table": _task_kappa_table,
}


def run(cfg: ExperimentConfig) -> RunReport:
    cfg.validate()
    report = RunReport(cfg.task, cfg.seed)
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    _RUNNERS[cfg.task](cfg, report, out)
    report.timing["seconds"] = time.perf_counter() - t0
    if out:
        report.write_json(out / "report.json")
    for r in report.failures:
        log.warning("FAILED %s [%s] value=%s tol=%s", r.name, r.anchor, r.value, r.tolerance)
    return report
