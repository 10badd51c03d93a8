"""Bernoulli bond percolation clusters on lattice boxes and growing-subgraph walks."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .dyn_graph import DynEnv
from .errors import ConfigError, EvosetError


class RetryCapError(EvosetError, RuntimeError):
    pass


@dataclass
class PercConfig:
    d: int
    L: int
    p: float
    seed: int = 0
    growth_schedule: list = field(default_factory=list)  # [(t, [(u, v), ...]), ...] in cluster indices
    min_fraction: float = 0.1
    max_retries: int = 20

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError("perc.d", "lattice dimension must be a positive integer")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("perc.L", "box half-side must be a positive integer")
        if not 0 <= self.p <= 1:
            raise ConfigError("perc.p", "retention probability must lie in [0, 1]")
        if not 0 <= self.min_fraction <= 1:
            raise ConfigError("perc.min_fraction", "must lie in [0, 1]")
        if self.max_retries < 1:
            raise ConfigError("perc.max_retries", "must be at least 1")


def box_bonds(d, L):
    """All nearest-neighbour bonds of [-L, L]^d as flat-index pairs (u < v)."""
    side = 2 * L + 1
    shape = (side,) * d
    flat = np.arange(side**d).reshape(shape)
    us, vs = [], []
    for axis in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[axis], hi[axis] = slice(0, side - 1), slice(1, side)
        us.append(flat[tuple(lo)].ravel())
        vs.append(flat[tuple(hi)].ravel())
    return np.concatenate(us), np.concatenate(vs)


def flat_coords(flat_idx, d, L):
    side = 2 * L + 1
    return np.stack(np.unravel_index(flat_idx, (side,) * d), axis=-1) - L


@dataclass
class Cluster:
    d: int
    L: int
    vertices: np.ndarray   # flat box indices of cluster sites, sorted
    open_u: np.ndarray     # open bonds, cluster-local indices
    open_v: np.ndarray
    closed_u: np.ndarray   # closed lattice bonds with both ends in the cluster
    closed_v: np.ndarray
    origin: int            # cluster-local index of the origin
    attempts: int

    @property
    def coords(self):
        return flat_coords(self.vertices, self.d, self.L)

    @property
    def on_box_boundary(self):
        return np.abs(self.coords).max(axis=1) == self.L


def generate_cluster(cfg: PercConfig, rng=None) -> Cluster:
    """Open each box bond with probability p and keep the origin's cluster.

    Resamples while the cluster holds fewer than ``min_fraction`` of the box
    sites, up to ``max_retries`` attempts.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    side = 2 * cfg.L + 1
    n_box = side**cfg.d
    origin_flat = int(np.ravel_multi_index((cfg.L,) * cfg.d, (side,) * cfg.d))
    bu, bv = box_bonds(cfg.d, cfg.L)
    for attempt in range(1, cfg.max_retries + 1):
        is_open = rng.random(len(bu)) < cfg.p
        adj = sp.coo_matrix((np.ones(is_open.sum(), dtype=np.int8), (bu[is_open], bv[is_open])),
                            shape=(n_box, n_box))
        _, comp = connected_components(adj, directed=False)
        members = comp == comp[origin_flat]
        if members.sum() >= cfg.min_fraction * n_box:
            break
    else:
        raise RetryCapError(
            f"origin cluster below {cfg.min_fraction:.0%} of the box after {cfg.max_retries} attempts"
        )
    vertices = np.flatnonzero(members)
    local = np.full(n_box, -1, dtype=np.int64)
    local[vertices] = np.arange(len(vertices))
    inside = members[bu] & members[bv]
    op, cl = inside & is_open, inside & ~is_open
    return Cluster(cfg.d, cfg.L, vertices, local[bu[op]], local[bv[op]],
                   local[bu[cl]], local[bv[cl]], int(local[origin_flat]), attempt)


def growing_env(cluster: Cluster, cfg: PercConfig, horizon=None) -> DynEnv:
    """Unit conductance on open bonds, scheduled insertions, loop weight = current degree.

    The loop rule gives P(stay) = 1/2 at every time, and since edges are only
    added, every pi^(t)(x) = 2 deg_t(x) is non-decreasing and at most 4d.
    """
    n = len(cluster.vertices)
    edges = {(int(u), int(v)) for u, v in zip(cluster.open_u, cluster.open_v)}
    eu = [u for u, _ in sorted(edges)]
    ev = [v for _, v in sorted(edges)]
    w0 = [1.0] * len(eu)
    pos = {e: k for k, e in enumerate(sorted(edges))}
    pending = []
    for t, batch in sorted(cfg.growth_schedule, key=lambda tb: tb[0]):
        for u, v in batch:
            u, v = min(int(u), int(v)), max(int(u), int(v))
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ConfigError("perc.growth_schedule", f"edge ({u}, {v}) outside the cluster vertex set")
            if (u, v) in pos:
                continue
            pos[(u, v)] = len(eu)
            eu.append(u)
            ev.append(v)
            w0.append(0.0)
            pending.append((pos[(u, v)], float(t)))
    n_bonds = len(eu)
    e_edge = [k for k, _ in pending]
    e_time = [t for _, t in pending]
    e_w = [1.0] * len(pending)
    # loops track the degree at every insertion time
    deg = np.bincount(np.array(eu[: n_bonds - len(pending)] + ev[: n_bonds - len(pending)], dtype=np.int64),
                      minlength=n).astype(float)
    loop_edge = n_bonds + np.arange(n)
    w0 = w0 + deg.tolist()
    for t in sorted(set(e_time)):
        batch = [eu[k] for k, s in pending if s == t] + [ev[k] for k, s in pending if s == t]
        touched = np.unique(batch)
        deg += np.bincount(batch, minlength=n)
        e_edge.extend(loop_edge[touched].tolist())
        e_time.extend([t] * len(touched))
        e_w.extend(deg[touched].tolist())
    last = max(e_time, default=0)
    meta = {"percolation": {"d": cluster.d, "L": cluster.L, "p": cfg.p, "seed": cfg.seed},
            "origin": cluster.origin, "on_box_boundary": cluster.on_box_boundary,
            "coords": cluster.coords, "n_bonds": n_bonds}
    return DynEnv(n, eu + list(range(n)), ev + list(range(n)), np.array(w0), horizon if horizon is not None else last,
                  events=(e_edge, e_time, e_w), meta=meta)


def _neighbour_table(env: DynEnv, t):
    """CSR neighbour lists of positive off-diagonal weights at time t (unit weights)."""
    snap = env.snapshot(t)
    w = np.asarray(snap.weights, dtype=float)
    keep = (env.eu != env.ev) & (w > 0)
    u, v = env.eu[keep], env.ev[keep]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    order = np.argsort(rows, kind="stable")
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=env.n))])
    return indptr, cols[order]


@dataclass
class TransienceSummary:
    n_walks: int
    t_max: int
    returns: np.ndarray          # returns to the origin per walk (before kill)
    late_return: np.ndarray      # returned at some step > t_max / 2
    killed: np.ndarray           # hit the box boundary
    kill_time: np.ndarray        # -1 if never killed
    max_l1: int

    @property
    def late_return_fraction(self):
        return float(self.late_return.mean())

    @property
    def kill_fraction(self):
        return float(self.killed.mean())

    def histogram(self):
        return np.bincount(self.returns).tolist()

    def flags_non_transient(self, threshold=0.5):
        return self.late_return_fraction >= threshold

    def to_dict(self, **extra):
        return {
            **extra,
            "n_walks": self.n_walks, "t_max": self.t_max,
            "median_returns": float(np.median(self.returns)),
            "mean_returns": float(self.returns.mean()),
            "return_histogram": self.histogram(),
            "late_return_fraction": self.late_return_fraction,
            "kill_fraction": self.kill_fraction,
            "max_l1_distance": self.max_l1,
        }


def transience_experiment(env: DynEnv, n_walks, t_max, rng, kill_boundary=True, block=4096) -> TransienceSummary:
    """Lazy walks from the origin; walks are killed on reaching the box boundary.

    Each step stays with probability loop/pi (1/2 for percolation envs) and
    otherwise moves to a uniform current neighbour.  Asserts the walk stays
    within l1 distance t of the origin after t steps.
    """
    origin = int(env.meta["origin"])
    coords = np.asarray(env.meta["coords"])
    boundary = np.asarray(env.meta["on_box_boundary"]) if kill_boundary else np.zeros(env.n, bool)
    dist = np.abs(coords - coords[origin]).sum(axis=1)
    changes = [int(np.ceil(c)) for c in env.change_times if c <= t_max]
    pos = np.full(n_walks, origin, dtype=np.int64)
    alive = np.ones(n_walks, dtype=bool)
    returns = np.zeros(n_walks, dtype=np.int64)
    late = np.zeros(n_walks, dtype=bool)
    kill_time = np.full(n_walks, -1, dtype=np.int64)
    if boundary[origin]:
        alive[:] = False
        kill_time[:] = 0
    max_l1 = 0
    half = t_max // 2
    t = 0
    while t < t_max:
        indptr, nbrs = _neighbour_table(env, t)
        deg = np.diff(indptr)
        pi = np.asarray(env.pi(t), dtype=float)
        loops = np.asarray(env.snapshot(t).loops, dtype=float)
        stay_p = np.divide(loops, pi, out=np.ones(env.n), where=pi > 0)
        nxt = min([c for c in changes if c > t] + [t_max])
        while t < nxt:
            steps = min(block, nxt - t)
            u_stay = rng.random((steps, n_walks))
            u_pick = rng.random((steps, n_walks))
            for k in range(steps):
                idx = np.flatnonzero(alive)
                if not len(idx):
                    break
                p = pos[idx]
                move = (u_stay[k, idx] >= stay_p[p]) & (deg[p] > 0)
                mv = idx[move]
                pm = pos[mv]
                j = (u_pick[k, mv] * deg[pm]).astype(np.int64)
                pos[mv] = nbrs[indptr[pm] + np.minimum(j, deg[pm] - 1)]
                step_no = t + k + 1
                if len(mv):
                    far = int(dist[pos[mv]].max())
                    if far > step_no:
                        raise AssertionError(f"walk at l1 distance {far} after {step_no} steps")
                    max_l1 = max(max_l1, far)
                at_origin = pos[idx] == origin
                returns[idx[at_origin]] += 1
                if step_no > half:
                    late[idx[at_origin]] = True
                dead = idx[boundary[pos[idx]]]
                alive[dead] = False
                kill_time[dead] = step_no
            t += steps
            if not alive.any():
                t = t_max
                break
    return TransienceSummary(n_walks, t_max, returns, late, kill_time >= 0, kill_time, max_l1)


def cluster_document(cluster: Cluster, env: DynEnv):
    """Cluster as a graph document (vertex labels are lattice coordinates)."""
    from .graphs import to_document

    doc = to_document(env)
    doc["percolation"] = env.meta["percolation"]
    doc["vertices"] = [list(map(int, c)) for c in cluster.coords]
    return doc


def write_summary_json(summary: TransienceSummary, path, **extra):
    with open(path, "w") as fh:
        json.dump(summary.to_dict(**extra), fh, indent=2)
