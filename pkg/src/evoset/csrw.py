"""Constant-speed continuous-time random walk by thinning a rate-2 Poisson clock.

At each ring T_k (i.i.d. exp(2) gaps) a fair coin decides whether the walk
stays or jumps; a jump from x goes to y with probability
pi^(T_k)(x, y) / pi^(T_k)(x), conductances read right-continuously at T_k.
Jump rings form a rate-1 Poisson process, and the walk sampled at ring times
is the 1/2-lazy discrete walk in the conductances pi^(T_k).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dyn_graph import DynEnv

CLOCK_RATE = 2.0
LAZY_PROB = 0.5


@dataclass
class CsrwPath:
    x0: int
    jump_times: np.ndarray  # ring times T_k
    positions: np.ndarray   # vertex index after ring k
    jumped: np.ndarray      # coin said "jump" at ring k
    t_max: float
    killed_at: float | None = None

    @property
    def moved(self) -> np.ndarray:
        prev = np.concatenate([[self.x0], self.positions[:-1]])
        return self.positions != prev

    def effective_jump_times(self) -> np.ndarray:
        return self.jump_times[self.jumped]


def interjump_gaps(paths, cut=None) -> np.ndarray:
    """Gaps between effective jumps that start by time ``cut`` (default t_max / 2).

    Each start is a stopping time, so the selected gaps are i.i.d. exp(1) up to
    censoring at t_max - cut. Pooling every complete gap in [0, t_max] instead
    drops the length-biased last one and skews the sample short by about 1/t_max.
    """
    out = []
    for p in paths:
        c = p.t_max / 2 if cut is None else cut
        times = np.concatenate([[0.0], p.effective_jump_times()])
        starts, gaps = times[:-1], np.diff(times)
        out.append(gaps[starts <= c])
    return np.concatenate(out) if out else np.empty(0)


def _row_sampler(env: DynEnv, t):
    snap = env.snapshot(t)
    return snap.csr, np.asarray(snap.pi, dtype=float)


def _jump(csr, pi, x, u):
    lo, hi = csr.indptr[x], csr.indptr[x + 1]
    cum = np.cumsum(csr.data[lo:hi])
    k = int(np.searchsorted(cum, u * pi[x], side="right"))
    return int(csr.indices[lo + min(k, hi - lo - 1)])


def simulate_csrw(env: DynEnv, x0, t_max, rng, absorbing=()) -> CsrwPath:
    """Simulate on [0, t_max]; ``absorbing`` vertex indices end the path on entry."""
    env.check_time(t_max)
    x = env.index(x0)
    # draw ring times in blocks until past t_max
    gaps = rng.exponential(1 / CLOCK_RATE, size=int(CLOCK_RATE * t_max + 10 * np.sqrt(t_max + 1) + 10))
    times = np.cumsum(gaps)
    while times[-1] <= t_max:
        more = np.cumsum(rng.exponential(1 / CLOCK_RATE, size=len(gaps))) + times[-1]
        times = np.concatenate([times, more])
    times = times[times <= t_max]
    coins = rng.random(len(times)) < LAZY_PROB
    picks = rng.random(len(times))
    positions = np.empty(len(times), dtype=np.int64)
    absorbing = set(int(a) for a in absorbing)
    killed = None
    epoch, sampler = None, None
    for k, t in enumerate(times):
        if coins[k]:
            e = env.epoch(t)
            if e != epoch:
                epoch, sampler = e, _row_sampler(env, t)
            x = _jump(*sampler, x, picks[k])
        positions[k] = x
        if x in absorbing:
            killed = float(t)
            times, coins, positions = times[: k + 1], coins[: k + 1], positions[: k + 1]
            break
    return CsrwPath(env.index(x0), times, positions, coins, float(t_max), killed)


def simulate_on_rings(env: DynEnv, x0, ring_times, rng) -> int:
    """Position after the given ring sequence (quenched on the clock)."""
    x = env.index(x0)
    for t in ring_times:
        if rng.random() < LAZY_PROB:
            x = _jump(*_row_sampler(env, t), x, rng.random())
    return x


def one_ring_law(env: DynEnv, x, t):
    """Analytic law of the position after one ring at time t: (1/2) delta_x + (1/2) P."""
    i = env.index(x)
    csr, pi = _row_sampler(env, t)
    law = np.zeros(env.n)
    law[i] += LAZY_PROB
    lo, hi = csr.indptr[i], csr.indptr[i + 1]
    law[csr.indices[lo:hi]] += (1 - LAZY_PROB) * csr.data[lo:hi] / pi[i]
    return law


def sample_one_ring(env: DynEnv, x, t, n, rng) -> np.ndarray:
    """n independent one-ring moves from x at time t (vectorised)."""
    i = env.index(x)
    csr, pi = _row_sampler(env, t)
    lo, hi = csr.indptr[i], csr.indptr[i + 1]
    cum = np.cumsum(csr.data[lo:hi])
    jump = rng.random(n) < LAZY_PROB
    k = np.minimum(np.searchsorted(cum, rng.random(n) * pi[i], side="right"), hi - lo - 1)
    return np.where(jump, csr.indices[lo + k], i)


@dataclass
class ReturnSummary:
    visits: np.ndarray      # entries into the target per path
    last_visit: np.ndarray  # time of last entry (nan if none)
    histogram: np.ndarray   # histogram[k] = number of paths with k entries


def return_statistics(paths, target_index) -> ReturnSummary:
    """Entries into ``target_index`` (arrivals after time 0) and last entry time per path."""
    visits, last = [], []
    for p in paths:
        prev = np.concatenate([[p.x0], p.positions[:-1]])
        entries = (p.positions == target_index) & (prev != target_index)
        visits.append(int(entries.sum()))
        last.append(float(p.jump_times[entries][-1]) if entries.any() else np.nan)
    visits = np.array(visits, dtype=int)
    return ReturnSummary(visits, np.array(last), np.bincount(visits) if len(visits) else np.zeros(1, int))


def ring_chain_env(env: DynEnv, ring_times) -> DynEnv:
    """Discrete environment whose step k is the 1/2-lazy walk in pi^(T_k).

    Off-diagonal weights are copied and each loop gains pi^(T_k)(x), so
    P'(x, x) = 1/2 + P(x, x)/2 and P'(x, y) = P(x, y)/2.
    """
    n_steps = len(ring_times)
    eu, ev = env.eu, env.ev
    loops_present = {int(u) for u, v in zip(eu, ev) if u == v}
    add_u = [x for x in range(env.n) if x not in loops_present]
    all_eu = np.concatenate([eu, np.array(add_u, dtype=np.int64)])
    all_ev = np.concatenate([ev, np.array(add_u, dtype=np.int64)])
    loop_pos = {int(u): k for k, (u, v) in enumerate(zip(all_eu, all_ev)) if u == v}

    def weights_at(t):
        snap = env.snapshot(t)
        w = np.concatenate([np.asarray(snap.weights, dtype=float), np.zeros(len(add_u))])
        pi = np.asarray(snap.pi, dtype=float)
        for x, k in loop_pos.items():
            w[k] += pi[x]
        return w

    w0 = weights_at(ring_times[0]) if n_steps else weights_at(0.0)
    e_edge, e_time, e_w = [], [], []
    prev = w0
    for k in range(1, n_steps):
        w = weights_at(ring_times[k])
        changed = np.flatnonzero(w != prev)
        e_edge.extend(changed.tolist())
        e_time.extend([k] * len(changed))
        e_w.extend(w[changed].tolist())
        prev = w
    return DynEnv(env.n, all_eu, all_ev, w0, max(n_steps, 0),
                  events=(e_edge, e_time, e_w), labels=env.labels, meta=env.meta)


def write_paths_csv(path, paths, env: DynEnv):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "T_k", "vertex", "moved"])
        for r, p in enumerate(paths):
            for t, x, m in zip(p.jump_times, p.positions, p.moved):
                w.writerow([r, repr(float(t)), env.label(int(x)), int(m)])
