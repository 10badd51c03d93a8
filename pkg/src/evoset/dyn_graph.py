"""Finite graphs carrying piecewise-constant, time-varying edge conductances.

A :class:`DynEnv` stores every unordered vertex pair (self-loops included) at
most once, with a base weight and a time-sorted list of change events. The
conductances in force at time ``t`` are those of the last change at or before
``t`` (right-continuous), so the same class serves integer-time and real-time
schedules. Weights are either floats or :class:`fractions.Fraction` (exact
mode); every derived quantity keeps the arithmetic type of the weights.
"""
from __future__ import annotations

import bisect
import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import HorizonError, InvalidStateError, NonMonotoneError, UnknownVertexError

TOL = 1e-12

_SNAPSHOT_CACHE = 512


class _ListLabels:
    """Vertex labels backed by a list plus a reverse dict."""

    def __init__(self, labels):
        self._labels = list(labels)
        self._index = {lab: i for i, lab in enumerate(self._labels)}
        if len(self._index) != len(self._labels):
            raise ValueError("duplicate vertex labels")

    def __len__(self):
        return len(self._labels)

    def __getitem__(self, i):
        return self._labels[i]

    def __iter__(self):
        return iter(self._labels)

    def index(self, label):
        try:
            return self._index[label]
        except (KeyError, TypeError):
            raise UnknownVertexError(label) from None


class _RangeLabels:
    def __init__(self, n):
        self.n = n

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return int(i)

    def __iter__(self):
        return iter(range(self.n))

    def index(self, label):
        if isinstance(label, (int, np.integer)) and 0 <= label < self.n:
            return int(label)
        raise UnknownVertexError(label)


class Snapshot:
    """Conductances frozen over one schedule epoch."""

    def __init__(self, env: "DynEnv", weights: np.ndarray):
        self.env = env
        self.weights = weights
        self.pi = env._vertex_sums(weights)

    @cached_property
    def support(self) -> np.ndarray:
        return np.array([p > 0 for p in self.pi], dtype=bool) if self.pi.dtype == object else self.pi > 0

    @cached_property
    def adj(self) -> list:
        """Per-vertex list of ``(neighbour, weight)`` over positive-weight edges (loops once)."""
        env = self.env
        adj = [[] for _ in range(env.n)]
        for u, v, w in zip(env.eu.tolist(), env.ev.tolist(), self.weights.tolist()):
            if not w > 0:
                continue
            adj[u].append((v, w))
            if u != v:
                adj[v].append((u, w))
        return adj

    @cached_property
    def loops(self) -> np.ndarray:
        env = self.env
        mask = env.eu == env.ev
        if self.weights.dtype == object:
            out = np.array([Fraction(0)] * env.n, dtype=object)
        else:
            out = np.zeros(env.n)
        out[env.eu[mask]] = self.weights[mask]
        return out

    @cached_property
    def csr(self) -> sp.csr_matrix:
        env = self.env
        w = self.weights.astype(float)
        off = env.eu != env.ev
        rows = np.concatenate([env.eu, env.ev[off]])
        cols = np.concatenate([env.ev, env.eu[off]])
        vals = np.concatenate([w, w[off]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(env.n, env.n))

    @cached_property
    def dense(self) -> np.ndarray:
        env = self.env
        if self.weights.dtype != object:
            return self.csr.toarray()
        mat = np.empty((env.n, env.n), dtype=object)
        mat.fill(Fraction(0))
        for u, v, w in zip(env.eu.tolist(), env.ev.tolist(), self.weights.tolist()):
            mat[u, v] = w
            mat[v, u] = w
        return mat


class DynEnv:
    """Immutable finite graph with a piecewise-constant conductance schedule.

    Parameters
    ----------
    n : number of vertices.
    eu, ev : edge endpoint indices (self-loops have ``eu == ev``).
    w0 : base weight of each edge (float array, or object array of Fractions).
    horizon : last time index experiments may query.
    events : optional ``(edge, time, weight)`` arrays; at most one event per
        edge and time.
    labels : optional vertex labels (list, or an object with ``index``).
    meta : free-form metadata (e.g. lattice geometry).
    """

    def __init__(self, n, eu, ev, w0, horizon, events=None, labels=None, meta=None):
        eu = np.asarray(eu, dtype=np.int64)
        ev = np.asarray(ev, dtype=np.int64)
        if eu.shape != ev.shape or eu.ndim != 1:
            raise ValueError("edge endpoint arrays must be 1-d and equal length")
        if n <= 0:
            raise ValueError("graph needs at least one vertex")
        if len(eu) and (min(eu.min(), ev.min()) < 0 or max(eu.max(), ev.max()) >= n):
            raise UnknownVertexError("edge endpoint out of range")
        lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
        codes = lo * n + hi
        if len(np.unique(codes)) != len(codes):
            raise ValueError("duplicate edge: conductances are stored once per unordered pair")
        self.n = int(n)
        self.eu, self.ev = lo, hi
        self.exact = _is_exact(w0) or (events is not None and _is_exact(events[2]))
        self.w0 = _as_weights(w0, self.exact)
        if len(self.w0) != len(eu):
            raise ValueError("one base weight per edge required")
        if events is None:
            events = (np.zeros(0, np.int64), np.zeros(0), np.zeros(0))
        e_edge = np.asarray(events[0], dtype=np.int64)
        e_time = np.asarray(events[1], dtype=float)
        e_w = _as_weights(events[2], self.exact)
        if not (len(e_edge) == len(e_time) == len(e_w)):
            raise ValueError("event arrays must have equal length")
        if len(e_edge) and (e_edge.min() < 0 or e_edge.max() >= len(eu)):
            raise ValueError("event refers to unknown edge")
        if len(e_time) and e_time.min() < 0:
            raise ValueError("change times must be >= 0")
        if len(e_edge) and np.unique(np.stack([e_edge, e_time]), axis=1).shape[1] != len(e_edge):
            raise ValueError("at most one change event per edge and time")
        _check_nonnegative(self.w0)
        _check_nonnegative(e_w)
        order = np.lexsort((e_edge, e_time))
        self.e_edge, self.e_time, self.e_w = e_edge[order], e_time[order], e_w[order]
        self.change_times = np.unique(self.e_time)
        # number of events applied in epoch k is _event_end[k]
        self._event_end = np.searchsorted(self.e_time, self.change_times, side="right")
        self.horizon = horizon
        if labels is None:
            self.labels = _RangeLabels(self.n)
        elif hasattr(labels, "index") and not isinstance(labels, (list, tuple)):
            self.labels = labels
        else:
            self.labels = _ListLabels(labels)
        if len(self.labels) != self.n:
            raise ValueError("label count does not match vertex count")
        self.meta = dict(meta or {})
        self._snapshots: OrderedDict = OrderedDict()
        self._check_supports()

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_edges(cls, vertices, edges, horizon, meta=None):
        """Build from labelled edges ``(u, v, w)`` or ``(u, v, w, [(t, w_t), ...])``."""
        labels = _ListLabels(vertices)
        eu, ev, w0, ee, et, ew = [], [], [], [], [], []
        for k, edge in enumerate(edges):
            u, v, w = edge[0], edge[1], edge[2]
            eu.append(labels.index(u))
            ev.append(labels.index(v))
            w0.append(w)
            for t, wt in (edge[3] if len(edge) > 3 else ()):
                ee.append(k)
                et.append(t)
                ew.append(wt)
        exact = _is_exact(w0) or _is_exact(ew)
        return cls(
            len(labels), eu, ev, _as_weights(w0, exact), horizon,
            events=(ee, et, _as_weights(ew, exact)), labels=labels, meta=meta,
        )

    def _check_supports(self):
        # V_t must be nonempty for every epoch reaching into [0, horizon]
        w = self.w0.copy()
        total = sum(w.tolist()) if self.exact else float(w.sum())
        if not total > 0:
            raise ValueError("V_t is empty at t=0")
        start = 0
        for k, end in enumerate(self._event_end):
            if self.change_times[k] > self.horizon:
                break
            idx = self.e_edge[start:end]
            new = self.e_w[start:end]
            if self.exact:
                total += sum((new - w[idx]).tolist())
            else:
                total += float((new - w[idx]).sum())
            w[idx] = new
            start = end
            if not total > 0:
                raise ValueError(f"V_t is empty at t={self.change_times[k]}")

    # -- vertex access ------------------------------------------------------------
    def index(self, label) -> int:
        return self.labels.index(label)

    def label(self, i):
        return self.labels[i]

    def labels_of(self, indices):
        return frozenset(self.labels[i] for i in indices)

    def indices_of(self, labels):
        return frozenset(self.index(x) for x in labels)

    @property
    def zero(self):
        return Fraction(0) if self.exact else 0.0

    @property
    def one(self):
        return Fraction(1) if self.exact else 1.0

    # -- time access -----------------------------------------------------------
    def check_time(self, t):
        if t < 0 or t > self.horizon:
            raise HorizonError(f"time {t} outside [0, {self.horizon}]")

    def epoch(self, t) -> int:
        return bisect.bisect_right(self.change_times, t)

    def epoch_start(self, k):
        return 0 if k == 0 else self.change_times[k - 1]

    def snapshot(self, t) -> Snapshot:
        self.check_time(t)
        return self._epoch_snapshot(self.epoch(t))

    def _epoch_snapshot(self, k) -> Snapshot:
        snap = self._snapshots.get(k)
        if snap is not None:
            self._snapshots.move_to_end(k)
            return snap
        w = self.w0.copy()
        end = 0 if k == 0 else self._event_end[k - 1]
        if end:
            edges = self.e_edge[:end][::-1]
            vals = self.e_w[:end][::-1]
            uniq, first = np.unique(edges, return_index=True)
            w[uniq] = vals[first]
        snap = Snapshot(self, w)
        self._snapshots[k] = snap
        if len(self._snapshots) > _SNAPSHOT_CACHE:
            self._snapshots.popitem(last=False)
        return snap

    def epochs_within(self, t0, t1):
        """Epoch indices whose time interval meets ``[t0, t1]``."""
        return range(self.epoch(t0), self.epoch(t1) + 1)

    def weights(self, t):
        return self.snapshot(t).weights

    def pi(self, t) -> np.ndarray:
        """Vertex conductances at time ``t``."""
        return self.snapshot(t).pi

    def support(self, t) -> np.ndarray:
        return self.snapshot(t).support

    # -- internals -------------------------------------------------------------
    def _vertex_sums(self, w):
        off = self.eu != self.ev
        if w.dtype == object:
            out = [Fraction(0)] * self.n
            for u, v, x in zip(self.eu.tolist(), self.ev.tolist(), w.tolist()):
                out[u] += x
                if u != v:
                    out[v] += x
            return np.array(out, dtype=object)
        return np.bincount(self.eu, weights=w, minlength=self.n) + np.bincount(
            self.ev[off], weights=w[off], minlength=self.n
        )

    def digest(self) -> str:
        """Stable content hash of graph, schedule and horizon."""
        h = hashlib.sha256()
        h.update(f"{self.n}|{self.horizon}|{self.exact}|".encode())
        for arr in (self.eu, self.ev, self.e_edge, self.e_time):
            h.update(np.ascontiguousarray(arr).tobytes())
        for arr in (self.w0, self.e_w):
            h.update(repr(arr.tolist()).encode() if arr.dtype == object else arr.tobytes())
        return h.hexdigest()[:16]

    def as_float(self) -> "DynEnv":
        if not self.exact:
            return self
        return DynEnv(
            self.n, self.eu, self.ev, self.w0.astype(float), self.horizon,
            events=(self.e_edge, self.e_time, self.e_w.astype(float)),
            labels=self.labels, meta=self.meta,
        )

    def as_exact(self) -> "DynEnv":
        """Exact-rational copy (floats converted by their exact binary value)."""
        if self.exact:
            return self
        conv = lambda a: np.array([Fraction(float(x)) for x in a], dtype=object)  # noqa: E731
        return DynEnv(
            self.n, self.eu, self.ev, conv(self.w0), self.horizon,
            events=(self.e_edge, self.e_time, conv(self.e_w)),
            labels=self.labels, meta=self.meta,
        )

    def with_horizon(self, horizon) -> "DynEnv":
        return DynEnv(
            self.n, self.eu, self.ev, self.w0, horizon,
            events=(self.e_edge, self.e_time, self.e_w), labels=self.labels, meta=self.meta,
        )

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return (f"DynEnv(n={self.n}, edges={len(self.eu)}, changes={len(self.change_times)}, "
                f"horizon={self.horizon}, {mode})")


def _is_exact(values) -> bool:
    if isinstance(values, np.ndarray):
        return values.dtype == object and any(isinstance(v, Fraction) for v in values)
    return any(isinstance(v, Fraction) for v in values)


def _as_weights(values, exact: bool) -> np.ndarray:
    if exact:
        return np.array([v if isinstance(v, Fraction) else Fraction(v) for v in values], dtype=object)
    return np.asarray(values, dtype=float).reshape(-1)


def _check_nonnegative(w):
    if len(w) and any(x < 0 for x in (w.tolist() if w.dtype == object else [w.min()])):
        raise ValueError("conductances must be nonnegative")


# -- per-time quantities ---------------------------------------------------------

def vertex_conductance(env: DynEnv, t, x):
    """pi^(t)(x): sum of incident conductances, a self-loop counted once."""
    return env.pi(t)[env.index(x)]


def transition_prob(env: DynEnv, t, x, y):
    i, j = env.index(x), env.index(y)
    snap = env.snapshot(t)
    if not snap.pi[i] > 0:
        raise InvalidStateError(f"vertex {x!r} not in V_{t}")
    w = snap.dense[i, j] if env.n <= 2000 else snap.csr[i, j]
    return w / snap.pi[i]


def transition_matrix(env: DynEnv, t) -> np.ndarray:
    """Dense one-step kernel; rows of vertices outside V_t are zero."""
    snap = env.snapshot(t)
    mat = snap.dense.copy()
    for i in range(env.n):
        if snap.pi[i] > 0:
            mat[i] = mat[i] / snap.pi[i]
    return mat


def laziness_coefficient(env: DynEnv):
    """inf over t <= horizon and x in V_t of the stay probability P(t,x;t+1,x)."""
    best = None
    for k in env.epochs_within(0, env.horizon):
        snap = env._epoch_snapshot(k)
        mask = snap.support
        ratios = snap.loops[mask] / snap.pi[mask]
        m = min(ratios.tolist())
        best = m if best is None else min(best, m)
    return best


@dataclass(frozen=True)
class MonotonicityReport:
    beta: tuple
    eta_star: float
    is_nondecreasing: bool
    is_effectively_nondecreasing: bool


def monotonicity_report(env: DynEnv) -> MonotonicityReport:
    """Compensating factors beta(0..T) for decreases of vertex conductance.

    beta(0) = 1 and beta(u+1) = beta(u) * max_{x in V_u} pi^(u)(x) / pi^(u+1)(x).
    The max runs over every vertex of the finite graph, boundary included.
    """
    horizon = env.horizon
    if int(horizon) != horizon:
        raise HorizonError("monotonicity_report needs an integer horizon")
    horizon = int(horizon)
    beta = [env.one]
    nondecreasing = True
    for u in range(horizon):
        k0, k1 = env.epoch(u), env.epoch(u + 1)
        if k0 == k1:
            beta.append(beta[-1])
            continue
        p0 = env._epoch_snapshot(k0).pi
        p1 = env._epoch_snapshot(k1).pi
        ratio = None
        for a, b in zip(p0.tolist(), p1.tolist()):
            if b < a:
                nondecreasing = False
            if not a > 0:
                continue
            if not b > 0:
                raise NonMonotoneError(f"vertex left the support between t={u} and t={u + 1}")
            r = a / b
            ratio = r if ratio is None or r > ratio else ratio
        beta.append(beta[-1] * ratio)
    # sup over u < t of beta(t)/beta(u); an empty sup (horizon 0) is taken as 1
    eta = max((b / m for b, m in _running_min_pairs(beta)), default=env.one)
    eta_f = float(eta)
    return MonotonicityReport(
        beta=tuple(beta),
        eta_star=eta_f,
        is_nondecreasing=nondecreasing,
        is_effectively_nondecreasing=bool(np.isfinite(eta_f)),
    )


def _running_min_pairs(beta):
    # yields (beta(t), min_{u<t} beta(u)) for t >= 1
    running = beta[0]
    for b in beta[1:]:
        yield b, running
        running = min(running, b)
