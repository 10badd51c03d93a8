"""Evolving-set process: exact successor laws, sampling, conditioning, coupling.

Sets are frozensets of vertex *indices* of the environment; use
``env.indices_of`` / ``env.labels_of`` to convert from and to labels.

A state ``S`` at time ``t`` moves to ``{y : q_y >= U}`` with ``U`` uniform on
(0, 1) and ``q_y = pi^(t)(S, y) / pi^(t+1)(y)``.  Only vertices with
``pi^(t)(S, y) > 0`` are candidates; every other vertex has ``q_y = 0`` and
never joins.  The exact law therefore has one atom per distinct threshold.
"""
from __future__ import annotations

import bisect
import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .dyn_graph import TOL, DynEnv
from .errors import CapExceededError, InvalidStateError, NonMonotoneError

MAX_SET_DP_VERTICES = 14
MAX_JOINT_DP_VERTICES = 10


@dataclass(frozen=True)
class SetState:
    t: int
    members: frozenset
    mass: object

    @classmethod
    def of(cls, env: DynEnv, t, members) -> "SetState":
        """State from vertex indices, validating ``members ⊆ V_t``."""
        members = frozenset(int(i) for i in members)
        pi = env.pi(t)
        for i in members:
            if not pi[i] > 0:
                raise InvalidStateError(f"vertex {env.label(i)!r} not in V_{t}")
        return cls(t, members, set_mass(env, t, members))

    @classmethod
    def from_labels(cls, env: DynEnv, t, labels) -> "SetState":
        return cls.of(env, t, env.indices_of(labels))


def set_mass(env: DynEnv, t, members):
    pi = env.pi(t)
    return sum((pi[i] for i in members), env.zero)


def boundary_flow(env: DynEnv, t, members):
    """pi^(t)(S, S^c)."""
    adj = env.snapshot(t).adj
    return sum((w for x in members for y, w in adj[x] if y not in members), env.zero)


@dataclass(frozen=True)
class SuccessorLaw:
    """Exact law of S_{t+1} given S_t.

    ``q`` maps each candidate vertex to its threshold; ``thresholds`` are the
    sorted distinct values.  ``outcomes`` lists ``(probability, set)``: the set
    ``{y : q_y >= q_(k)}`` with probability ``q_(k) - q_(k-1)``, then the empty
    set with the leftover ``1 - q_(m)``.
    """

    t: int
    q: dict
    thresholds: tuple
    one: object = field(default=1.0, repr=False)

    @cached_property
    def outcomes(self) -> tuple:
        order = sorted(self.q, key=self.q.__getitem__, reverse=True)
        out = []
        prev = 0 * self.one
        pos = len(order)
        for th in self.thresholds:
            while pos > 0 and self.q[order[pos - 1]] < th:
                pos -= 1
            out.append((th - prev, frozenset(order[:pos])))
            prev = th
        if prev < self.one:
            out.append((self.one - prev, frozenset()))
        return tuple(out)

    def expected_mass(self, env: DynEnv):
        """sum_k p_k pi^(t+1)(B_k)."""
        return sum((p * set_mass(env, self.t + 1, b) for p, b in self.outcomes), 0 * self.one)


def successor_law(env: DynEnv, state: SetState) -> SuccessorLaw:
    t = state.t
    env.check_time(t + 1)
    one = env.one
    if not state.members:
        return SuccessorLaw(t, {}, (), one)
    adj = env.snapshot(t).adj
    pi_next = env.pi(t + 1)
    flow = defaultdict(lambda: env.zero)
    for x in state.members:
        for y, w in adj[x]:
            flow[y] += w
    q = {}
    for y, f in flow.items():
        denom = pi_next[y]
        if not denom > 0:
            raise NonMonotoneError(f"non-monotone vertex conductance at {env.label(y)!r}")
        qy = f / denom
        if qy > one:
            if env.exact or qy > 1 + TOL:
                raise NonMonotoneError(f"non-monotone vertex conductance at {env.label(y)!r}")
            qy = one
        q[y] = qy
    return SuccessorLaw(t, q, tuple(sorted(set(q.values()))), one)


def sample_step(law: SuccessorLaw, u) -> frozenset:
    """{y : q_y >= u}, the successor driven by the uniform deviate ``u``."""
    return frozenset(y for y, qy in law.q.items() if qy >= u)


def outcome_index(law: SuccessorLaw, u) -> int:
    """Index into ``law.outcomes`` of the atom selected by ``u`` (same rule as sample_step)."""
    return bisect.bisect_left(law.thresholds, u)


@dataclass(frozen=True)
class SetDistribution:
    t: int
    support: dict

    def total(self):
        return sum(self.support.values())

    def membership(self, n):
        """Vector of P(y in S_t) over vertex indices."""
        probs = [0 * next(iter(self.support.values()))] * n
        for s, p in self.support.items():
            for y in s:
                probs[y] += p
        return probs

    def to_json(self) -> dict:
        """Bitmask keys (bit i = vertex index i) to probabilities."""
        return {str(_mask(s)): _jsonable(p) for s, p in sorted(self.support.items(), key=lambda kv: _mask(kv[0]))}


def _mask(s):
    return sum(1 << i for i in s)


def _jsonable(p):
    return str(p) if not isinstance(p, float) else p


class _LawCache:
    def __init__(self, env):
        self.env = env
        self.laws = {}
        self.masses = {}

    def law(self, t, members):
        key = (t, members)
        law = self.laws.get(key)
        if law is None:
            law = successor_law(self.env, SetState(t, members, self.mass(t, members)))
            self.laws[key] = law
        return law

    def mass(self, t, members):
        key = (t, members)
        m = self.masses.get(key)
        if m is None:
            m = self.masses[key] = set_mass(self.env, t, members)
        return m


def _check_cap(env, cap):
    if env.n > cap:
        raise CapExceededError(f"{env.n} vertices exceeds the exact-enumeration cap {cap}")


def exact_set_distribution(env: DynEnv, start, t, cache=None) -> SetDistribution:
    """Exact law of S_t from S_0 = {start} (``start`` is a vertex label)."""
    _check_cap(env, MAX_SET_DP_VERTICES)
    env.check_time(t)
    cache = cache or _LawCache(env)
    x = env.index(start)
    if not env.support(0)[x]:
        raise InvalidStateError(f"{start!r} not in V_0")
    dist = {frozenset([x]): env.one}
    for u in range(t):
        nxt = defaultdict(lambda: env.zero)
        for s, p in dist.items():
            for pk, b in cache.law(u, s).outcomes:
                nxt[b] += p * pk
        dist = dict(nxt)
    return SetDistribution(t, dist)


@dataclass(frozen=True)
class SizeBiasedLaw:
    """Law of the conditioned (size-biased) evolving set one step ahead."""

    t: int
    outcomes: tuple

    def sample(self, u) -> frozenset:
        acc = 0.0
        for p, b in self.outcomes:
            acc += float(p)
            if u <= acc:
                return b
        return self.outcomes[-1][1]


def conditioned_kernel(env: DynEnv, state: SetState) -> SizeBiasedLaw:
    """K-hat(A -> B) = pi^(t+1)(B) / pi^(t)(A) * K(A -> B); the empty set drops out."""
    if not state.members or not state.mass > 0:
        raise InvalidStateError("conditioned kernel needs a nonempty state")
    law = successor_law(env, state)
    out = []
    for p, b in law.outcomes:
        if b:
            out.append((p * set_mass(env, state.t + 1, b) / state.mass, b))
    return SizeBiasedLaw(state.t, tuple(out))


def conditioned_set_distribution(env: DynEnv, start, t, cache=None) -> SetDistribution:
    """Exact law of the size-biased chain at time t from {start}."""
    _check_cap(env, MAX_SET_DP_VERTICES)
    cache = cache or _LawCache(env)
    x = env.index(start)
    dist = {frozenset([x]): env.one}
    for u in range(t):
        nxt = defaultdict(lambda: env.zero)
        for s, p in dist.items():
            m = cache.mass(u, s)
            for pk, b in cache.law(u, s).outcomes:
                if b:
                    nxt[b] += p * pk * cache.mass(u + 1, b) / m
        dist = dict(nxt)
    return SetDistribution(t, dist)


def _walk_row(env, t, x):
    snap = env.snapshot(t)
    return [(y, w / snap.pi[x]) for y, w in snap.adj[x]]


def df_coupled_step(env: DynEnv, x, state: SetState, rng=None, *, u_walk=None, u_set=None):
    """One step of the walk/evolving-set coupling from (x, A).

    The walk moves to y with probability P(t,x;t+1,y); then B is drawn from
    the successor law conditioned on y ∈ B, i.e. driven by U uniform on
    (0, q_y].  ``x`` is a vertex index; returns ``(y, B)``.
    """
    if x not in state.members:
        raise InvalidStateError("walk position must lie in the current set")
    if u_walk is None:
        u_walk = rng.random()
    if u_set is None:
        u_set = 1.0 - rng.random()  # (0, 1]
    row = _walk_row(env, state.t, x)
    acc = 0.0
    y = row[-1][0]
    for cand, p in row:
        acc += float(p)
        if u_walk < acc:
            y = cand
            break
    law = successor_law(env, state)
    b = sample_step(law, u_set * law.q[y])
    return y, b


def joint_exact_distribution(env: DynEnv, start, t, cache=None) -> dict:
    """Exact law of (X_t, S_t) under the coupling, keyed by (vertex index, frozenset)."""
    _check_cap(env, MAX_JOINT_DP_VERTICES)
    env.check_time(t)
    cache = cache or _LawCache(env)
    x0 = env.index(start)
    dist = {(x0, frozenset([x0])): env.one}
    for u in range(t):
        nxt = defaultdict(lambda: env.zero)
        for (x, s), p in dist.items():
            law = cache.law(u, s)
            for y, pxy in _walk_row(env, u, x):
                qy = law.q[y]
                for pk, b in law.outcomes:
                    if y in b:
                        nxt[(y, b)] += p * pxy * pk / qy
        dist = dict(nxt)
    return dist


def joint_path_distribution(env: DynEnv, start, t, cache=None) -> dict:
    """Coupled law over set trajectories: ``{(S_0..S_t): {x: P(X_t = x, trajectory)}}``."""
    _check_cap(env, MAX_JOINT_DP_VERTICES)
    cache = cache or _LawCache(env)
    x0 = env.index(start)
    paths = {(frozenset([x0]),): {x0: env.one}}
    for u in range(t):
        nxt = defaultdict(lambda: defaultdict(lambda: env.zero))
        for traj, xs in paths.items():
            s = traj[-1]
            law = cache.law(u, s)
            for x, p in xs.items():
                for y, pxy in _walk_row(env, u, x):
                    qy = law.q[y]
                    for pk, b in law.outcomes:
                        if y in b:
                            nxt[traj + (b,)][y] += p * pxy * pk / qy
        paths = {k: dict(v) for k, v in nxt.items()}
    return paths


@dataclass(frozen=True)
class DriftResult:
    lhs: float
    rhs: float
    passed: bool


def drift_check(env: DynEnv, state: SetState, alpha, gamma, tol=TOL) -> DriftResult:
    """Exact one-step drift of pi(S)^alpha against the explicit laziness bound.

    lhs = E[Gamma^alpha | S] with Gamma = pi^(t+1)(S_{t+1}) / pi^(t)(S_t) and
    R = pi^(t)(S, S^c) / pi^(t)(S).  For alpha in (0,1) the bound is
    lhs <= 1 - 2 a(1-a) g^2/(1-g)^2 R^2; for alpha > 1 it is
    lhs >= 1 + a(a-1) g^2 / (2(1-g)^2) R^2.
    """
    if alpha == 1:
        raise ValueError("alpha=1 vacuous: both drift inequalities are trivial")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0 < gamma <= 0.5:
        raise ValueError("gamma must lie in (0, 1/2]")
    if not state.members:
        raise InvalidStateError("drift_check needs a nonempty state")
    law = successor_law(env, state)
    m0 = float(state.mass)
    lhs = math.fsum(float(p) * (float(set_mass(env, state.t + 1, b)) / m0) ** alpha
                    for p, b in law.outcomes)
    r = float(boundary_flow(env, state.t, state.members)) / m0
    g = gamma ** 2 / (1 - gamma) ** 2
    if alpha < 1:
        rhs = 1 - 2 * alpha * (1 - alpha) * g * r * r
        passed = lhs <= rhs + tol
    else:
        rhs = 1 + alpha * (alpha - 1) * g / 2 * r * r
        passed = lhs >= rhs - tol
    return DriftResult(lhs, rhs, passed)


def _constant_pi(env: DynEnv) -> bool:
    p0 = env.pi(0)
    for k in env.epochs_within(0, env.horizon):
        pk = env._epoch_snapshot(k).pi
        if any(a != b for a, b in zip(p0.tolist(), pk.tolist())):
            return False
    return True


def complement_dual_error(env: DynEnv, members, t=0):
    """max |K(A -> B) - K(A^c -> B^c)| over all B, complements taken in V_t."""
    if not _constant_pi(env):
        raise NonMonotoneError("complement duality needs time-constant vertex conductances")
    full = frozenset(np.flatnonzero(env.support(t)).tolist())
    a = frozenset(members)
    law_a = _law_dict(successor_law(env, SetState.of(env, t, a)))
    law_c = _law_dict(successor_law(env, SetState.of(env, t, full - a)))
    mapped = defaultdict(lambda: env.zero)
    for b, p in law_a.items():
        mapped[full - b] += p
    keys = set(mapped) | set(law_c)
    return max(abs(mapped.get(k, env.zero) - law_c.get(k, env.zero)) for k in keys)


def complement_dual_check(env: DynEnv, members, t=0, tol=TOL) -> bool:
    err = complement_dual_error(env, members, t)
    return err == 0 if env.exact else err <= tol


def _law_dict(law: SuccessorLaw) -> dict:
    out = defaultdict(lambda: 0 * law.one)
    for p, b in law.outcomes:
        out[b] += p
    return dict(out)


# -- Monte Carlo driver ------------------------------------------------------------

def simulate_evolving_set(env: DynEnv, start, steps, rng, coupled=False):
    """Sample one trajectory; rows ``(t, |S_t|, pi^(t)(S_t), X_t or None)``.

    Uses the same :func:`sample_step` as the exact laws.  With ``coupled`` the
    walk/set pair follows :func:`df_coupled_step` (the set then never dies).
    """
    x = env.index(start)
    state = SetState.of(env, 0, [x])
    rows = [(0, 1, float(state.mass), env.label(x) if coupled else None)]
    for t in range(steps):
        if coupled:
            x, members = df_coupled_step(env, x, state, rng)
        else:
            members = sample_step(successor_law(env, state), 1.0 - rng.random())
        state = SetState(t + 1, members, set_mass(env, t + 1, members))
        rows.append((t + 1, len(members), float(state.mass), env.label(x) if coupled else None))
    return rows


def write_trajectories_csv(path, trajectories):
    """``trajectories`` is a list of row lists from :func:`simulate_evolving_set`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "t", "size", "mass", "x"])
        for r, rows in enumerate(trajectories):
            for t, size, mass, x in rows:
                w.writerow([r, t, size, repr(mass), "" if x is None else x])
