"""Isoperimetric constants kappa_u, growth functions psi, and the interior-r condition.

kappa_u = inf_A pi^(u)(A, A^c) / pi^(u)(A)^((d-1)/d).  On a finite graph the
infimum over all of V_u is zero (take A = V_u), so the enumerative modes use
a surrogate family:

* ``exact``        every nonempty proper subset of V_u;
* ``half-volume``  those with pi^(u)(A) <= pi^(u)(V_u) / 2;
* ``lattice-analytic``  closed-form lower bound for boxes of Z^D
  (``zd_box`` environments), valid for any finite A inside the box when
  edges to the wired exterior count as boundary.

``measure="counting"`` replaces pi^(u)(A) in the denominator (and in the
half-volume constraint) by |A|.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .dyn_graph import DynEnv, monotonicity_report
from .errors import CapExceededError, ConfigError

log = logging.getLogger(__name__)

MAX_ENUM_VERTICES = 20
MODES = ("exact", "half-volume", "lattice-analytic")
MEASURES = ("conductance", "counting")
_HALF_SLACK = 1e-9


@dataclass(frozen=True)
class IsoConfig:
    d: float
    mode: str = "half-volume"
    lam: float = 1 / 3
    measure: str = "conductance"

    def __post_init__(self):
        if not self.d > 1:
            raise ConfigError("iso.d", "isoperimetric dimension must exceed 1")
        if self.mode not in MODES:
            raise ConfigError("iso.mode", f"must be one of {MODES}")
        if not 0 < self.lam <= 0.5:
            raise ConfigError("iso.lam", "must lie in (0, 1/2]")
        if self.measure not in MEASURES:
            raise ConfigError("iso.measure", f"must be one of {MEASURES}")


def _restricted(env: DynEnv, t):
    """Dense float weights and masses restricted to V_t (plus the index map)."""
    snap = env.snapshot(t)
    idx = np.flatnonzero(snap.support)
    if len(idx) > MAX_ENUM_VERTICES:
        raise CapExceededError(f"|V_t| = {len(idx)} exceeds the enumeration cap {MAX_ENUM_VERTICES}")
    w = np.asarray(snap.dense, dtype=float)[np.ix_(idx, idx)]
    pi = np.asarray(snap.pi, dtype=float)[idx]
    return w, pi, idx


def _ratio(cut, mass, d):
    return cut / mass ** ((d - 1) / d)


def kappa_gray(w, pi, d, half_volume, counting=False):
    """Minimum ratio by Gray-code subset iteration with O(degree) updates.

    Returns ``(kappa, members)``; the value is recomputed from scratch on the
    minimising set so accumulated rounding never leaks into the result.
    """
    n = len(pi)
    if n <= 1:
        return 0.0, tuple(range(n))
    mass_of = np.ones(n) if counting else pi
    total = float(mass_of.sum())
    limit = total / 2 * (1 + _HALF_SLACK) if half_volume else math.inf
    nbrs = [[(j, float(w[i, j])) for j in range(n) if j != i and w[i, j] > 0] for i in range(n)]
    off = [float(pi[i] - w[i, i]) for i in range(n)]
    mass_list = [float(m) for m in mass_of]
    w_in = [0.0] * n  # w(v, A \ {v})
    in_a = [False] * n
    cut = mass = 0.0
    size = 0
    best, best_code = math.inf, None
    code = 0
    for i in range(1, 1 << n):
        v = (i & -i).bit_length() - 1
        code ^= 1 << v
        if in_a[v]:
            in_a[v] = False
            size -= 1
            cut -= off[v] - 2 * w_in[v]
            mass -= mass_list[v]
            for u, x in nbrs[v]:
                w_in[u] -= x
        else:
            in_a[v] = True
            size += 1
            cut += off[v] - 2 * w_in[v]
            mass += mass_list[v]
            for u, x in nbrs[v]:
                w_in[u] += x
        if size == n or mass > limit:
            continue
        r = _ratio(max(cut, 0.0), mass, d)
        if r < best:
            best, best_code = r, code
    if best_code is None:
        return math.inf, ()
    members = tuple(i for i in range(n) if best_code >> i & 1)
    return _direct_ratio(w, mass_of, members, d), members


def _direct_ratio(w, mass_of, members, d):
    inside = np.zeros(len(mass_of), dtype=bool)
    inside[list(members)] = True
    cut = float(w[np.ix_(inside, ~inside)].sum())
    return _ratio(cut, float(mass_of[inside].sum()), d)


def kappa_bruteforce(w, pi, d, half_volume, counting=False):
    """Independent enumerator: combinations by size, cut from dense sub-blocks."""
    n = len(pi)
    if n <= 1:
        return 0.0
    mass_of = np.ones(n) if counting else np.asarray(pi, dtype=float)
    total = float(mass_of.sum())
    best = math.inf
    for k in range(1, n):
        for combo in itertools.combinations(range(n), k):
            inside = np.zeros(n, dtype=bool)
            inside[list(combo)] = True
            mass = float(mass_of[inside].sum())
            if half_volume and mass > total / 2 * (1 + _HALF_SLACK):
                continue
            cut = float(w[inside][:, ~inside].sum())
            best = min(best, _ratio(cut, mass, d))
    return best


def lattice_kappa_bound(env: DynEnv, t, d):
    """w_min * 2D * pi_max^(-(d-1)/d) for a ``zd_box`` environment.

    Every finite A in Z^D has at least 2D |A|^((D-1)/D) >= 2D |A|^((d-1)/d)
    boundary bonds (d <= D), each of conductance >= w_min, while
    pi(A) <= pi_max |A|.  With bond weights in [1/C1, C1] and pi_max = 2D C1
    this is C1^-1 * 2D * (2D C1)^(-(d-1)/d).
    """
    lat = env.meta.get("lattice")
    if lat is None:
        raise ConfigError("iso.mode", "lattice-analytic mode needs a zd_box environment")
    dim = lat["d"]
    if d > dim:
        raise ConfigError("iso.d", f"lattice bound holds only for d <= lattice dimension {dim}")
    snap = env.snapshot(t)
    mult = env.meta["multiplicity"]
    bonds = mult > 0
    w = np.asarray(snap.weights, dtype=float)
    w_min = float((w[bonds] / mult[bonds]).min())
    n_box = env.meta["n_box"]
    pi_max = float(np.asarray(snap.pi, dtype=float)[:n_box].max())
    return w_min * 2 * dim * pi_max ** (-(d - 1) / d)


_KAPPA_CACHE: dict = {}


def kappa(env: DynEnv, t, cfg: IsoConfig) -> float:
    env.check_time(t)
    key = (id(env), env.epoch(t), cfg)
    hit = _KAPPA_CACHE.get(key)
    if hit is not None and hit[0] is env:
        return hit[1]
    if cfg.mode == "lattice-analytic":
        value = lattice_kappa_bound(env, t, cfg.d)
    else:
        w, pi, _ = _restricted(env, t)
        value, _ = kappa_gray(w, pi, cfg.d, cfg.mode == "half-volume", cfg.measure == "counting")
    if len(_KAPPA_CACHE) > 4096:
        _KAPPA_CACHE.clear()
    _KAPPA_CACHE[key] = (env, value)
    return value


def singleton_bound(env: DynEnv, t, d) -> float:
    """min over v in V_t of pi^(t)(v)^(1/d), an upper bound for kappa_t."""
    snap = env.snapshot(t)
    pi = np.asarray(snap.pi, dtype=float)[snap.support]
    return float(pi.min() ** (1 / d))


def psi_series(env: DynEnv, t_end, cfg: IsoConfig, with_beta=False) -> list:
    """[psi(0), psi(1), ..., psi(t_end)] with psi(t) = sum_{u<t} (beta(u)^(1/d) kappa_u)^2."""
    beta = monotonicity_report(env).beta if with_beta else None
    out = [0.0]
    for u in range(t_end):
        k = kappa(env, u, cfg)
        b = float(beta[u]) ** (1 / cfg.d) if with_beta else 1.0
        out.append(out[-1] + (b * k) ** 2)
    return out


def psi(env: DynEnv, t, cfg: IsoConfig, with_beta=False) -> float:
    env.check_time(t)
    return psi_series(env, t, cfg, with_beta)[t]


def r_condition(env: DynEnv, s, t, cfg: IsoConfig):
    """Smallest integer r in (s, t) whose psi_{d,beta} ratio lies in [lam, 1 - lam], else None."""
    if not s < t:
        raise ValueError("need s < t")
    series = psi_series(env, t, cfg, with_beta=True)
    span = series[t] - series[s]
    if not span > 0:
        log.warning("zero isoperimetric growth on [%s, %s]", s, t)
        return None
    for r in range(s + 1, t):
        ratio = (series[r] - series[s]) / span
        if cfg.lam <= ratio <= 1 - cfg.lam:
            return r
    return None


def kappa_table(env: DynEnv, t_end, cfg: IsoConfig):
    """Rows ``(t, kappa, psi, psi_beta, mode)`` for t = 0..t_end."""
    plain = psi_series(env, t_end, cfg)
    weighted = psi_series(env, t_end, cfg, with_beta=True)
    return [(t, kappa(env, min(t, env.horizon), cfg), plain[t], weighted[t], cfg.mode)
            for t in range(t_end + 1)]


def write_kappa_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kappa", "psi", "psi_beta", "mode"])
        for t, k, p, pb, mode in rows:
            w.writerow([t, repr(k), repr(p), repr(pb), mode])
