"""Environment builders: hand graphs, lattice boxes, delayed walks, documents."""
from __future__ import annotations

import itertools
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dyn_graph import DynEnv
from .errors import ConfigError

EXTERIOR = "ext"


def e2(scale_at_1=None, horizon=4, exact=False) -> DynEnv:
    """Two vertices a, b: unit edge, unit self-loops.

    ``scale_at_1`` multiplies every conductance from t=1 on (2 doubles, 1/2 halves).
    """
    one = Fraction(1) if exact else 1.0
    changes = [] if scale_at_1 is None else [(1, one * scale_at_1)]
    edges = [("a", "b", one, changes), ("a", "a", one, changes), ("b", "b", one, changes)]
    return DynEnv.from_edges(["a", "b"], edges, horizon)


def e3(horizon=4, exact=False) -> DynEnv:
    """Path a - b - c, 1/2-lazy, with the a-b edge (and loops) doubled at t=2."""
    one = Fraction(1) if exact else 1.0
    edges = [
        ("a", "b", one, [(2, 2 * one)]),
        ("b", "c", one),
        ("a", "a", one, [(2, 2 * one)]),
        ("b", "b", 2 * one, [(2, 3 * one)]),
        ("c", "c", one),
    ]
    return DynEnv.from_edges(["a", "b", "c"], edges, horizon)


def delayed_walk_env(vertices, edges, horizon) -> DynEnv:
    """Delayed walk: off-diagonal schedule given, self-loops fill vertex mass to 1.

    ``edges`` are ``(u, v, w)`` or ``(u, v, w, changes)`` with ``u != v``.  Each
    vertex gets a loop of weight ``1 - pi(x, {x}^c)`` tracking every change of
    its incident edges, so ``pi^(t)(x) = 1`` throughout.
    """
    base = {}
    sched = {}
    for e in edges:
        u, v = e[0], e[1]
        if u == v:
            raise ValueError("delayed walk takes off-diagonal weights only")
        key = (u, v)
        base[key] = e[2]
        sched[key] = sorted(e[3]) if len(e) > 3 else []
    out = [tuple(e) if len(e) > 3 else (e[0], e[1], e[2], []) for e in edges]
    for x in vertices:
        inc = [k for k in base if x in k]
        times = sorted({t for k in inc for t, _ in sched[k]})

        def off_at(t, inc=inc):
            total = 0
            for k in inc:
                w = base[k]
                for tc, wc in sched[k]:
                    if tc <= t:
                        w = wc
                total += w
            return total

        w0 = 1 - off_at(0)
        changes = [(t, 1 - off_at(t)) for t in times if t > 0]
        for t, w in [(0, w0)] + changes:
            if w < 0:
                raise ValueError(f"off-diagonal mass exceeds 1 at vertex {x!r}, t={t}")
        out.append((x, x, w0, changes))
    return DynEnv.from_edges(list(vertices), out, horizon)


def _box_sites(d, side):
    return list(itertools.product(range(side), repeat=d))


def zd_box(d, side, horizon=0, boundary="free", weight=1.0, loops="lazy", rng=None,
           elliptic=None, increase_prob=1.0) -> DynEnv:
    """Nearest-neighbour box ``{0..side-1}^d``.

    boundary : "free" drops edges leaving the box; "wired" joins every boundary
        site to a single exterior vertex ``EXTERIOR`` with conductance equal to
        the summed weight of its missing lattice edges.
    weight : constant base weight of every lattice edge (ignored if ``elliptic``).
    loops : "lazy" sizes each self-loop to the off-diagonal mass (stay prob 1/2
        at all times); a number gives constant loops; None gives no loops.
    elliptic : ``(c_lo, c_hi)`` draws base weights uniformly in ``[c_lo, (c_lo+c_hi)/2]``
        and, with probability ``increase_prob``, one increase at a uniform
        time in ``(0, horizon]`` to a uniform value in ``[w, c_hi]``.  Integer
        horizons draw integer times.  Needs ``rng``.
    """
    if boundary not in ("free", "wired"):
        raise ConfigError("boundary", "must be 'free' or 'wired'")
    sites = _box_sites(d, side)
    index = {s: i for i, s in enumerate(sites)}
    pairs = []
    missing = np.zeros(len(sites), dtype=int)
    for s in sites:
        for axis in range(d):
            for step in (-1, 1):
                nb = list(s)
                nb[axis] += step
                nb = tuple(nb)
                if nb in index:
                    if step == 1:
                        pairs.append((index[s], index[nb]))
                else:
                    missing[index[s]] += 1
    n_box = len(sites)
    labels = list(sites)
    wired = boundary == "wired" and missing.any()
    if wired:
        labels.append(EXTERIOR)
        ext = n_box
        for i in np.flatnonzero(missing):
            pairs.append((int(i), ext))
    n = len(labels)
    eu = np.array([p[0] for p in pairs], dtype=np.int64)
    ev = np.array([p[1] for p in pairs], dtype=np.int64)
    mult = np.ones(len(pairs))
    if wired:
        mult[ev == n_box] = missing[eu[ev == n_box]]

    e_edge, e_time, e_w = [], [], []
    if elliptic is not None:
        if rng is None:
            raise ValueError("elliptic weights need an rng")
        lo, hi = elliptic
        # every lattice bond (including each missing bond to the exterior) is drawn independently
        base_unit = rng.uniform(lo, (lo + hi) / 2, size=len(pairs))
        w0 = base_unit * mult
        up = rng.random(len(pairs)) < increase_prob
        for k in np.flatnonzero(up):
            if isinstance(horizon, (int, np.integer)):
                if horizon < 1:
                    continue
                t = int(rng.integers(1, horizon + 1))
            else:
                t = float(rng.uniform(0, horizon))
            e_edge.append(int(k))
            e_time.append(t)
            e_w.append(float(rng.uniform(base_unit[k], hi) * mult[k]))
    else:
        w0 = weight * mult

    all_eu, all_ev = list(eu), list(ev)
    w_all = list(w0)
    if loops is not None:
        if loops == "lazy":
            loop_base, loop_events = _lazy_loops(n, eu, ev, w0, (e_edge, e_time, e_w))
        else:
            loop_base, loop_events = np.full(n, float(loops)), []
        offset = len(pairs)
        all_eu += list(range(n))
        all_ev += list(range(n))
        w_all += list(loop_base)
        for v, t, w in loop_events:
            e_edge.append(offset + v)
            e_time.append(t)
            e_w.append(w)
    meta = {
        "lattice": {"d": d, "side": side, "boundary": boundary},
        "coords": np.array(sites, dtype=np.int64).reshape(n_box, d),
        "n_box": n_box,
        "multiplicity": np.concatenate([mult, np.zeros(n if loops is not None else 0)]),
    }
    if wired:
        meta["exterior"] = n_box
    return DynEnv(n, all_eu, all_ev, np.array(w_all, dtype=float), horizon,
                  events=(e_edge, e_time, e_w), labels=labels, meta=meta)


def _lazy_loops(n, eu, ev, w0, events):
    """Loop weights equal to the off-diagonal mass at every change time."""
    def off_mass(w):
        return np.bincount(eu, weights=w, minlength=n) + np.bincount(ev, weights=w, minlength=n)

    loop_base = off_mass(np.asarray(w0, dtype=float))
    e_edge, e_time, e_w = events
    if not e_edge:
        return loop_base, []
    cur = np.array(w0, dtype=float)
    times = np.asarray(e_time, dtype=float)
    out = []
    for t in np.unique(times):
        group = np.flatnonzero(times == t)
        ks = np.asarray(e_edge)[group]
        cur[ks] = np.asarray(e_w)[group]
        off = off_mass(cur)
        touched = np.unique(np.concatenate([eu[ks], ev[ks]]))
        t_out = e_time[group[0]]
        out.extend((int(v), t_out, float(off[v])) for v in touched)
    return loop_base, out


# -- documents ------------------------------------------------------------------

def _parse_weight(w, exact):
    if isinstance(w, str):
        return Fraction(w) if exact else float(Fraction(w))
    return Fraction(w) if exact else float(w)


def _label(x):
    return tuple(_label(v) for v in x) if isinstance(x, list) else x


def from_document(doc, rng=None) -> DynEnv:
    """Build an environment from a JSON-compatible document.

    Explicit form::

        {"vertices": [...], "horizon": T, "exact": false,
         "edges": [{"u": .., "v": .., "weight": w, "changes": [[t, w], ...]}, ...]}

    (edges may also be ``[u, v, w]`` triples; weights may be strings like "1/2").
    Generator form: ``{"generator": "zd_box", "d": 3, "side": 4, "boundary": "wired", ...}``
    or ``{"generator": "e2"|"e3"}``.
    """
    gen = doc.get("generator")
    horizon = doc.get("horizon", 0)
    if gen == "e2":
        return e2(scale_at_1=doc.get("scale_at_1"), horizon=horizon, exact=doc.get("exact", False))
    if gen == "e3":
        return e3(horizon=horizon, exact=doc.get("exact", False))
    if gen == "zd_box":
        for key in ("d", "side"):
            if key not in doc:
                raise ConfigError(f"env.{key}", "required for zd_box")
        elliptic = doc.get("elliptic")
        return zd_box(doc["d"], doc["side"], horizon=horizon, boundary=doc.get("boundary", "free"),
                      weight=doc.get("weight", 1.0), loops=doc.get("loops", "lazy"), rng=rng,
                      elliptic=tuple(elliptic) if elliptic else None,
                      increase_prob=doc.get("increase_prob", 1.0))
    if gen is not None:
        raise ConfigError("env.generator", f"unknown generator {gen!r}")
    if "vertices" not in doc or "edges" not in doc:
        raise ConfigError("env", "explicit environments need 'vertices' and 'edges'")
    exact = doc.get("exact", False)
    vertices = [_label(v) for v in doc["vertices"]]
    edges = []
    for e in doc["edges"]:
        if isinstance(e, dict):
            u, v, w, ch = e["u"], e["v"], e["weight"], e.get("changes", [])
        else:
            u, v, w = e[:3]
            ch = e[3] if len(e) > 3 else []
        edges.append((_label(u), _label(v), _parse_weight(w, exact),
                      [(t, _parse_weight(x, exact)) for t, x in ch]))
    return DynEnv.from_edges(vertices, edges, horizon)


def _jsonable_label(x):
    if isinstance(x, tuple):
        return [_jsonable_label(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    return x


def _jsonable_weight(w):
    if isinstance(w, Fraction):
        return str(w)
    return float(w)


def to_document(env: DynEnv) -> dict:
    changes = [[] for _ in range(len(env.eu))]
    for k, t, w in zip(env.e_edge.tolist(), env.e_time.tolist(), env.e_w.tolist()):
        changes[k].append([int(t) if float(t).is_integer() else t, _jsonable_weight(w)])
    labels = [_jsonable_label(env.label(i)) for i in range(env.n)]
    edges = []
    for k, (u, v, w) in enumerate(zip(env.eu.tolist(), env.ev.tolist(), env.w0.tolist())):
        e = {"u": labels[u], "v": labels[v], "weight": _jsonable_weight(w)}
        if changes[k]:
            e["changes"] = changes[k]
        edges.append(e)
    return {"vertices": labels, "edges": edges, "horizon": env.horizon, "exact": env.exact}


def load_document(path) -> DynEnv:
    return from_document(json.loads(Path(path).read_text()))


def save_document(env: DynEnv, path):
    Path(path).write_text(json.dumps(to_document(env), indent=1))
