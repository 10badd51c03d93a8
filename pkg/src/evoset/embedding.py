"""Continuous martingale embedding of the evolving-set mass.

Each step is driven by a Brownian increment ``z = B_{i+1} - B_i`` through
``U = Phi(z)``.  Given the bridge value ``b = B_{i+s} - B_i`` the conditional
expectation of the next mass is

    M_{i+s} = sum_y pi^(i+1)(y) Phi((H(y) - b) / sqrt(1 - s)),
    H(y) = Phi^{-1}(pi^(i)(S, y) / pi^(i+1)(y)),

which equals pi^(i)(S_i) at s = 0 and tends to pi^(i+1)(S_{i+1}) as s -> 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .dyn_graph import TOL, DynEnv
from .errors import NonMonotoneError
from .evolving_set import SetState, sample_step, set_mass, successor_law

_U_MIN = np.nextafter(0.0, 1.0)
_U_MAX = np.nextafter(1.0, 0.0)


def drive_uniforms(normal_deviates):
    """Phi applied elementwise, clipped into the open interval (0, 1)."""
    return np.clip(ndtr(np.asarray(normal_deviates, dtype=float)), _U_MIN, _U_MAX)


def thresholds(env: DynEnv, members, i):
    """Candidate vertices and their H values (+inf for certain members)."""
    law = successor_law(env, SetState.of(env, i, members))
    ys = list(law.q)
    q = np.array([float(law.q[y]) for y in ys])
    if np.any(q < 0) or np.any(q > 1 + TOL):
        raise NonMonotoneError("membership ratio outside [0, 1]")
    return ys, ndtri(np.minimum(q, 1.0))


def m_interpolate(env: DynEnv, members, i, s, bridge_value):
    """M_{i+s} for the state ``members`` (vertex indices) at integer time i.

    ``bridge_value`` may be an array; the result then has the same shape.
    """
    if not 0 <= s < 1:
        raise ValueError("s must lie in [0, 1)")
    b = np.asarray(bridge_value, dtype=float)
    if not members:
        return np.zeros_like(b) if b.ndim else 0.0
    ys, h = thresholds(env, members, i)
    pi_next = np.array([float(env.pi(i + 1)[y]) for y in ys])
    scale = np.sqrt(1.0 - s)
    args = (h[:, None] - b.reshape(1, -1)) / scale
    vals = pi_next @ ndtr(args)
    return vals.reshape(b.shape) if b.ndim else float(vals[0])


def sample_bridge(endpoint_increment, s, rng, size=None):
    """B_{i+s} - B_i given B_{i+1} - B_i: normal, mean s*endpoint, variance s(1-s)."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return rng.normal(s * np.asarray(endpoint_increment), np.sqrt(s * (1 - s)), size=size)


def sample_bridge_path(endpoint_increment, s_values, rng):
    """Jointly consistent bridge values at increasing ``s_values`` (one path)."""
    out = []
    prev_s, prev_b = 0.0, 0.0
    for s in s_values:
        if not prev_s < s < 1:
            raise ValueError("s_values must increase strictly inside (0, 1)")
        # bridge from (prev_s, prev_b) to (1, endpoint)
        frac = (s - prev_s) / (1 - prev_s)
        mean = prev_b + frac * (endpoint_increment - prev_b)
        var = (s - prev_s) * (1 - s) / (1 - prev_s)
        prev_b = rng.normal(mean, np.sqrt(var))
        prev_s = s
        out.append(prev_b)
    return np.array(out)


def endpoint_error_bound(env: DynEnv, members, i, endpoint, s):
    """Analytic bound on |M_{i+s} - pi^(i+1)(S_{i+1})| with the bridge pinned at its mean.

    With b = s*z every term differs from its limit indicator by
    Phi(-|H - s z| / sqrt(1-s)) as long as s z and z sit on the same side of H,
    which holds when the margin |H - z| - (1-s)|z| is positive; otherwise the
    term is only bounded by 1.  Returns ``(bound, gap)``, gap = min_y |H(y) - z|.
    """
    ys, h = thresholds(env, members, i)
    pi_next = np.array([float(env.pi(i + 1)[y]) for y in ys])
    gap = float(np.min(np.abs(h - endpoint))) if ys else np.inf
    margin = np.abs(h - endpoint) - (1 - s) * abs(endpoint)
    per_term = np.where(margin > 0, ndtr(-np.maximum(margin, 0.0) / np.sqrt(1 - s)), 1.0)
    return float(pi_next @ per_term), gap


@dataclass
class EmbeddedPath:
    brownian_incs: np.ndarray
    sets: list
    masses: list
    M_samples: list = field(default_factory=list)
    joint_bridge: bool = True


def simulate_embedded_path(env: DynEnv, start, steps, s_grid, rng, joint_bridge=True) -> EmbeddedPath:
    """Evolving set driven by Phi(Brownian increments), with M sampled inside each step.

    ``joint_bridge`` chooses one consistent bridge path per step over
    ``s_grid``; otherwise each s gets an independent single-point conditional.
    """
    x = env.index(start)
    members = frozenset([x])
    incs = rng.standard_normal(steps)
    sets, masses = [members], [float(set_mass(env, 0, members))]
    samples = [(0.0, masses[0])]
    for i in range(steps):
        z = incs[i]
        if joint_bridge and len(s_grid):
            bridge = sample_bridge_path(z, s_grid, rng)
        else:
            bridge = [sample_bridge(z, s, rng) for s in s_grid]
        for s, b in zip(s_grid, bridge):
            samples.append((i + s, float(m_interpolate(env, members, i, s, b))))
        law = successor_law(env, SetState(i, members, set_mass(env, i, members)))
        members = sample_step(law, float(drive_uniforms(z)))
        sets.append(members)
        masses.append(float(set_mass(env, i + 1, members)))
        samples.append((float(i + 1), masses[-1]))
    return EmbeddedPath(incs, sets, masses, samples, joint_bridge)


def write_m_csv(path, path_obj: EmbeddedPath):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "M_u", "size_floor_u", "bridge"])
        tag = "joint" if path_obj.joint_bridge else "pointwise"
        for u, m in path_obj.M_samples:
            w.writerow([repr(u), repr(m), len(path_obj.sets[int(np.floor(u))]), tag])
