"""Multi-step transition kernels and heat kernels by forward composition."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dyn_graph import DynEnv, monotonicity_report
from .errors import CapExceededError, InvalidStateError, NonMonotoneError

MAX_KERNEL_VERTICES = 2000
# above this size (float mode) the one-step kernel is applied as a sparse matrix
_SPARSE_FROM = 300


@dataclass(frozen=True)
class KernelSlice:
    """Table of P(s, x; t, y); row/column i is vertex index i of the environment."""

    s: int
    t: int
    probs: np.ndarray

    def row(self, env: DynEnv, x):
        return self.probs[env.index(x)]

    def __getitem__(self, ij):
        return self.probs[ij]


def _one_step(env: DynEnv, t, sparse: bool):
    snap = env.snapshot(t)
    if sparse:
        inv = np.zeros(env.n)
        inv[snap.support] = 1.0 / snap.pi[snap.support]
        return snap.csr.multiply(inv[:, None]).tocsr()
    mat = snap.dense.copy()
    for i in np.flatnonzero(snap.support):
        mat[i] = mat[i] / snap.pi[i]
    return mat


def _identity(env: DynEnv, s):
    support = env.support(s)
    if env.exact:
        probs = np.empty((env.n, env.n), dtype=object)
        probs.fill(env.zero)
        for i in np.flatnonzero(support):
            probs[i, i] = env.one
        return probs
    return np.diag(support.astype(float))


def iter_kernels(env: DynEnv, s, t_end, killed=()):
    """Yield :class:`KernelSlice` for t = s, s+1, ..., t_end (one composition per step).

    Mass arriving at a vertex in ``killed`` is removed (Dirichlet condition),
    giving the kernel of the walk killed on entering that set.
    """
    if env.n > MAX_KERNEL_VERTICES:
        raise CapExceededError(f"{env.n} vertices exceeds the dense-kernel cap {MAX_KERNEL_VERTICES}")
    env.check_time(s)
    env.check_time(t_end)
    if t_end < s:
        raise ValueError("need s <= t")
    sparse = not env.exact and env.n >= _SPARSE_FROM
    killed = np.asarray(sorted(killed), dtype=np.int64)
    probs = _identity(env, s)
    probs[killed] = env.zero
    yield KernelSlice(s, s, probs)
    for u in range(s, t_end):
        step = _one_step(env, u, sparse)
        probs = np.asarray(probs @ step) if not sparse else np.asarray((step.T @ probs.T).T)
        outside = ~env.support(u + 1)
        if outside.any() and np.any(probs[:, outside] != 0):
            raise InvalidStateError(f"walk mass on a vertex outside V_{u + 1}")
        probs[:, killed] = env.zero
        yield KernelSlice(s, u + 1, probs)


def multi_step_kernel(env: DynEnv, s, t) -> KernelSlice:
    """P(s, ., t, .): identity on V_s composed with one-step kernels s..t-1."""
    out = None
    for out in iter_kernels(env, s, t):
        pass
    return out


def heat_kernel(env: DynEnv, s, x, t, y):
    """h(s,x;t,y) = P(s,x;t,y) / pi^(t)(y)."""
    i, j = env.index(x), env.index(y)
    if not env.support(s)[i]:
        raise InvalidStateError(f"{x!r} not in V_{s}")
    pi_t = env.pi(t)
    if not pi_t[j] > 0:
        raise InvalidStateError(f"{y!r} not in V_{t}")
    return multi_step_kernel(env, s, t).probs[i, j] / pi_t[j]


def normalized_heat_sup(env: DynEnv, kernel: KernelSlice, killed=()) -> float:
    """sup over x in V_s, y in V_t (outside ``killed``) of pi^(s)(x) h(s,x;t,y)."""
    pi_s = np.asarray(env.pi(kernel.s), dtype=float)
    pi_t = np.asarray(env.pi(kernel.t), dtype=float)
    rows, cols = env.support(kernel.s).copy(), env.support(kernel.t).copy()
    rows[list(killed)] = False
    cols[list(killed)] = False
    probs = np.asarray(kernel.probs, dtype=float)[np.ix_(rows, cols)]
    return float((pi_s[rows, None] * probs / pi_t[None, cols]).max())


def decay_envelope(env: DynEnv, s, cfg, t_end=None, killed=None):
    """Rows ``(t, sup_{x,y} pi^(s)(x) h(s,x;t,y), psi_d(t)-psi_d(s), envelope)``.

    envelope = sup * (e + psi_d(t) - psi_d(s))^(d/2); the additive e keeps the
    t = s entry finite (it equals e^(d/2)).  Boundedness of this sequence is
    the finite-volume stand-in for the heat-kernel decay bound.

    On a wired box the walk is killed at the exterior vertex by default (the
    killed kernel is dominated by the infinite-lattice one); pass
    ``killed=()`` to keep the exterior as an ordinary vertex.
    """
    from .isoperimetry import psi_series

    report = monotonicity_report(env)
    if not report.is_effectively_nondecreasing:
        raise NonMonotoneError("vertex conductances are not effectively non-decreasing")
    t_end = env.horizon if t_end is None else t_end
    if killed is None:
        killed = (env.meta["exterior"],) if "exterior" in env.meta else ()
    psis = psi_series(env, t_end, cfg, with_beta=False)
    rows = []
    for kernel in iter_kernels(env, s, t_end, killed):
        sup = normalized_heat_sup(env, kernel, killed)
        growth = psis[kernel.t] - psis[s]
        rows.append((kernel.t, sup, growth, sup * (math.e + growth) ** (cfg.d / 2)))
    return rows


def kernel_to_csv(kernel: KernelSlice, env: DynEnv, path):
    """Write nonzero entries as rows ``s, t, x, y, prob``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", "x", "y", "prob"])
        nz = np.argwhere(np.asarray(kernel.probs != 0))
        for i, j in nz:
            w.writerow([kernel.s, kernel.t, env.label(i), env.label(j), repr(kernel.probs[i, j])])


class KernelCache:
    """On-disk cache of float kernel slices keyed by environment digest and (s, t)."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, env, s, t):
        return self.dir / f"{env.digest()}_{s}_{t}.npy"

    def get(self, env: DynEnv, s, t) -> KernelSlice:
        path = self._path(env, s, t)
        if path.exists():
            return KernelSlice(s, t, np.load(path))
        kernel = multi_step_kernel(env.as_float(), s, t)
        np.save(path, np.asarray(kernel.probs, dtype=float))
        return kernel
