"""Propagators for the rescaled driven Schrodinger equation, projector
evolution, parallel transport within a moving spectral patch, and
commutator light-cone probes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counterdiabatic import DressingBuilder
from .interactions import CompiledSchedule, GenericSchedule, Schedule, assemble_hamiltonian
from .lattice import Lattice, graph_distance
from .operators import LocalOperator, embed, embed_sparse, spectral_norm
from .spectral import PatchPath

SPARSE_THRESHOLD = 200  # dimensions above this propagate via expm_multiply
NORM_TOL = 1e-8


@dataclass
class Trajectory:
    """States sampled on the requested grid; integration uses finer steps."""

    grid: np.ndarray
    states: list
    epsilon: float
    kind: str  # "vector" | "projector"
    step: float
    method: str = "exp-midpoint"

    def state(self, i: int) -> np.ndarray:
        return self.states[i]

    def projector(self, i: int) -> np.ndarray:
        if self.kind == "vector":
            v = self.states[i]
            return np.outer(v, v.conj())
        q = self.states[i]
        return q @ q.conj().T

    def expectation(self, i: int, o: np.ndarray) -> float:
        if self.kind == "vector":
            v = self.states[i]
            return float(np.real(v.conj() @ (o @ v)))
        q = self.states[i]
        r = q.shape[1]
        return float(np.real(np.trace(q.conj().T @ (o @ q))) / r)


def max_step(eps: float) -> float:
    return min(eps / 10.0, 1e-3)


class _Stepper:
    """Applies exp(-i dt H(s_mid)) to state columns; dense eigendecomposition
    for small dimensions, sparse expm_multiply above SPARSE_THRESHOLD."""

    def __init__(self, sch: Schedule, volume, site_dims=None, extra=None):
        self.generic = isinstance(sch, GenericSchedule)
        self.sch = sch
        self.volume = tuple(sorted(set(volume)))
        self.site_dims = site_dims
        self.extra = extra  # optional s-independent Hermitian addition
        if self.generic:
            probe = assemble_hamiltonian(sch.eval(0.0, 0), self.volume, site_dims)
            self.dim = probe.shape[0]
            self.compiled = None
            self.sparse = False
        else:
            probe = CompiledSchedule(sch, self.volume, site_dims, sparse=False)
            self.dim = probe.dim
            self.sparse = self.dim > SPARSE_THRESHOLD
            if self.sparse:
                self.compiled = CompiledSchedule(sch, self.volume, site_dims, sparse=True)
            else:
                self.compiled = probe

    def hamiltonian(self, s: float):
        if self.generic:
            h = assemble_hamiltonian(self.sch.eval(s, 0), self.volume, self.site_dims)
        else:
            h = self.compiled.hamiltonian(s, 0)
        if self.extra is not None:
            h = h + self.extra
        return h

    def apply(self, cols: np.ndarray, s_mid: float, dt: float) -> np.ndarray:
        h = self.hamiltonian(s_mid)
        if self.sparse:
            from scipy.sparse.linalg import expm_multiply

            return expm_multiply((-1j * dt) * h, cols)
        lam, vec = np.linalg.eigh(h)
        phase = np.exp(-1j * dt * lam)
        if cols.ndim == 1:
            return vec @ (phase * (vec.conj().T @ cols))
        return vec @ (phase[:, None] * (vec.conj().T @ cols))


def _integrate(stepper: _Stepper, cols: np.ndarray, grid: np.ndarray, eps: float,
               step: float, rebuild=None, rebuild_every: float = 0.01):
    """Exponential-midpoint integration of i eps d/ds psi = H_s psi,
    landing exactly on each grid point.  ``rebuild`` optionally refreshes
    the stepper's s-independent extra term every ``rebuild_every`` in s."""
    out = [cols.copy()]
    for a, b in zip(grid[:-1], grid[1:]):
        span = b - a
        if span <= 0:
            raise ValueError("grid must be strictly ascending")
        if rebuild is None:
            blocks = [(a, b)]
        else:
            nb = max(1, int(np.ceil(span / rebuild_every)))
            edges = a + span * np.arange(nb + 1) / nb
            blocks = list(zip(edges[:-1], edges[1:]))
        for ba, bb in blocks:
            if rebuild is not None:
                stepper.extra = rebuild((ba + bb) / 2.0)
            nsteps = max(1, int(np.ceil((bb - ba) / step)))
            h = (bb - ba) / nsteps
            s = ba
            for _ in range(nsteps):
                cols = stepper.apply(cols, s + h / 2.0, h / eps)
                s += h
        out.append(cols.copy())
    return out


def evolve_state(sch: Schedule, volume, eps: float, psi0: np.ndarray, grid,
                 mode: str = "bare", dress_n: int = 1, w=None, selector=None,
                 site_dims=None, step: float | None = None,
                 rebuild_every: float = 0.01) -> Trajectory:
    """Drive a normalized state through the schedule at rate eps.

    mode "bare" integrates i eps dpsi/ds = H_s psi with the exponential
    midpoint rule (unitary per step); mode "dressed" adds the exact
    residual drive of the order-``dress_n`` dressing, refreshed every
    ``rebuild_every`` in s (the drive varies on the s-scale of the
    schedule, not the step scale).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending with >= 2 points")
    h = max_step(eps) if step is None else float(step)
    stepper = _Stepper(sch, volume, site_dims)
    rebuild = None
    if mode == "dressed":
        if w is None or selector is None:
            raise ValueError("dressed mode needs a filter and a patch selector")
        builder = DressingBuilder(sch, volume, dress_n, w, selector, site_dims)

        def rebuild(s_mid: float):
            d = builder.build(s_mid, eps)
            return builder.counter_drive(d)

    elif mode != "bare":
        raise ValueError(f"unknown mode {mode!r}")
    states = _integrate(stepper, psi0, grid, eps, h, rebuild, rebuild_every)
    return Trajectory(grid, states, eps, "vector", h)


def evolve_projector(sch: Schedule, volume, eps: float, p0: np.ndarray, grid,
                     site_dims=None, step: float | None = None) -> Trajectory:
    """Conjugate a projector through the driven propagator.

    The rank-r projector is carried as an isometry of r orthonormal
    columns, so idempotence, Hermiticity, and the rank are preserved
    exactly by the unitary steps.
    """
    p0 = np.asarray(p0, dtype=complex)
    if np.abs(p0 - p0.conj().T).max() > NORM_TOL or np.abs(p0 @ p0 - p0).max() > NORM_TOL:
        raise ValueError("p0 must be an orthogonal projector")
    lam, vec = np.linalg.eigh(p0)
    occ = lam > 0.5
    if np.any(np.abs(lam[occ] - 1.0) > NORM_TOL) or np.any(np.abs(lam[~occ]) > NORM_TOL):
        raise ValueError("p0 eigenvalues are not 0/1")
    cols = np.ascontiguousarray(vec[:, occ])
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending with >= 2 points")
    h = max_step(eps) if step is None else float(step)
    stepper = _Stepper(sch, volume, site_dims)
    states = _integrate(stepper, cols, grid, eps, h)
    return Trajectory(grid, states, eps, "projector", h)


def _patch_derivatives(grid: np.ndarray, projs: list) -> list:
    """dP/ds on the grid: central differences inside, one-sided order-2 ends."""
    n = len(grid)
    if n < 3:
        raise ValueError("need at least 3 grid points for patch derivatives")
    out = []
    for k in range(n):
        if k == 0:
            hh = grid[1] - grid[0]
            d = (-3 * projs[0] + 4 * projs[1] - projs[2]) / (2 * hh)
        elif k == n - 1:
            hh = grid[-1] - grid[-2]
            d = (3 * projs[-1] - 4 * projs[-2] + projs[-3]) / (2 * hh)
        else:
            d = (projs[k + 1] - projs[k - 1]) / (grid[k + 1] - grid[k - 1])
        out.append(d)
    return out


def parallel_transport(path: PatchPath, psi0: np.ndarray, tol: float = 1e-10) -> Trajectory:
    """Kato transport along the patch path: i dOmega/ds = i [dP_s/ds, P_s] Omega.

    This is the generator order that actually preserves Ran P_s and makes
    P_s dOmega/ds = 0 (the defining property of parallel transport; the
    reversed order leaks out of the patch).  dP/ds uses central
    differences on the patch grid.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    grid = np.asarray(path.grid, dtype=float)
    projs = [p.projector for p in path.patches]
    leak = np.linalg.norm(psi0 - projs[0] @ psi0)
    if leak > tol:
        raise ValueError(f"psi0 leaves the initial patch range by {leak}")
    pdots = _patch_derivatives(grid, projs)
    gens = [d @ p - p @ d for p, d in zip(projs, pdots)]
    omega = psi0.copy()
    states = [omega.copy()]
    for k in range(len(grid) - 1):
        ds = grid[k + 1] - grid[k]
        g_mid = 0.5 * (gens[k] + gens[k + 1])
        lam, vec = np.linalg.eigh(1j * g_mid)  # generator is anti-Hermitian
        omega = vec @ (np.exp(-1j * ds * lam) * (vec.conj().T @ omega))
        states.append(omega.copy())
    return Trajectory(grid, states, 0.0, "vector", float(np.min(np.diff(grid))),
                      method="transport-midpoint")


@dataclass
class LRProbeResult:
    distances: np.ndarray
    times: np.ndarray
    norms: np.ndarray  # (n_probes, n_times)
    velocity: float
    threshold: float


def lr_probe(h: np.ndarray, o_x: LocalOperator, o_ys, times, lat: Lattice,
             site_dims=None, threshold_frac: float = 1e-2) -> LRProbeResult:
    """Commutator light-cone probe for a frozen Hamiltonian.

    Computes ||[e^{iHt} O_x e^{-iHt}, O_y]|| on the time grid for each
    probe O_y, then fits the velocity as the slope of the first-crossing
    contour at threshold_frac * 2 ||O_x|| ||O_y||.
    """
    if isinstance(o_ys, LocalOperator):
        o_ys = [o_ys]
    times = np.asarray(times, dtype=float)
    volume = lat.sites
    evals, evecs = np.linalg.eigh(np.asarray(h, dtype=complex))
    ox_full = embed(o_x, volume, site_dims)
    ox_eig = evecs.conj().T @ ox_full @ evecs
    de = evals[:, None] - evals[None, :]
    nx = spectral_norm(ox_full)
    b_sparse = [embed_sparse(oy, volume, site_dims) for oy in o_ys]
    ny = [spectral_norm(oy.matrix) for oy in o_ys]
    dists = np.array(
        [
            min(graph_distance(lat, a, b) for a in o_x.support for b in oy.support)
            for oy in o_ys
        ],
        dtype=float,
    )
    norms = np.zeros((len(o_ys), len(times)))
    for j, t in enumerate(times):
        if t == 0.0:
            a_t = ox_full
        else:
            a_t = evecs @ (np.exp(1j * de * t) * ox_eig) @ evecs.conj().T
        for i, b in enumerate(b_sparse):
            d = b @ a_t
            norms[i, j] = spectral_norm(d.conj().T - d)
    threshold = float(threshold_frac)
    crossings = []
    for i in range(len(o_ys)):
        scale = 2.0 * nx * ny[i]
        rel = norms[i] / scale
        above = np.where(rel >= threshold)[0]
        if len(above) == 0:
            continue
        k = above[0]
        if k == 0:
            t_star = times[0]
        else:
            f0, f1 = rel[k - 1], rel[k]
            t_star = times[k - 1] + (threshold - f0) / (f1 - f0) * (times[k] - times[k - 1])
        crossings.append((t_star, dists[i]))
    if len(crossings) >= 2:
        ts = np.array([c[0] for c in crossings])
        dd = np.array([c[1] for c in crossings])
        velocity = float(np.polyfit(ts, dd, 1)[0])
    else:
        velocity = float("nan")
    return LRProbeResult(dists, times, norms, velocity, threshold)
