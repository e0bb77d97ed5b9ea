"""Exact diagonalization, spectral-patch selection, gap and width
bookkeeping, and patch tracking along a driving path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interactions import Schedule, assemble_hamiltonian

EIG_TOL = 1e-10


class GapError(RuntimeError):
    """Raised when a requested spectral patch has no positive gap."""


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # unitary, columns are eigenvectors

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def to_eigenbasis(self, a: np.ndarray) -> np.ndarray:
        return self.eigenvectors.conj().T @ a @ self.eigenvectors

    def from_eigenbasis(self, a: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ a @ self.eigenvectors.conj().T


@dataclass
class PatchData:
    indices: tuple  # contiguous eigenvalue indices of the patch
    projector: np.ndarray
    gap: float
    width: float

    @property
    def rank(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class LowestK:
    k: int


@dataclass(frozen=True)
class Window:
    lo: float
    hi: float


@dataclass(frozen=True)
class Cluster:
    threshold: float | None = None  # default: 1e-8 * spectral range


def parse_selector(text: str):
    """Selector from a string: "lowest:k", "window:a:b", "cluster[:thr]"."""
    parts = text.split(":")
    if parts[0] == "lowest" and len(parts) == 2:
        return LowestK(int(parts[1]))
    if parts[0] == "window" and len(parts) == 3:
        return Window(float(parts[1]), float(parts[2]))
    if parts[0] == "cluster":
        if len(parts) == 1:
            return Cluster()
        if len(parts) == 2:
            return Cluster(float(parts[1]))
    raise ValueError(f"cannot parse selector {text!r}")


def _select_indices(evals: np.ndarray, selector) -> np.ndarray:
    if isinstance(selector, LowestK):
        if selector.k < 1 or selector.k > len(evals):
            raise ValueError(f"lowest_k={selector.k} out of range for dim {len(evals)}")
        return np.arange(selector.k)
    if isinstance(selector, Window):
        idx = np.where((evals >= selector.lo) & (evals <= selector.hi))[0]
        if len(idx) == 0:
            raise ValueError("window selector matched no eigenvalues")
        if np.any(np.diff(idx) != 1):
            raise ValueError("window selector matched a non-contiguous index set")
        return idx
    if isinstance(selector, Cluster):
        spread = float(evals[-1] - evals[0])
        thr = selector.threshold if selector.threshold is not None else 1e-8 * max(spread, 1.0)
        k = 1
        while k < len(evals) and evals[k] - evals[k - 1] < thr:
            k += 1
        return np.arange(k)
    raise TypeError(f"unknown selector {selector!r}")


def diagonalize_and_patch(h: np.ndarray, selector) -> tuple[SpectralData, PatchData]:
    """Eigendecomposition plus the spectral patch named by the selector.

    The patch must not interlace with the complementary spectrum: the
    closed interval spanned by the patch may contain no other eigenvalue,
    and the gap to the complement must be positive.
    """
    h = np.asarray(h, dtype=complex)
    if np.abs(h - h.conj().T).max() > 1e-10 * max(1.0, np.abs(h).max()):
        raise ValueError("input matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(h)
    spec = SpectralData(evals, evecs)
    idx = _select_indices(evals, selector)
    lo, hi = evals[idx[0]], evals[idx[-1]]
    gap = np.inf
    if idx[0] > 0:
        gap = min(gap, lo - evals[idx[0] - 1])
    if idx[-1] < len(evals) - 1:
        gap = min(gap, evals[idx[-1] + 1] - hi)
    if not np.isfinite(gap):
        gap = float("inf")  # patch is the whole spectrum
    if gap <= 0:
        raise GapError(
            f"gap assumption violated: patch [{lo}, {hi}] touches the complement"
        )
    cols = evecs[:, idx]
    proj = cols @ cols.conj().T
    patch = PatchData(tuple(int(i) for i in idx), proj, float(gap), float(hi - lo))
    return spec, patch


@dataclass
class PatchPath:
    grid: np.ndarray
    patches: list
    gamma_min: float
    delta_max: float
    near_degenerate: bool | None = None


def gap_along_path(sch: Schedule, volume, grid, selector, epsilon: float | None = None,
                   site_dims=None) -> PatchPath:
    """Track the selected patch at every grid point of a schedule.

    Returns the smallest gap and largest patch width over the grid; when
    epsilon is given, also reports whether the width stays within the
    near-degeneracy budget min(epsilon^2, epsilon / n_sites).
    """
    grid = np.asarray(grid, dtype=float)
    vol = tuple(sorted(set(volume)))
    patches = []
    gamma_min, delta_max = np.inf, 0.0
    for s in grid:
        h = assemble_hamiltonian(sch.eval(float(s), 0), vol, site_dims)
        try:
            _, patch = diagonalize_and_patch(h, selector)
        except GapError as err:
            raise GapError(f"gap closed at s={float(s)}: {err}") from None
        if patch.gap <= 0:
            raise GapError(f"gap closed at s={float(s)}")
        patches.append(patch)
        gamma_min = min(gamma_min, patch.gap)
        delta_max = max(delta_max, patch.width)
    near = None
    if epsilon is not None:
        budget = min(epsilon**2, epsilon / len(vol))
        near = bool(delta_max <= budget)
    return PatchPath(grid, patches, float(gamma_min), float(delta_max), near)
