"""Finite graphs with their metric, decay-function machinery, and the
subadditive envelope used to certify super-polynomial decay profiles."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class Lattice:
    """A finite connected graph with a declared dimensionality.

    ``dim_d`` and ``kappa`` declare the growth bound
    ``|{x : dist(x, y) <= r}| <= kappa * r**dim_d`` for every site y and
    every radius r >= 1 (checked by enumeration on construction).
    """

    sites: tuple
    edges: tuple
    dim_d: int
    kappa: float
    _index: dict = field(init=False, repr=False)
    _dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sites = tuple(self.sites)
        self.edges = tuple((a, b) for a, b in self.edges)
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("duplicate site ids")
        if self.dim_d < 1:
            raise ValueError("dim_d must be a positive integer")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        self._index = {s: i for i, s in enumerate(self.sites)}
        for a, b in self.edges:
            if a not in self._index or b not in self._index:
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown site")
        self._dist = self._all_pairs_distances()
        if np.any(self._dist < 0):
            raise ValueError("lattice graph is not connected")
        self._check_growth_bound()

    def _all_pairs_distances(self) -> np.ndarray:
        n = len(self.sites)
        adj = [[] for _ in range(n)]
        for a, b in self.edges:
            ia, ib = self._index[a], self._index[b]
            adj[ia].append(ib)
            adj[ib].append(ia)
        dist = -np.ones((n, n), dtype=int)
        for start in range(n):
            dist[start, start] = 0
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for v in adj[u]:
                    if dist[start, v] < 0:
                        dist[start, v] = dist[start, u] + 1
                        queue.append(v)
        return dist

    def _check_growth_bound(self):
        diam = int(self._dist.max())
        for r in range(1, diam + 1):
            counts = (self._dist <= r).sum(axis=1)
            bound = self.kappa * r**self.dim_d
            if counts.max() > bound + 1e-9:
                raise ValueError(
                    f"growth bound violated at r={r}: ball size {counts.max()} "
                    f"> kappa*r^d = {bound}"
                )

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def diameter(self) -> int:
        return int(self._dist.max())

    def index(self, site) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise ValueError(f"unknown site id {site!r}") from None

    def distance_matrix(self) -> np.ndarray:
        return self._dist.copy()

    def ball(self, site, r: int) -> tuple:
        i = self.index(site)
        return tuple(s for j, s in enumerate(self.sites) if self._dist[i, j] <= r)


def graph_distance(lat: Lattice, x, y) -> int:
    """Shortest-path distance between two sites of the lattice."""
    return int(lat._dist[lat.index(x), lat.index(y)])


@dataclass
class DecayProfile:
    """Decay machinery built from F(r) = (1+r)^-(d+1) and a weight zeta.

    ``zeta`` is either exponential, exp(-mu*r), or a tabulated positive,
    non-increasing, log-superadditive sequence on integer distances
    (values beyond the table reuse the last entry).  ``c_f`` and
    ``f_one_norm`` hold lattice-measured constants once computed.
    """

    d: int
    kind: str = "exponential"  # "exponential" | "s_class"
    mu: float = 1.0
    zeta_table: np.ndarray | None = None
    c_f: float | None = None
    f_one_norm: float | None = None

    def __post_init__(self):
        if self.kind not in ("exponential", "s_class"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if self.kind == "exponential" and self.mu <= 0:
            raise ValueError("exponential decay needs mu > 0")
        if self.kind == "s_class":
            if self.zeta_table is None:
                raise ValueError("s_class profile needs a zeta table")
            self.zeta_table = np.asarray(self.zeta_table, dtype=float)
            _validate_zeta_table(self.zeta_table)

    def zeta(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return np.exp(-self.mu * r)
        idx = np.minimum(np.rint(r).astype(int), len(self.zeta_table) - 1)
        return self.zeta_table[idx]

    def f(self, r):
        r = np.asarray(r, dtype=float)
        return (1.0 + r) ** (-(self.d + 1))

    def f_zeta(self, r):
        return self.zeta(r) * self.f(r)

    def with_constants(self, lat: Lattice) -> "DecayProfile":
        c_f, f_one, _ = decay_constants(lat, self)
        return replace(self, c_f=c_f, f_one_norm=f_one)


def _validate_zeta_table(table: np.ndarray):
    if table.ndim != 1 or len(table) == 0:
        raise ValueError("zeta table must be a non-empty 1d array")
    if np.any(table <= 0):
        raise ValueError("zeta must be positive")
    if np.any(np.diff(table) > 1e-12):
        raise ValueError("zeta must be non-increasing")
    n = len(table)
    for i in range(n):
        for j in range(n - i):
            if table[i + j] < table[i] * table[j] - 1e-12:
                raise ValueError(
                    f"zeta not log-superadditive at ({i},{j}): "
                    f"{table[i+j]} < {table[i]}*{table[j]}"
                )


def decay_constants(lat: Lattice, prof: DecayProfile) -> tuple[float, float, float]:
    """Measure (c_f, f_one_norm, kappa_min) on the given lattice.

    c_f bounds the convolution sum_z F_zeta(d(x,z)) F_zeta(d(z,y)) by
    c_f * F_zeta(d(x,y)); f_one_norm is the largest row sum of F_zeta;
    kappa_min is the smallest growth constant for radii r >= 1.
    """
    dist = lat._dist
    fm = prof.f_zeta(dist)
    conv = fm @ fm
    c_f = float(np.max(conv / fm))
    f_one = float(np.max(fm.sum(axis=1)))
    diam = int(dist.max())
    kappa_min = 0.0
    for r in range(1, max(diam, 1) + 1):
        counts = (dist <= r).sum(axis=1)
        kappa_min = max(kappa_min, counts.max() / r**lat.dim_d)
    return c_f, f_one, float(kappa_min)


def subadditive_envelope(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Largest subadditive minorant of a sampled nondecreasing function.

    fhat(x) = min over compositions x = x_1 + ... + x_k (parts and partial
    sums on the grid) of sum_i f(x_i).  Requires a uniform grid containing
    0, nondecreasing samples, and f(0) > 0; then 0 < fhat <= f and fhat is
    subadditive on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.shape != values.shape or grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid and values must be matching 1d arrays")
    if abs(grid[0]) > 1e-12:
        raise ValueError("grid must start at 0")
    if len(grid) > 1:
        h = np.diff(grid)
        if np.any(h <= 0) or np.ptp(h) > 1e-9 * h[0]:
            raise ValueError("grid must be uniform and increasing")
    if values[0] <= 0:
        raise ValueError("need f(0) > 0")
    if np.any(np.diff(values) < -1e-12):
        raise ValueError("samples must be nondecreasing")

    n = len(values)
    fhat = values.copy()
    for j in range(2, n):
        best = fhat[j]
        for i in range(1, j // 2 + 1):
            cand = fhat[i] + fhat[j - i]
            if cand < best:
                best = cand
        fhat[j] = best
    return fhat


def lattice_preset(name: str) -> Lattice:
    """Build a named lattice: "chain:L" or "grid:LxW"."""
    parts = name.split(":")
    if parts[0] == "chain":
        if len(parts) != 2:
            raise ValueError(f"bad chain preset {name!r}, expected 'chain:L'")
        L = int(parts[1])
        if L < 1:
            raise ValueError("chain length must be >= 1")
        sites = tuple(range(L))
        edges = tuple((i, i + 1) for i in range(L - 1))
        return Lattice(sites, edges, dim_d=1, kappa=3.0)
    if parts[0] == "grid":
        if len(parts) != 2 or "x" not in parts[1]:
            raise ValueError(f"bad grid preset {name!r}, expected 'grid:LxW'")
        L, W = (int(t) for t in parts[1].split("x"))
        if L < 1 or W < 1:
            raise ValueError("grid extents must be >= 1")
        sites = tuple((i, j) for i in range(L) for j in range(W))
        edges = []
        for i in range(L):
            for j in range(W):
                if i + 1 < L:
                    edges.append(((i, j), (i + 1, j)))
                if j + 1 < W:
                    edges.append(((i, j), (i, j + 1)))
        return Lattice(sites, tuple(edges), dim_d=2, kappa=5.0)
    raise ValueError(f"unknown lattice preset {name!r}")


def lattice_from_json(obj) -> Lattice:
    """Load a custom lattice from a JSON string / dict with keys
    "sites" and "edges"; optional "dim_d" and "kappa" (kappa is measured
    from the graph when omitted)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    sites = tuple(tuple(s) if isinstance(s, list) else s for s in obj["sites"])
    edges = tuple(
        (tuple(a) if isinstance(a, list) else a, tuple(b) if isinstance(b, list) else b)
        for a, b in obj["edges"]
    )
    d = int(obj.get("dim_d", 1))
    kappa = obj.get("kappa")
    if kappa is None:
        probe = Lattice(sites, edges, dim_d=d, kappa=float(len(sites) + 1))
        dist = probe._dist
        kappa = 1.0
        for r in range(1, max(probe.diameter, 1) + 1):
            kappa = max(kappa, (dist <= r).sum(axis=1).max() / r**d)
    return Lattice(sites, edges, dim_d=d, kappa=float(kappa))
