"""Local operator algebra: supports, embeddings into the full tensor
product, the normalized partial trace, commutators, and the fattening
decomposition that localizes an evolved operator shell by shell."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from .lattice import Lattice

DENSE_DIM_LIMIT = 4096

sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
sigma_y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
sigma_z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
identity2 = np.eye(2, dtype=complex)

PAULI = {"x": sigma_x, "y": sigma_y, "z": sigma_z, "i": identity2}


def _site_dim(site, site_dims) -> int:
    if site_dims is None:
        return 2
    return int(site_dims.get(site, 2))


def _dims(sites, site_dims) -> list[int]:
    return [_site_dim(s, site_dims) for s in sites]


@dataclass
class LocalOperator:
    """A matrix acting on an explicit finite set of sites.

    The matrix is ordered by ascending site id; its dimension must equal
    the product of the local dimensions over the support.
    """

    support: tuple
    matrix: np.ndarray
    site_dims: dict | None = None

    def __post_init__(self):
        self.support = tuple(sorted(set(self.support)))
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = prod(_dims(self.support, self.site_dims)) if self.support else 1
        if self.matrix.shape != (d, d):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match support "
                f"dimension {d}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return spectral_norm(self.matrix)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol)

    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T, self.site_dims)

    def to_jsonable(self) -> dict:
        return {
            "support": list(self.support),
            "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in self.matrix],
        }


def local_operator_from_json(obj, site_dims=None) -> LocalOperator:
    mat = np.array(
        [[complex(re, im) for re, im in row] for row in obj["matrix"]], dtype=complex
    )
    support = tuple(tuple(s) if isinstance(s, list) else s for s in obj["support"])
    return LocalOperator(support, mat, site_dims)


def spectral_norm(m: np.ndarray) -> float:
    """Operator 2-norm via the largest eigenvalue of M^dag M.

    Exact eigvalsh for small matrices; Lanczos with a fixed start vector
    for larger ones, so repeated calls stay deterministic.
    """
    m = np.asarray(m)
    n = m.shape[0]
    if n <= 256:
        h = m.conj().T @ m
        return float(np.sqrt(max(np.linalg.eigvalsh(h).max(), 0.0)))
    from scipy.sparse.linalg import LinearOperator, eigsh

    mh = m.conj().T

    def mv(v):
        return mh @ (m @ v)

    op = LinearOperator((n, n), matvec=mv, dtype=complex)
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        w = eigsh(op, k=1, which="LA", v0=v0, return_eigenvectors=False)
        return float(np.sqrt(max(w[0].real, 0.0)))
    except Exception:
        h = m.conj().T @ m
        return float(np.sqrt(max(np.linalg.eigvalsh(h).max(), 0.0)))


def embed(op: LocalOperator, volume, site_dims=None) -> np.ndarray:
    """Embed op as op (x) identity on the given volume.

    Tensor factors are ordered by ascending site id.  The embedding is
    linear and norm-preserving.
    """
    vol = tuple(sorted(set(volume)))
    sup = op.support
    if not set(sup) <= set(vol):
        raise ValueError(f"support {sup} not contained in volume {vol}")
    dims = _dims(vol, site_dims)
    total = prod(dims)
    if total > DENSE_DIM_LIMIT:
        raise ValueError(f"total dimension {total} exceeds dense limit {DENSE_DIM_LIMIT}")
    rest = [s for s in vol if s not in set(sup)]
    if not rest:
        return op.matrix.copy()
    rest_dim = prod(_dims(rest, site_dims))
    big = np.kron(op.matrix, np.eye(rest_dim, dtype=complex))
    order_now = list(sup) + rest
    if order_now == list(vol):
        return big
    dims_now = _dims(order_now, site_dims)
    pos = {s: i for i, s in enumerate(order_now)}
    perm = [pos[s] for s in vol]
    n = len(order_now)
    t = big.reshape(dims_now + dims_now)
    t = t.transpose(perm + [n + p for p in perm])
    return np.ascontiguousarray(t.reshape(total, total))


def embed_sparse(op: LocalOperator, volume, site_dims=None):
    """Sparse CSR variant of embed, for large volumes / probe operators."""
    from scipy import sparse

    vol = tuple(sorted(set(volume)))
    if not set(op.support) <= set(vol):
        raise ValueError(f"support {op.support} not contained in volume {vol}")
    rest = [s for s in vol if s not in set(op.support)]
    rest_dim = prod(_dims(rest, site_dims))
    big = sparse.kron(
        sparse.csr_matrix(op.matrix),
        sparse.identity(rest_dim, dtype=complex, format="csr"),
        format="coo",
    )
    order_now = list(op.support) + rest
    if order_now == list(vol):
        return big.tocsr()
    # re-index from (support, rest) ordering to sorted-volume ordering
    dims_now = _dims(order_now, site_dims)
    strides_now = np.ones(len(order_now), dtype=np.int64)
    for i in range(len(order_now) - 2, -1, -1):
        strides_now[i] = strides_now[i + 1] * dims_now[i + 1]
    dims_vol = _dims(vol, site_dims)
    strides_vol = np.ones(len(vol), dtype=np.int64)
    for i in range(len(vol) - 2, -1, -1):
        strides_vol[i] = strides_vol[i + 1] * dims_vol[i + 1]
    target = {s: strides_vol[i] for i, s in enumerate(vol)}

    def remap(idx):
        idx = idx.astype(np.int64)
        out = np.zeros_like(idx)
        for pos, s in enumerate(order_now):
            digit = (idx // strides_now[pos]) % dims_now[pos]
            out += digit * target[s]
        return out

    total = prod(dims_vol)
    return sparse.coo_matrix(
        (big.data, (remap(big.row), remap(big.col))), shape=(total, total)
    ).tocsr()


def conditional_expectation(full: np.ndarray, volume, y, site_dims=None) -> LocalOperator:
    """Normalized partial trace onto the region y.

    Traces out volume - y and divides by the traced dimension, so the map
    is unital, norm-nonincreasing, and inverts embed on operators that
    are already supported in y.
    """
    vol = tuple(sorted(set(volume)))
    ysites = tuple(sorted(set(y)))
    if not set(ysites) <= set(vol):
        raise ValueError(f"region {ysites} not contained in volume {vol}")
    dims = _dims(vol, site_dims)
    total = prod(dims)
    full = np.asarray(full, dtype=complex)
    if full.shape != (total, total):
        raise ValueError(f"matrix shape {full.shape} does not match volume dimension {total}")
    keep = [i for i, s in enumerate(vol) if s in set(ysites)]
    drop = [i for i, s in enumerate(vol) if s not in set(ysites)]
    n = len(vol)
    t = full.reshape(dims + dims)
    # einsum with repeated labels on traced legs
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in drop:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    sub = "".join(row) + "".join(col) + "->" + out
    reduced = np.einsum(sub, t)
    dim_y = prod(_dims(ysites, site_dims)) if ysites else 1
    reduced = reduced.reshape(dim_y, dim_y)
    traced_dim = total // dim_y
    return LocalOperator(ysites, reduced / traced_dim, site_dims)


def commutator_local(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """[a, b] supported on the union of supports; exactly zero (without
    forming any product) when the supports are disjoint."""
    for s in set(a.support) & set(b.support):
        if _site_dim(s, a.site_dims) != _site_dim(s, b.site_dims):
            raise ValueError(f"site {s!r} has conflicting local dimensions")
    union = tuple(sorted(set(a.support) | set(b.support)))
    merged = dict(a.site_dims or {})
    merged.update(b.site_dims or {})
    dims = merged or None
    if not (set(a.support) & set(b.support)):
        d = prod(_dims(union, dims))
        return LocalOperator(union, np.zeros((d, d), dtype=complex), dims)
    am = embed(a, union, dims)
    bm = embed(b, union, dims)
    return LocalOperator(union, am @ bm - bm @ am, dims)


def fattening(lat: Lattice, x_support, n: int) -> tuple:
    """Sites within graph distance n of the set x_support."""
    xs = set(x_support)
    idx = [lat.index(s) for s in xs]
    d = lat._dist[idx, :].min(axis=0)
    return tuple(s for j, s in enumerate(lat.sites) if d[j] <= n)


def delta_decomposition(evolved: np.ndarray, x_support, lat: Lattice,
                        site_dims=None) -> list[LocalOperator]:
    """Split a full-volume operator into shells around x_support.

    Delta_0 lives on x_support itself, Delta_n on the n-fattening, and the
    embedded sum over all shells reconstructs the input exactly
    (telescoping of normalized partial traces).
    """
    if not x_support:
        raise ValueError("x_support must be nonempty")
    volume = lat.sites
    prev = None
    deltas: list[LocalOperator] = []
    for n in range(lat.diameter + 1):
        region = fattening(lat, x_support, n)
        cur = conditional_expectation(evolved, volume, region, site_dims)
        if prev is None:
            deltas.append(cur)
        else:
            prev_up = embed(prev, region, site_dims)
            deltas.append(LocalOperator(region, cur.matrix - prev_up, site_dims))
        prev = cur
        if len(region) == len(volume):
            break
    return deltas


def reconstruct(deltas: list[LocalOperator], volume, site_dims=None) -> np.ndarray:
    total = prod(_dims(tuple(sorted(set(volume))), site_dims))
    out = np.zeros((total, total), dtype=complex)
    for d in deltas:
        out += embed(d, volume, site_dims)
    return out
