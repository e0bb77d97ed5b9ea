"""Interactions (maps from finite site sets to Hermitian terms), smooth
time-dependent schedules with analytic derivatives, Hamiltonian assembly,
weighted interaction norms, and commutator interactions."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from math import prod

import numpy as np

from .lattice import DecayProfile, Lattice, graph_distance
from .operators import (
    LocalOperator,
    _dims,
    commutator_local,
    embed,
    local_operator_from_json,
    sigma_x,
    sigma_z,
    spectral_norm,
)

HERMITICITY_TOL = 1e-12


@dataclass
class Interaction:
    """Finite-range interaction: a term per finite site set.

    Terms are Hermitian unless the interaction is explicitly flagged
    otherwise (commutator interactions carry anti-Hermitian terms).
    """

    terms: dict  # frozenset(sites) -> LocalOperator
    range_r: int | None = None
    hermitian: bool = True

    def __post_init__(self):
        clean = {}
        for key, op in self.terms.items():
            key = frozenset(key)
            if not set(op.support) <= key:
                raise ValueError(f"term support {op.support} exceeds its set {set(key)}")
            if self.hermitian and not op.is_hermitian(
                HERMITICITY_TOL * max(1.0, abs(op.matrix).max())
            ):
                raise ValueError(f"term on {set(key)} is not Hermitian")
            clean[key] = op
        self.terms = clean

    def supports(self):
        return list(self.terms)

    def term_norms(self) -> dict:
        return {key: spectral_norm(op.matrix) for key, op in self.terms.items()}

    def __add__(self, other: "Interaction") -> "Interaction":
        out = dict(self.terms)
        for k, op in other.terms.items():
            if k in out:
                vol = tuple(sorted(k))
                base = embed(out[k], vol, out[k].site_dims)
                add = embed(op, vol, op.site_dims)
                out[k] = LocalOperator(vol, base + add, op.site_dims)
            else:
                out[k] = op
        return Interaction(out, hermitian=self.hermitian and other.hermitian)

    def scaled(self, c: float) -> "Interaction":
        return Interaction(
            {k: LocalOperator(op.support, c * op.matrix, op.site_dims) for k, op in self.terms.items()},
            self.range_r,
            self.hermitian,
        )


def interaction_range(phi: Interaction, lat: Lattice) -> int:
    r = 0
    for key in phi.terms:
        sites = list(key)
        for i, a in enumerate(sites):
            for b in sites[i + 1 :]:
                r = max(r, graph_distance(lat, a, b))
    return r


def interaction_from_json(obj, site_dims=None) -> Interaction:
    """Custom interaction from a list of {"support": [...], "matrix": [[[re,im],...],...]}."""
    terms = {}
    for entry in obj:
        op = local_operator_from_json(entry, site_dims)
        key = frozenset(op.support)
        if key in terms:
            raise ValueError(f"duplicate term on {set(key)}")
        terms[key] = op
    return Interaction(terms)


def assemble_hamiltonian(phi: Interaction, volume, site_dims=None) -> np.ndarray:
    """H = sum over term sets of the embedded term."""
    vol = tuple(sorted(set(volume)))
    total = prod(_dims(vol, site_dims))
    h = np.zeros((total, total), dtype=complex)
    for key, op in phi.terms.items():
        if not key <= set(vol):
            raise ValueError(f"term on {set(key)} lies outside the volume")
        h += embed(op, vol, site_dims)
    if phi.hermitian:
        herm = np.abs(h - h.conj().T).max()
        if herm > HERMITICITY_TOL * max(1.0, np.abs(h).max()):
            raise ValueError(f"assembled Hamiltonian not Hermitian: deviation {herm}")
    return h


def interaction_norm(phi, prof: DecayProfile, n: int, lat: Lattice,
                     s_grid=None) -> float:
    """Weighted interaction norm: the largest, over site pairs (x, y), of
    sum over term sets Z containing both x and y of |Z|^n ||Phi(Z)||,
    divided by F_zeta(d(x, y)).  Schedules are scanned over s_grid
    (default 21 points) with the per-term supremum inside the sum."""
    if isinstance(phi, Schedule):
        if s_grid is None:
            s_grid = np.linspace(0.0, 1.0, 21)
        sup_norms: dict = {}
        for s in s_grid:
            inter = phi.eval(float(s), 0)
            for key, op in inter.terms.items():
                v = spectral_norm(op.matrix)
                if v > sup_norms.get(key, 0.0):
                    sup_norms[key] = v
    else:
        sup_norms = {key: spectral_norm(op.matrix) for key, op in phi.terms.items()}

    best = 0.0
    for x in lat.sites:
        for y in lat.sites:
            total = 0.0
            for key, nm in sup_norms.items():
                if x in key and y in key:
                    total += len(key) ** n * nm
            if total:
                best = max(best, total / float(prof.f_zeta(graph_distance(lat, x, y))))
    return best


def commutator_interaction(phi_h: Interaction, phi_g: Interaction) -> Interaction:
    """Interaction for [H, G]: terms [Phi_H(X), Phi_G(Y)] collected on
    X union Y over pairs with X intersect Y nonempty.  Assembling the
    result reproduces the matrix commutator exactly; its terms are
    anti-Hermitian, so the result is flagged non-Hermitian."""
    acc: dict = {}
    for kx, ox in phi_h.terms.items():
        for ky, oy in phi_g.terms.items():
            if not (kx & ky):
                continue
            c = commutator_local(ox, oy)
            key = kx | ky
            if key in acc:
                acc[key] = acc[key] + c.matrix
            else:
                acc[key] = c.matrix
    terms = {
        key: LocalOperator(tuple(sorted(key)), mat) for key, mat in acc.items()
    }
    return Interaction(terms, hermitian=False)


# ---------------------------------------------------------------------------
# schedules: coefficient functions with derivatives of all needed orders
# ---------------------------------------------------------------------------


class Coefficient:
    """Scalar function of s in [0, 1] with k-th derivative evaluation.

    Evaluation slightly outside [0, 1] must be supported (nested central
    differences near the endpoints step outside); ramps extend flatly.
    """

    smoothness: int = 64

    def __call__(self, s: float, k: int = 0) -> float:
        raise NotImplementedError

    def flat_at(self, endpoint: float) -> bool:
        """True when every derivative of order >= 1 vanishes at the endpoint."""
        return False


class PolyCoeff(Coefficient):
    def __init__(self, coeffs):
        self.coeffs = [float(c) for c in coeffs]

    def __call__(self, s: float, k: int = 0) -> float:
        total = 0.0
        for j, c in enumerate(self.coeffs):
            if j >= k:
                total += c * math.perm(j, k) * s ** (j - k)
        return total

    def flat_at(self, endpoint: float) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])


class ConstCoeff(PolyCoeff):
    def __init__(self, value: float):
        super().__init__([value])


class SmoothRamp(Coefficient):
    """Normalized integral of a flat-ended bump: ramps 0 -> 1 on [0, 1].

    flat_start / flat_end make every derivative vanish at the respective
    endpoint (b(s) = exp(-1/s), exp(-1/(1-s)), or their product).  The
    ramp value is a clamped cubic spline through per-segment Gauss
    quadrature anchors (absolute error ~1e-13); derivatives of any order
    are exact via the recursion b' = b * g'.
    """

    def __init__(self, flat_start: bool = True, flat_end: bool = True, anchors: int = 2001):
        if not (flat_start or flat_end):
            raise ValueError("at least one endpoint must be flat")
        self.flat_start = flat_start
        self.flat_end = flat_end
        from scipy.interpolate import CubicSpline

        grid = np.linspace(0.0, 1.0, anchors)
        nodes, weights = np.polynomial.legendre.leggauss(12)
        a, b = grid[:-1], grid[1:]
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        vals = self._b_vec(pts)
        seg = (vals * weights[None, :]).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._norm = cum[-1]
        d0 = self._b(0.0) / self._norm
        d1 = self._b(1.0) / self._norm
        self._spline = CubicSpline(grid, cum / self._norm, bc_type=((1, d0), (1, d1)))

    def _g(self, s: float) -> float:
        g = 0.0
        if self.flat_start:
            if s <= 0.0:
                return -np.inf
            g += -1.0 / s
        if self.flat_end:
            if s >= 1.0:
                return -np.inf
            g += -1.0 / (1.0 - s)
        return g

    def _b(self, s: float) -> float:
        g = self._g(s)
        return 0.0 if g < -700.0 else math.exp(g)

    def _b_vec(self, s: np.ndarray) -> np.ndarray:
        out = np.zeros_like(s)
        interior = np.ones_like(s, dtype=bool)
        g = np.zeros_like(s)
        if self.flat_start:
            interior &= s > 0.0
            with np.errstate(divide="ignore"):
                g = g - np.where(interior, 1.0 / np.where(interior, s, 1.0), np.inf)
        if self.flat_end:
            interior &= s < 1.0
            with np.errstate(divide="ignore"):
                g = g - np.where(interior, 1.0 / np.where(interior, 1.0 - s, 1.0), np.inf)
        ok = interior & (g > -700.0)
        out[ok] = np.exp(g[ok])
        return out

    def _log_derivs(self, s: float, kmax: int) -> np.ndarray:
        out = np.zeros(kmax + 1)
        for j in range(1, kmax + 1):
            val = 0.0
            if self.flat_start:
                val += -((-1.0) ** j) * math.factorial(j) * s ** (-(j + 1))
            if self.flat_end:
                val += -math.factorial(j) * (1.0 - s) ** (-(j + 1))
            out[j] = val
        return out

    def _b_derivs(self, s: float, kmax: int) -> np.ndarray:
        """b, b', ..., b^(kmax) at s via Leibniz applied to b' = b g'."""
        b0 = self._b(s)
        out = np.zeros(kmax + 1)
        if b0 == 0.0:
            return out
        out[0] = b0
        g = self._log_derivs(s, kmax)
        for j in range(kmax):
            acc = 0.0
            for i in range(j + 1):
                acc += math.comb(j, i) * out[i] * g[j - i + 1]
            out[j + 1] = acc
        return out

    def __call__(self, s: float, k: int = 0) -> float:
        if k == 0:
            if s <= 0.0:
                return 0.0
            if s >= 1.0:
                return 1.0
            return float(self._spline(s))
        at_flat_edge = (s <= 0.0 and self.flat_start) or (s >= 1.0 and self.flat_end)
        if at_flat_edge or s < 0.0 or s > 1.0:
            return 0.0
        return float(self._b_derivs(s, k - 1)[k - 1] / self._norm)

    def flat_at(self, endpoint: float) -> bool:
        return self.flat_start if endpoint == 0.0 else self.flat_end


class AffineCoeff(Coefficient):
    """offset + scale * base(s)."""

    def __init__(self, base: Coefficient, scale: float, offset: float = 0.0):
        self.base = base
        self.scale = float(scale)
        self.offset = float(offset)

    def __call__(self, s: float, k: int = 0) -> float:
        v = self.scale * self.base(s, k)
        return v + self.offset if k == 0 else v

    def flat_at(self, endpoint: float) -> bool:
        return self.scale == 0.0 or self.base.flat_at(endpoint)


class TrigOfRamp(Coefficient):
    """amplitude * cos/sin(theta(s)) for a ramp theta.

    Orders 0 and 1 use the chain rule; higher orders fall back to an
    order-4 central finite-difference stencil on the exact first
    derivative (step 1e-3), except at flat ramp endpoints where every
    derivative vanishes identically.
    """

    fd_step = 1e-3

    def __init__(self, kind: str, theta: Coefficient, amplitude: float = 1.0):
        if kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")
        self.kind = kind
        self.theta = theta
        self.amplitude = float(amplitude)

    def _f1(self, s: float) -> float:
        th = self.theta(s, 0)
        d = self.theta(s, 1)
        base = -math.sin(th) if self.kind == "cos" else math.cos(th)
        return self.amplitude * base * d

    def __call__(self, s: float, k: int = 0) -> float:
        if k == 0:
            th = self.theta(s, 0)
            return self.amplitude * (math.cos(th) if self.kind == "cos" else math.sin(th))
        if (s <= 0.0 or s >= 1.0) and self.theta.flat_at(0.0 if s <= 0.0 else 1.0):
            return 0.0
        if k == 1:
            return self._f1(s)
        h = self.fd_step

        def deriv_of(fn):
            def d(s_):
                return (-fn(s_ + 2 * h) + 8 * fn(s_ + h) - 8 * fn(s_ - h) + fn(s_ - 2 * h)) / (12 * h)

            return d

        fn = self._f1
        for _ in range(k - 1):
            fn = deriv_of(fn)
        return fn(s)

    def flat_at(self, endpoint: float) -> bool:
        return self.theta.flat_at(endpoint)


@functools.lru_cache(maxsize=None)
def _cached_ramp(name: str) -> Coefficient:
    if name == "linear":
        return PolyCoeff([0.0, 1.0])
    if name == "quadratic":
        return PolyCoeff([0.0, 0.0, 1.0])
    if name == "smoothstart":
        return SmoothRamp(flat_start=True, flat_end=False)
    if name == "smoothstop":
        return SmoothRamp(flat_start=False, flat_end=True)
    if name == "bump":
        return SmoothRamp(flat_start=True, flat_end=True)
    raise ValueError(f"unknown ramp {name!r}")


RAMP_NAMES = ("linear", "quadratic", "smoothstart", "smoothstop", "bump")


def ramp_by_name(name: str) -> Coefficient:
    if name not in RAMP_NAMES:
        raise ValueError(f"unknown ramp {name!r}; choose from {RAMP_NAMES}")
    return _cached_ramp(name)


@dataclass
class ScheduleTerm:
    support: tuple
    matrix: np.ndarray
    coeff: Coefficient

    def __post_init__(self):
        self.support = tuple(sorted(set(self.support)))
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if np.abs(self.matrix - self.matrix.conj().T).max() > HERMITICITY_TOL * max(
            1.0, np.abs(self.matrix).max()
        ):
            raise ValueError("schedule term matrices must be Hermitian")


class Schedule:
    """Time-dependent interaction s -> Phi_s built from coefficient-times-
    matrix terms, with exact k-th derivative interactions."""

    def __init__(self, terms: list[ScheduleTerm], smoothness_m: int = 8, site_dims=None):
        self.terms = list(terms)
        self.smoothness_m = int(smoothness_m)
        self.site_dims = site_dims

    @property
    def derivatives_vanish_at_0(self) -> bool:
        return all(t.coeff.flat_at(0.0) for t in self.terms)

    @property
    def derivatives_vanish_at_1(self) -> bool:
        return all(t.coeff.flat_at(1.0) for t in self.terms)

    def available_smoothness(self) -> int:
        return min([self.smoothness_m] + [t.coeff.smoothness for t in self.terms])

    def eval(self, s: float, k: int = 0) -> Interaction:
        """The k-th s-derivative interaction at time s."""
        if k < 0 or k > self.available_smoothness():
            raise ValueError(f"derivative order {k} beyond available smoothness")
        acc: dict = {}
        for t in self.terms:
            c = t.coeff(s, k)
            key = frozenset(t.support)
            if key in acc:
                acc[key] = acc[key] + c * t.matrix
            else:
                acc[key] = c * t.matrix
        terms = {
            key: LocalOperator(tuple(sorted(key)), mat, self.site_dims)
            for key, mat in acc.items()
        }
        return Interaction(terms)

    def hamiltonian(self, volume, s: float, k: int = 0, site_dims=None) -> np.ndarray:
        return assemble_hamiltonian(self.eval(s, k), volume, site_dims or self.site_dims)


class GenericSchedule(Schedule):
    """Schedule wrapping an arbitrary s -> Interaction map; derivatives use
    an order-4 central difference (step 1e-3) term by term."""

    fd_step = 1e-3

    def __init__(self, fn, smoothness_m: int = 3, site_dims=None,
                 derivatives_vanish_at_0: bool = False,
                 derivatives_vanish_at_1: bool = False):
        self.fn = fn
        self.smoothness_m = int(smoothness_m)
        self.site_dims = site_dims
        self._flat0 = derivatives_vanish_at_0
        self._flat1 = derivatives_vanish_at_1

    @property
    def derivatives_vanish_at_0(self) -> bool:
        return self._flat0

    @property
    def derivatives_vanish_at_1(self) -> bool:
        return self._flat1

    def available_smoothness(self) -> int:
        return self.smoothness_m

    def eval(self, s: float, k: int = 0) -> Interaction:
        if k < 0 or k > self.smoothness_m:
            raise ValueError(f"derivative order {k} beyond available smoothness")
        if k == 0:
            return self.fn(s)
        h = self.fd_step
        stencil = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)]
        acc: dict = {}
        dims = self.site_dims
        for off, w in stencil:
            inter = self.eval(s + off * h, k - 1)
            for key, op in inter.terms.items():
                mat = (w / (12 * h)) * op.matrix
                if key in acc:
                    acc[key] = acc[key] + mat
                else:
                    acc[key] = mat
                dims = dims or op.site_dims
        terms = {k_: LocalOperator(tuple(sorted(k_)), m, dims) for k_, m in acc.items()}
        return Interaction(terms)


# ---------------------------------------------------------------------------
# model presets
# ---------------------------------------------------------------------------


def tfim_schedule(lat: Lattice, g0: float, g1: float, ramp="linear") -> Schedule:
    """Transverse-field Ising chain -sum sz sz - g(s) sum sx with the field
    interpolated from g0 to g1 by the named ramp."""
    theta = ramp_by_name(ramp) if isinstance(ramp, str) else ramp
    zz = -np.kron(sigma_z, sigma_z)
    terms = [ScheduleTerm((a, b), zz, ConstCoeff(1.0)) for a, b in lat.edges]
    g = AffineCoeff(theta, g1 - g0, g0)
    for x in lat.sites:
        terms.append(ScheduleTerm((x,), -sigma_x, g))
    return Schedule(terms)


def free_rotation_schedule(lat: Lattice, theta0: float, theta1: float,
                           ramp="linear", sites=None) -> Schedule:
    """Independent spins in a rotating field,
    h_x(s) = -cos(theta(s)) sz - sin(theta(s)) sx, theta: theta0 -> theta1."""
    base = ramp_by_name(ramp) if isinstance(ramp, str) else ramp
    theta = AffineCoeff(base, theta1 - theta0, theta0)
    terms = []
    for x in sites if sites is not None else lat.sites:
        terms.append(ScheduleTerm((x,), sigma_z, TrigOfRamp("cos", theta, -1.0)))
        terms.append(ScheduleTerm((x,), sigma_x, TrigOfRamp("sin", theta, -1.0)))
    return Schedule(terms)


def frozen_schedule(phi: Interaction) -> Schedule:
    """Time-independent schedule wrapping a fixed interaction."""
    terms = [
        ScheduleTerm(op.support, op.matrix, ConstCoeff(1.0)) for op in phi.terms.values()
    ]
    return Schedule(terms)


def model_preset(name: str, lat: Lattice, ramp: str = "linear") -> Schedule:
    """Parse "tfim:g0:g1" or "free:theta0:theta1" into a Schedule."""
    parts = name.split(":")
    if parts[0] == "tfim" and len(parts) == 3:
        return tfim_schedule(lat, float(parts[1]), float(parts[2]), ramp)
    if parts[0] == "free" and len(parts) == 3:
        return free_rotation_schedule(lat, float(parts[1]), float(parts[2]), ramp)
    raise ValueError(f"unknown model preset {name!r}")


class CompiledSchedule:
    """Schedule fixed to a volume: H(s, k) = sum_i c_i^(k)(s) * M_i with the
    embedded term matrices precomputed once (dense or sparse)."""

    def __init__(self, sch: Schedule, volume, site_dims=None, sparse: bool = False):
        if isinstance(sch, GenericSchedule):
            raise TypeError("generic schedules cannot be compiled; assemble per step")
        self.volume = tuple(sorted(set(volume)))
        self.coeffs = [t.coeff for t in sch.terms]
        self.sparse = sparse
        ops = [LocalOperator(t.support, t.matrix, site_dims) for t in sch.terms]
        if sparse:
            from .operators import embed_sparse

            self.mats = [embed_sparse(op, self.volume, site_dims) for op in ops]
        else:
            self.mats = [embed(op, self.volume, site_dims) for op in ops]

    @property
    def dim(self) -> int:
        return self.mats[0].shape[0]

    def hamiltonian(self, s: float, k: int = 0):
        cs = [c(s, k) for c in self.coeffs]
        if self.sparse:
            out = None
            for c, m in zip(cs, self.mats):
                if c != 0.0:
                    out = c * m if out is None else out + c * m
            return 0.0 * self.mats[0] if out is None else out
        out = np.zeros_like(self.mats[0])
        for c, m in zip(cs, self.mats):
            if c != 0.0:
                out += c * m
        return out
