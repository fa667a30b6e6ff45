"""Finite differences on the cylinder [0, 1] x (periodic box)^n.

The background metric is flat with a constant surrogate Schouten tensor
``lambda0 * I``.  A field stores ``Nt + 2`` time levels (the two boundary
slices plus ``Nt`` interior levels) of an ``N^n`` periodic spatial grid.

All discrete derivatives are second-order central stencils, and the
linearized operator is the exact Jacobian of the discrete residual, so the
Newton iteration in :mod:`sigmak.solver` converges quadratically.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import symk
from .errors import DomainError


@dataclass(frozen=True)
class GridGeometry:
    n: int
    k: int
    N: int
    Nt: int
    L: float = 2 * np.pi
    lambda0: float = 0.5

    def __post_init__(self):
        if self.k < 1 or 2 * self.k > self.n:
            raise DomainError(f"2k <= n violated (n={self.n}, k={self.k})")
        if self.N < 4:
            raise DomainError(f"N must be >= 4, got {self.N}")
        if self.Nt < 3:
            raise DomainError(f"Nt must be >= 3, got {self.Nt}")
        if not self.lambda0 > 0:
            raise DomainError(f"lambda0 must be positive, got {self.lambda0}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")

    @property
    def hx(self) -> float:
        return self.L / self.N

    @property
    def ht(self) -> float:
        return 1.0 / (self.Nt + 1)

    @property
    def shape(self) -> tuple:
        return (self.Nt + 2,) + (self.N,) * self.n

    @property
    def slice_shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def interior_shape(self) -> tuple:
        return (self.Nt,) + (self.N,) * self.n

    @property
    def n_interior(self) -> int:
        return self.Nt * self.N**self.n

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt + 2) * self.ht

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.hx

    def t_field(self) -> np.ndarray:
        """Time coordinate broadcast to the full field shape."""
        return np.broadcast_to(self.t.reshape((-1,) + (1,) * self.n), self.shape)

    def coords(self) -> list[np.ndarray]:
        """Spatial coordinate arrays of shape ``slice_shape``."""
        return list(np.meshgrid(*([self.x] * self.n), indexing="ij"))

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "N": self.N, "Nt": self.Nt, "L": self.L, "lambda0": self.lambda0}


@dataclass(frozen=True)
class SpaceTimeField:
    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.geometry.shape:
            raise DomainError(f"field shape {v.shape} does not match geometry {self.geometry.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    @property
    def u0(self) -> np.ndarray:
        return self.values[0]

    @property
    def u1(self) -> np.ndarray:
        return self.values[-1]

    def with_interior(self, interior) -> "SpaceTimeField":
        v = self.values.copy()
        v[1:-1] = np.reshape(interior, self.geometry.interior_shape)
        return SpaceTimeField(self.geometry, v)

    def __sub__(self, other: "SpaceTimeField") -> np.ndarray:
        return self.values - other.values


@dataclass(frozen=True)
class PointState:
    utt: float
    grad_ut: np.ndarray
    A: np.ndarray
    E: np.ndarray
    admissible: symk.ConeLabel


# --------------------------------------------------------------------------
# stencils
#
# A stencil is a dict mapping an offset (dt, dx_1, ..., dx_n) to a weight.


def _unit(n, a, s=1):
    d = [0] * n
    d[a] = s
    return tuple(d)


def _stencils(geom: GridGeometry):
    n, hx, ht = geom.n, geom.hx, geom.ht
    zero = (0,) * n
    tt = {(-1,) + zero: 1 / ht**2, (0,) + zero: -2 / ht**2, (1,) + zero: 1 / ht**2}
    grad, hess, grad_t = [], {}, []
    for a in range(n):
        grad.append({(0,) + _unit(n, a): 0.5 / hx, (0,) + _unit(n, a, -1): -0.5 / hx})
        hess[a, a] = {
            (0,) + _unit(n, a): 1 / hx**2,
            (0,) + zero: -2 / hx**2,
            (0,) + _unit(n, a, -1): 1 / hx**2,
        }
        w = 0.25 / (ht * hx)
        grad_t.append({(1,) + _unit(n, a): w, (1,) + _unit(n, a, -1): -w, (-1,) + _unit(n, a): -w, (-1,) + _unit(n, a, -1): w})
    w = 0.25 / hx**2
    for a, b in itertools.combinations(range(n), 2):
        pp = tuple(np.add(_unit(n, a), _unit(n, b)))
        pm = tuple(np.add(_unit(n, a), _unit(n, b, -1)))
        mp = tuple(np.add(_unit(n, a, -1), _unit(n, b)))
        mm = tuple(np.add(_unit(n, a, -1), _unit(n, b, -1)))
        hess[a, b] = {(0,) + pp: w, (0,) + pm: -w, (0,) + mp: -w, (0,) + mm: w}
    return tt, grad, hess, grad_t


def _shift(values: np.ndarray, off, levels: slice):
    """``values[j + dt, x + dx]`` for ``j`` in ``levels`` (periodic in x)."""
    dt, dx = off[0], off[1:]
    start = levels.start + dt
    stop = levels.stop + dt
    block = values[start:stop]
    if any(dx):
        axes = tuple(range(1, len(dx) + 1))
        block = np.roll(block, tuple(-d for d in dx), axis=axes)
    return block


def _apply(values, stencil, levels):
    out = None
    for off, w in stencil.items():
        term = w * _shift(values, off, levels)
        out = term if out is None else out + term
    return out


def _interior(geom):
    return slice(1, geom.Nt + 1)


def _all_levels(geom):
    return slice(0, geom.Nt + 2)


# --------------------------------------------------------------------------
# pointwise quantities


@dataclass
class Derivatives:
    """Discrete derivatives on interior levels, point axes leading."""

    utt: np.ndarray  # interior_shape
    grad: np.ndarray  # interior_shape + (n,)
    hess: np.ndarray  # interior_shape + (n, n)
    grad_t: np.ndarray  # interior_shape + (n,)


def _spatial_derivs(geom, values, levels):
    _, grad_s, hess_s, _ = _stencils(geom)
    n = geom.n
    grad = np.stack([_apply(values, s, levels) for s in grad_s], axis=-1)
    shape = grad.shape[:-1] + (n, n)
    hess = np.empty(shape)
    for (a, b), s in hess_s.items():
        hess[..., a, b] = _apply(values, s, levels)
        hess[..., b, a] = hess[..., a, b]
    return grad, hess


def derivatives(u: SpaceTimeField) -> Derivatives:
    geom = u.geometry
    tt, _, _, grad_t_s = _stencils(geom)
    lv = _interior(geom)
    grad, hess = _spatial_derivs(geom, u.values, lv)
    utt = _apply(u.values, tt, lv)
    grad_t = np.stack([_apply(u.values, s, lv) for s in grad_t_s], axis=-1)
    return Derivatives(utt, grad, hess, grad_t)


def schouten_from(lambda0, grad, hess):
    n = grad.shape[-1]
    eye = np.eye(n)
    g2 = np.sum(grad * grad, axis=-1)[..., None, None]
    return lambda0 * eye + hess + grad[..., :, None] * grad[..., None, :] - 0.5 * g2 * eye


def schouten_field(u: SpaceTimeField, interior_only: bool = True) -> np.ndarray:
    """Discrete ``A_u`` at every interior point (or every level)."""
    geom = u.geometry
    lv = _interior(geom) if interior_only else _all_levels(geom)
    grad, hess = _spatial_derivs(geom, u.values, lv)
    return schouten_from(geom.lambda0, grad, hess)


def schouten_at(u: SpaceTimeField, point) -> np.ndarray:
    """``A_u`` at one grid point ``(j, i_1, ..., i_n)``; boundary levels allowed."""
    j = point[0]
    geom = u.geometry
    if not 0 <= j <= geom.Nt + 1:
        raise DomainError(f"time level {j} out of range")
    return schouten_field(u, interior_only=False)[tuple(point)]


def fk_pointwise(utt, A, p, k: int):
    """``utt sigma_k(A) - <T_{k-1}(A), p p^T>`` evaluated in the eigenbasis of A."""
    lam, Q = np.linalg.eigh(A)
    sig = symk.sigma_all(lam)[..., k]
    part = symk.sigma_k_partial_all(lam, k - 1)
    pq = np.einsum("...ji,...j->...i", Q, p)
    return utt * sig - np.sum(part * pq * pq, axis=-1)


def fk_field(u: SpaceTimeField) -> np.ndarray:
    """``F_k(u)`` on interior points."""
    d = derivatives(u)
    A = schouten_from(u.geometry.lambda0, d.grad, d.hess)
    return fk_pointwise(d.utt, A, d.grad_t, u.geometry.k)


def source_array(geom: GridGeometry, f) -> np.ndarray:
    """Normalize a right-hand side (scalar, interior array, or field) to interior shape."""
    if isinstance(f, SpaceTimeField):
        return f.interior
    f = np.asarray(f, dtype=float)
    if f.shape == geom.shape:
        return f[1:-1]
    return np.broadcast_to(f, geom.interior_shape).copy()


def residual(u: SpaceTimeField, f) -> np.ndarray:
    """``F_k(u) - f`` on interior points."""
    return fk_field(u) - source_array(u.geometry, f)


def point_state(u: SpaceTimeField, point) -> PointState:
    """Pointwise data at an interior point ``(j, i_1, ..., i_n)`` with ``1 <= j <= Nt``."""
    geom = u.geometry
    j = point[0]
    if not 1 <= j <= geom.Nt:
        raise DomainError(f"point {tuple(point)} is not interior")
    d = derivatives(u)
    idx = (j - 1,) + tuple(point[1:])
    A = schouten_from(geom.lambda0, d.grad[idx], d.hess[idx])
    utt, p = float(d.utt[idx]), d.grad_t[idx]
    E = symk.e_matrix(A, utt, p)
    return PointState(utt, p, A, E, symk.cone_test_matrix(A, geom.k))


# --------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class AdmissibilityReport:
    cone: symk.ConeLabel
    cone_point: tuple
    utt_min: float
    utt_point: tuple
    fk_min: float
    fk_point: tuple

    def positive(self, floor: float = 0.0) -> bool:
        return self.cone.margin > floor and self.utt_min > floor and self.fk_min > floor

    def to_dict(self) -> dict:
        return {
            "cone_margin": self.cone.margin,
            "cone_point": list(self.cone_point),
            "utt_min": self.utt_min,
            "utt_point": list(self.utt_point),
            "fk_min": self.fk_min,
            "fk_point": list(self.fk_point),
        }


def _grid_point(flat_index, interior_shape):
    idx = np.unravel_index(int(flat_index), interior_shape)
    return (int(idx[0]) + 1,) + tuple(int(i) for i in idx[1:])


def admissibility_scan(u: SpaceTimeField) -> AdmissibilityReport:
    """Worst cone margin of ``A_u``, worst ``u_tt`` and worst ``F_k`` over interior points.

    Points are reported as full-grid indices ``(j, i_1, ..., i_n)``.
    """
    geom = u.geometry
    d = derivatives(u)
    A = schouten_from(geom.lambda0, d.grad, d.hess)
    lam, Q = np.linalg.eigh(A)
    margin = symk.cone_margin(lam, geom.k)
    sig = symk.sigma_all(lam)[..., geom.k]
    part = symk.sigma_k_partial_all(lam, geom.k - 1)
    pq = np.einsum("...ji,...j->...i", Q, d.grad_t)
    fk = d.utt * sig - np.sum(part * pq * pq, axis=-1)
    shape = geom.interior_shape
    im, iu, iF = np.argmin(margin), np.argmin(d.utt), np.argmin(fk)
    m = float(margin.flat[im])
    return AdmissibilityReport(
        symk.ConeLabel(geom.k, m > 0, m),
        _grid_point(im, shape),
        float(d.utt.flat[iu]),
        _grid_point(iu, shape),
        float(fk.flat[iF]),
        _grid_point(iF, shape),
    )


# --------------------------------------------------------------------------
# linearization


@dataclass
class LinearOperator:
    """Stencil coefficient table: offset -> coefficient on every interior point."""

    geometry: GridGeometry
    coeffs: dict = field(default_factory=dict)

    def add(self, stencil, coef):
        for off, w in stencil.items():
            if off in self.coeffs:
                self.coeffs[off] = self.coeffs[off] + w * coef
            else:
                self.coeffs[off] = w * coef

    def apply(self, v) -> np.ndarray:
        """Apply to a full field (boundary levels included); returns interior values."""
        v = v.values if isinstance(v, SpaceTimeField) else np.asarray(v, dtype=float)
        lv = _interior(self.geometry)
        out = np.zeros(self.geometry.interior_shape)
        for off, c in self.coeffs.items():
            out += c * _shift(v, off, lv)
        return out

    def matrix(self) -> sp.csr_matrix:
        """Sparse matrix acting on interior unknowns (zero Dirichlet data)."""
        geom = self.geometry
        cols_of = _column_indices(geom)
        P = geom.n_interior
        rows_all, cols_all, vals_all = [], [], []
        rows = np.arange(P)
        for off, c in self.coeffs.items():
            cols = cols_of(off)
            keep = cols >= 0
            rows_all.append(rows[keep])
            cols_all.append(cols[keep])
            vals_all.append(np.ravel(c)[keep])
        M = sp.coo_matrix(
            (np.concatenate(vals_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
            shape=(P, P),
        )
        return M.tocsr()


def _column_indices(geom):
    slab = geom.N**geom.n
    full = np.arange(int(np.prod(geom.shape))).reshape(geom.shape)
    lv = _interior(geom)

    def cols(off):
        c = np.ravel(_shift(full, off, lv)) - slab
        c[(c < 0) | (c >= geom.n_interior)] = -1
        return c

    return cols


@dataclass
class Linearization:
    operator: LinearOperator
    symbol_min_eig: np.ndarray
    ctt: np.ndarray
    hess_coef: np.ndarray
    grad_coef: np.ndarray
    mixed_coef: np.ndarray


def _check_admissible(geom, d, A, fk):
    lam = np.linalg.eigvalsh(A)
    margin = symk.cone_margin(lam, geom.k)
    bad = (margin <= 0) | (d.utt <= 0) | (fk <= 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        pt = _grid_point(i, geom.interior_shape)
        raise DomainError(
            f"inadmissible point {pt}: cone margin {margin.flat[i]:.3e}, "
            f"u_tt {d.utt.flat[i]:.3e}, F_k {fk.flat[i]:.3e}"
        )


def linearize(u: SpaceTimeField, f=None) -> Linearization:
    """Jacobian of the discrete residual at ``u``, assembled from the E-form coefficients.

    ``v_tt`` coefficient ``u_tt^{-1} F + u_tt^{-k} <T, p p^T>``, Hessian
    coefficient ``u_tt^{2-k} T``, mixed coefficient ``-2 u_tt^{1-k} T p``
    and the first-order part coming from the variation of ``A_u``, with
    ``T = T_{k-1}(E_u)`` and ``p = grad u_t``.  ``F`` is ``F_k(u)`` itself,
    which makes this the exact derivative; ``f`` is accepted for symmetry
    with :func:`residual` and is not needed.
    """
    geom = u.geometry
    n, k = geom.n, geom.k
    d = derivatives(u)
    A = schouten_from(geom.lambda0, d.grad, d.hess)
    fk = fk_pointwise(d.utt, A, d.grad_t, k)
    _check_admissible(geom, d, A, fk)

    utt = d.utt
    p = d.grad_t
    E = utt[..., None, None] * A - p[..., :, None] * p[..., None, :]
    T = symk.newton_transform(E, k - 1)
    Tp = np.einsum("...ij,...j->...i", T, p)
    pTp = np.sum(Tp * p, axis=-1)

    ctt = fk / utt + utt ** (-k) * pTp
    M = (utt ** (2 - k))[..., None, None] * T
    mixed = -2 * (utt ** (1 - k))[..., None] * Tp
    trT = np.trace(T, axis1=-2, axis2=-1)
    Tg = np.einsum("...ij,...j->...i", T, d.grad)
    bvec = (utt ** (2 - k))[..., None] * (2 * Tg - trT[..., None] * d.grad)

    tt_s, grad_s, hess_s, grad_t_s = _stencils(geom)
    op = LinearOperator(geom)
    op.add(tt_s, ctt)
    for (a, b), s in hess_s.items():
        op.add(s, M[..., a, b] if a == b else 2 * M[..., a, b])
    for a in range(n):
        op.add(grad_s[a], bvec[..., a])
        op.add(grad_t_s[a], mixed[..., a])

    sym = np.empty(utt.shape + (n + 1, n + 1))
    sym[..., 0, 0] = ctt
    sym[..., 0, 1:] = 0.5 * mixed
    sym[..., 1:, 0] = 0.5 * mixed
    sym[..., 1:, 1:] = M
    min_eig = np.linalg.eigvalsh(sym)[..., 0]
    return Linearization(op, min_eig, ctt, M, bvec, mixed)


def schouten_variation(u: SpaceTimeField, v: SpaceTimeField) -> np.ndarray:
    """Discrete ``L_{A_u} v = hess v + grad u (x) grad v + grad v (x) grad u - <grad u, grad v> I``."""
    geom = u.geometry
    lv = _interior(geom)
    gu, _ = _spatial_derivs(geom, u.values, lv)
    gv, hv = _spatial_derivs(geom, v.values, lv)
    outer = gu[..., :, None] * gv[..., None, :]
    dot = np.sum(gu * gv, axis=-1)[..., None, None]
    return hv + outer + np.swapaxes(outer, -1, -2) - dot * np.eye(geom.n)


# --------------------------------------------------------------------------
# quadratic form


def _e_and_t(u: SpaceTimeField, point):
    st = point_state(u, point)
    T = symk.newton_transform(st.E, u.geometry.k - 1)
    return st, T


def q_form(u: SpaceTimeField, point, Dphi, Dpsi) -> float:
    """``Q_u(D phi, D psi)`` at an interior point.

    ``Dphi`` and ``Dpsi`` are space-time gradients ``(phi_t, grad phi)``.
    """
    st, T = _e_and_t(u, point)
    k = u.geometry.k
    Dphi, Dpsi = np.asarray(Dphi, float), np.asarray(Dpsi, float)
    phit, gphi = Dphi[0], Dphi[1:]
    psit, gpsi = Dpsi[0], Dpsi[1:]
    p, utt = st.grad_ut, st.utt

    def box(a, b):
        return np.outer(a, b) + np.outer(b, a)

    inner = utt * box(gphi, gpsi) - phit * box(p, gpsi) - psit * box(p, gphi) + 2 * phit * psit / utt * np.outer(p, p)
    return float(utt ** (1 - k) * symk.frob(T, inner))


def q_form_square(u: SpaceTimeField, point, Dphi) -> float:
    """``Q_u(D phi, D phi)`` through the completed square ``2 u_tt^{1-k} <T, Y (x) Y>``."""
    st, T = _e_and_t(u, point)
    Dphi = np.asarray(Dphi, float)
    r = np.sqrt(st.utt)
    Y = r * Dphi[1:] - Dphi[0] * st.grad_ut / r
    return float(2 * st.utt ** (1 - u.geometry.k) * Y @ T @ Y)


# --------------------------------------------------------------------------
# fields


def comparison_field(geom: GridGeometry, a: float, u0, u1) -> SpaceTimeField:
    """``U_a = a t (1 - t) + (1 - t) u0 + t u1`` on the grid."""
    u0 = np.broadcast_to(np.asarray(u0, float), geom.slice_shape)
    u1 = np.broadcast_to(np.asarray(u1, float), geom.slice_shape)
    t = geom.t.reshape((-1,) + (1,) * geom.n)
    vals = a * t * (1 - t) + (1 - t) * u0 + t * u1
    vals[0], vals[-1] = u0, u1
    return SpaceTimeField(geom, vals)


def homogeneous_constant(geom: GridGeometry, c: float) -> float:
    """``a`` with ``2 a lambda0^k C(n, k) = c``: ``U_{-a}`` solves ``F_k = c`` for zero data."""
    return c / (2 * geom.lambda0**geom.k * comb(geom.n, geom.k))


def e_cone_chain_slack(u: SpaceTimeField) -> tuple[float, float]:
    """Worst E_u cone margin and worst slack of the ``sigma_{i-1}(E)`` lower bounds, 2 <= i <= k."""
    geom = u.geometry
    k = geom.k
    d = derivatives(u)
    A = schouten_from(geom.lambda0, d.grad, d.hess)
    E = d.utt[..., None, None] * A - d.grad_t[..., :, None] * d.grad_t[..., None, :]
    sE = symk.sigma_all(np.linalg.eigvalsh(E))
    sA = symk.sigma_all(np.linalg.eigvalsh(A))
    e_margin = float(np.min(sE[..., 1 : k + 1]))
    worst = np.inf
    utt = d.utt
    for i in range(2, k + 1):
        fi = utt ** (1 - i) * sE[..., i]
        rhs = fi / sA[..., i] * sA[..., i - 1] * utt ** (i - 2)
        scale = np.maximum(1.0, np.abs(sE[..., i - 1]))
        worst = min(worst, float(np.min((sE[..., i - 1] - rhs) / scale)))
    return e_margin, worst


# --------------------------------------------------------------------------
# serialization


def save_field(u: SpaceTimeField, stem) -> tuple[Path, Path]:
    """Write ``<stem>.bin`` (little-endian float64, t-outermost) and ``<stem>.json``."""
    stem = Path(stem)
    bin_path = stem.with_suffix(".bin")
    hdr_path = stem.with_suffix(".json")
    np.ascontiguousarray(u.values, dtype="<f8").tofile(bin_path)
    hdr = u.geometry.to_dict() | {"dtype": "float64", "order": "t-outermost row-major", "shape": list(u.geometry.shape)}
    hdr_path.write_text(json.dumps(hdr, indent=2, sort_keys=True) + "\n")
    return bin_path, hdr_path


def load_field(stem) -> SpaceTimeField:
    stem = Path(stem)
    hdr = json.loads(stem.with_suffix(".json").read_text())
    geom = GridGeometry(hdr["n"], hdr["k"], hdr["N"], hdr["Nt"], hdr["L"], hdr["lambda0"])
    vals = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    if vals.size != int(np.prod(geom.shape)):
        raise DomainError(f"{stem}: expected {np.prod(geom.shape)} values, found {vals.size}")
    return SpaceTimeField(geom, vals.reshape(geom.shape))


def export_slice_csv(u: SpaceTimeField, level: int, path) -> Path:
    """One time level as CSV rows ``x_1, ..., x_n, u``."""
    geom = u.geometry
    if not 0 <= level <= geom.Nt + 1:
        raise DomainError(f"time level {level} out of range 0..{geom.Nt + 1}")
    path = Path(path)
    coords = [c.ravel() for c in geom.coords()]
    vals = u.values[level].ravel()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{a + 1}" for a in range(geom.n)] + ["u"])
        for row in zip(*coords, vals):
            w.writerow([repr(float(v)) for v in row])
    return path
