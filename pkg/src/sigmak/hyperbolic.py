"""Real-rootedness, interlacing and concavity certificates for the block operator F_k.

For a symmetric block matrix ``R = [[r00, x], [x^T, r]]`` the operator is

    F_k(R) = r00 * sigma_k(r) - <T_{k-1}(r), x x^T>,

a degree ``k + 1`` homogeneous polynomial.  Hyperbolicity in the direction of
the identity, i.e. real-rootedness of ``t -> F_k(R + tI)``, is what yields
concavity of ``F_k^{1/(k+1)}`` on the cone ``S`` (``r`` in ``Gamma_k^+`` and
``F_k > 0``).  This module builds the polynomials involved, locates their
roots through companion matrices, and checks the interlacing pattern and the
concavity inequality numerically on random draws.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from . import symk
from .errors import DomainError

ROOT_TOL = 1e-8
TAU_GRID = np.linspace(0.0, 1.0, 33)


# --------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class BlockMatrix:
    """Symmetric ``(n+1) x (n+1)`` matrix split as ``r00``, ``x`` and ``r``."""

    r00: float
    x: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        r = np.asarray(self.r, dtype=float)
        if r.shape != (x.size, x.size):
            raise DomainError(f"r must be {x.size}x{x.size}, got {r.shape}")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12 * max(1.0, np.abs(r).max(initial=0))):
            raise DomainError("r must be symmetric")
        object.__setattr__(self, "r00", float(self.r00))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", 0.5 * (r + r.T))

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def from_matrix(cls, R) -> "BlockMatrix":
        R = np.asarray(R, dtype=float)
        return cls(R[0, 0], R[0, 1:], R[1:, 1:])

    @classmethod
    def identity(cls, n: int) -> "BlockMatrix":
        return cls(1.0, np.zeros(n), np.eye(n))

    def assemble(self) -> np.ndarray:
        n = self.n
        R = np.empty((n + 1, n + 1))
        R[0, 0] = self.r00
        R[0, 1:] = R[1:, 0] = self.x
        R[1:, 1:] = self.r
        return R

    def shift(self, t: float) -> "BlockMatrix":
        """``R + t I``."""
        return BlockMatrix(self.r00 + t, self.x, self.r + t * np.eye(self.n))

    def scale(self) -> float:
        """Magnitude used to normalize tolerances for degree-one homogeneous quantities."""
        return max(1.0, abs(self.r00), float(np.abs(np.linalg.eigvalsh(self.r)).max()), float(np.linalg.norm(self.x)))


@dataclass(frozen=True)
class RealPoly:
    """Univariate real polynomial, coefficients in ascending degree."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        big = np.abs(c).max(initial=0.0)
        keep = np.nonzero(np.abs(c) > 1e-14 * big)[0]
        c = c[: keep[-1] + 1] if keep.size else np.zeros(1)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def leading(self) -> float:
        return float(self.coeffs[-1])

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coeffs)

    def derivative(self, m: int = 1) -> "RealPoly":
        return RealPoly(np.polynomial.polynomial.polyder(self.coeffs, m))


@dataclass(frozen=True)
class RootList:
    roots: np.ndarray
    max_imag: float


@dataclass
class CertReport:
    """Verdicts of the real-rootedness theorem, each with the slack behind it.

    Slacks are normalized by the root scale ``max(1, |roots|)`` and are
    non-negative when the corresponding property holds.
    """

    real_rooted: bool
    interlaced: bool
    localized: bool
    localized_wide: bool
    concavity_slack_min: float | None = None
    samples: int = 1
    imag_ratio_max: float = 0.0
    interlace_slack_min: float = np.inf
    localize_slack_min: float = np.inf
    localize_wide_slack_min: float = np.inf
    leading_coeff_p: float | None = None
    leading_coeff_q_min: float | None = None

    @property
    def ok(self) -> bool:
        return self.real_rooted and self.interlaced and self.localized


# --------------------------------------------------------------------------
# the operator


def _check_k(n, k):
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")


def fk_eig_batch(r00, x, r, k: int):
    """Vectorized ``F_k`` over leading axes of ``r00 (B,)``, ``x (B, n)``, ``r (B, n, n)``.

    Also returns the eigenvalues of ``r`` so callers can reuse them.
    """
    r = np.asarray(r, dtype=float)
    n = r.shape[-1]
    _check_k(n, k)
    lam, Q = np.linalg.eigh(r)
    y = np.einsum("...ji,...j->...i", Q, np.asarray(x, dtype=float))
    part = symk.sigma_k_partial_all(lam, k - 1)
    return np.asarray(r00) * symk.sigma_all(lam)[..., k] - np.sum(part * y**2, axis=-1), lam


def fk_batch(r00, x, r, k: int):
    return fk_eig_batch(r00, x, r, k)[0]


def eval_Fk(R: BlockMatrix, k: int) -> float:
    _check_k(R.n, k)
    T = symk.newton_transform(R.r, k - 1)
    return float(R.r00 * symk.sigma_k_matrix(R.r, k) - R.x @ T @ R.x)


def eval_Fk_rank_one(R: BlockMatrix, k: int) -> float:
    """``r00^{1-k} sigma_k(r00 r - x x^T)``, valid for ``r00 > 0``."""
    if R.r00 <= 0:
        raise DomainError("rank-one form needs r00 > 0")
    _check_k(R.n, k)
    return float(R.r00 ** (1 - k) * symk.sigma_k_matrix(R.r00 * R.r - np.outer(R.x, R.x), k))


# --------------------------------------------------------------------------
# polynomials; the ``*_coeffs`` helpers are batched over leading axes of ``lam``


def _pi_coeffs(lam):
    """Ascending coefficients of ``prod_j (t + lam_j)``: the t^m coefficient is ``sigma_{n-m}``."""
    return symk.sigma_all(lam)[..., ::-1]


def _derivative_coeffs(c, m: int):
    """m-th derivative divided by m!, ascending coefficients along the last axis."""
    deg = c.shape[-1] - 1
    if m > deg:
        return np.zeros(c.shape[:-1] + (1,))
    j = np.arange(m, deg + 1)
    weights = np.array([comb(int(jj), m) for jj in j], dtype=float)
    return c[..., m:] * weights


def shifted_sigma_coeffs(lam, k: int):
    """``sigma_k(lam + t)`` via ``sum_j C(n-j, k-j) sigma_j(lam) t^{k-j}``."""
    n = lam.shape[-1]
    e = symk.sigma_all(lam)
    out = np.zeros(lam.shape[:-1] + (k + 1,))
    for j in range(k + 1):
        out[..., k - j] = comb(n - j, k - j) * e[..., j]
    return out


def shifted_sigma_coeffs_derivative(lam, k: int):
    """``sigma_k(lam + t) = pi_n^{(n-k)} / (n-k)!``."""
    n = lam.shape[-1]
    return _derivative_coeffs(_pi_coeffs(lam), n - k)


def q_coeffs_derivative(lam, k: int):
    """``q_{i,k} = pi_{i,n}^{(n-k)} / (n-k)!`` for all i; shape ``lam.shape + (k,)``."""
    n = lam.shape[-1]
    out = np.zeros(lam.shape + (k,))
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        pi_i = _pi_coeffs(rest) if rest.shape[-1] else np.ones(lam.shape[:-1] + (1,))
        d = _derivative_coeffs(pi_i, n - k)
        out[..., i, : d.shape[-1]] = d[..., :k]
    return out


def q_coeffs_alternating(lam, k: int):
    """``q_{i,k} = sum_j (-1)^j sigma_{k-1-j}(lam + t) (t + lam_i)^j`` for all i."""
    n = lam.shape[-1]
    out = np.zeros(lam.shape + (k,))
    sig = [np.ones(lam.shape[:-1] + (1,))] + [shifted_sigma_coeffs(lam, m) for m in range(1, k)]
    for i in range(n):
        li = lam[..., i]
        acc = np.zeros(lam.shape[:-1] + (k,))
        lin_pow = np.ones(lam.shape[:-1] + (1,))  # (t + lam_i)^j
        for j in range(k):
            s = sig[k - 1 - j]
            prod = _batched_polymul(s, lin_pow)
            acc[..., : prod.shape[-1]] += (-1) ** j * prod
            lin_pow = _batched_polymul(lin_pow, np.stack([li, np.ones_like(li)], axis=-1))
        out[..., i, :] = acc
    return out


def _batched_polymul(a, b):
    da, db = a.shape[-1], b.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (da + db - 1,))
    for j in range(db):
        out[..., j : j + da] += a * b[..., j : j + 1]
    return out


def p_coeffs(r00, x, r, k: int):
    """Ascending coefficients of ``F_k(R + tI)`` (batched), plus the eigen data used."""
    r = np.asarray(r, dtype=float)
    lam, Q = np.linalg.eigh(r)
    y = np.einsum("...ji,...j->...i", Q, np.asarray(x, dtype=float))
    sk = shifted_sigma_coeffs_derivative(lam, k)
    q = q_coeffs_derivative(lam, k)
    r00 = np.asarray(r00, dtype=float)
    out = np.zeros(lam.shape[:-1] + (k + 2,))
    out[..., : k + 1] += r00[..., None] * sk
    out[..., 1:] += sk
    out[..., :k] -= np.einsum("...i,...ij->...j", y**2, q)
    return out, lam


def shifted_sigma_poly(r, k: int) -> RealPoly:
    lam = symk.sym_eigvals(r)
    _check_k(lam.size, k)
    return RealPoly(shifted_sigma_coeffs(lam, k))


def shifted_sigma_poly_derivative(r, k: int) -> RealPoly:
    lam = symk.sym_eigvals(r)
    _check_k(lam.size, k)
    return RealPoly(shifted_sigma_coeffs_derivative(lam, k))


def q_poly(r, i: int, k: int) -> RealPoly:
    """``q_{i,k}`` for the i-th (1-based, ascending) eigenvalue of ``r``."""
    lam = symk.sym_eigvals(r)
    n = lam.size
    _check_k(n, k)
    if not 1 <= i <= n:
        raise DomainError(f"index i={i} out of range 1..{n}")
    return RealPoly(q_coeffs_derivative(lam, k)[i - 1])


def q_poly_alternating(r, i: int, k: int) -> RealPoly:
    lam = symk.sym_eigvals(r)
    n = lam.size
    _check_k(n, k)
    if not 1 <= i <= n:
        raise DomainError(f"index i={i} out of range 1..{n}")
    return RealPoly(q_coeffs_alternating(lam, k)[i - 1])


def p_poly(R: BlockMatrix, k: int) -> RealPoly:
    """``t -> F_k(R + tI)``, degree ``k + 1``."""
    _check_k(R.n, k)
    c, _ = p_coeffs(R.r00, R.x, R.r, k)
    return RealPoly(c)


# --------------------------------------------------------------------------
# roots


def companion_roots(coeffs) -> np.ndarray:
    """Complex roots of (a stack of) polynomials from companion-matrix eigenvalues.

    ``coeffs`` holds ascending coefficients along the last axis with a
    nonzero leading entry.  LAPACK balances the companion matrix before the
    QR iteration.
    """
    c = np.asarray(coeffs, dtype=float)
    d = c.shape[-1] - 1
    if d < 1:
        raise DomainError("degree-0 polynomial has no roots")
    lead = c[..., -1]
    if np.any(lead == 0):
        raise DomainError("leading coefficient is zero")
    C = np.zeros(c.shape[:-1] + (d, d))
    if d > 1:
        idx = np.arange(d - 1)
        C[..., idx + 1, idx] = 1.0
    C[..., :, -1] = -c[..., :-1] / lead[..., None]
    return np.linalg.eigvals(C)


def _realize(z, tol):
    scale = np.maximum(1.0, np.abs(z))
    keep = np.abs(z.imag) <= tol * scale
    return keep, np.abs(z.imag)


def real_roots(p: RealPoly, tol: float = ROOT_TOL) -> RootList:
    if p.degree < 1:
        raise DomainError("degree-0 polynomial has no roots")
    z = companion_roots(p.coeffs)
    keep, imag = _realize(z, tol)
    return RootList(roots=np.sort(z.real[keep]), max_imag=float(imag.max()))


def interlacing_slack(g, f):
    """Smallest gap in the weave of roots of ``g`` and ``f`` (``g`` interlaces ``f``).

    Both inputs are ascending root arrays (batched over leading axes).  With
    ``deg f = deg g + 1`` the chain is ``u1 <= v1 <= u2 <= ... <= v_{m-1} <= u_m``;
    with equal degree it is ``v1 <= u1 <= v2 <= ... <= v_m <= u_m``.  The gap
    is divided by the root scale.
    """
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    dg, df = g.shape[-1], f.shape[-1]
    if df == dg + 1:
        first, second = f, g
    elif df == dg:
        first, second = g, f
    else:
        raise DomainError(f"interlacing needs deg f in {{deg g, deg g + 1}}, got deg g={dg}, deg f={df}")
    m = first.shape[-1] + second.shape[-1]
    chain = np.empty(np.broadcast_shapes(first.shape[:-1], second.shape[:-1]) + (m,))
    chain[..., 0::2] = first
    chain[..., 1::2] = second
    if m < 2:
        return np.full(chain.shape[:-1], np.inf)
    scale = np.maximum(1.0, np.abs(chain).max(axis=-1))
    return np.diff(chain, axis=-1).min(axis=-1) / scale


def check_interlacing(g: RootList, f: RootList, tol: float = ROOT_TOL) -> bool:
    return bool(interlacing_slack(g.roots, f.roots) >= -tol)


# --------------------------------------------------------------------------
# theorem certificate


def _localization_slack(alpha, lam, lo: int, hi: int):
    """Distance of ``alpha[lo:hi]`` inside ``[min(-lam), max(-lam)]``, scaled."""
    if hi <= lo:
        return np.full(alpha.shape[:-1], np.inf)
    a = alpha[..., lo:hi]
    left = (-lam).min(axis=-1)[..., None]
    right = (-lam).max(axis=-1)[..., None]
    scale = np.maximum(1.0, np.maximum(np.abs(alpha).max(axis=-1), np.abs(lam).max(axis=-1)))
    return np.minimum(a - left, right - a).min(axis=-1) / scale


@dataclass
class BatchCertificate:
    """Per-sample slacks from :func:`certify_batch`."""

    imag_ratio: np.ndarray
    real_count: np.ndarray
    interlace: np.ndarray
    localize: np.ndarray
    localize_wide: np.ndarray
    lead_p: np.ndarray
    lead_q_min: np.ndarray
    q_interlace: np.ndarray


def certify_batch(r00, x, r, k: int, tol: float = ROOT_TOL) -> BatchCertificate:
    """Vectorized real-rootedness, interlacing and localization slacks."""
    r = np.asarray(r, dtype=float)
    n = r.shape[-1]
    _check_k(n, k)
    pc, lam = p_coeffs(r00, x, r, k)
    z = companion_roots(pc)
    ratio = np.abs(z.imag) / (1.0 + np.abs(z))
    keep, _ = _realize(z, tol)
    alpha = np.sort(z.real, axis=-1)
    beta = np.sort(companion_roots(shifted_sigma_coeffs(lam, k)).real, axis=-1)
    inter = interlacing_slack(beta, alpha)
    # literal reading: interior roots alpha_i for 2 <= i <= k-1; wide reading: 2 <= i <= k
    loc = _localization_slack(alpha, lam, 1, k - 1)
    loc_wide = _localization_slack(alpha, lam, 1, k)
    q = q_coeffs_derivative(lam, k)
    if k >= 2:
        qroots = np.sort(companion_roots(q).real, axis=-1)
        q_inter = interlacing_slack(qroots, beta[..., None, :]).min(axis=-1)
    else:
        q_inter = np.full(lam.shape[:-1], np.inf)
    return BatchCertificate(
        imag_ratio=ratio.max(axis=-1),
        real_count=keep.sum(axis=-1),
        interlace=inter,
        localize=loc,
        localize_wide=loc_wide,
        lead_p=pc[..., -1],
        lead_q_min=q[..., -1].min(axis=-1),
        q_interlace=q_inter,
    )


def _summarize(b: BatchCertificate, k: int, tol: float) -> CertReport:
    return CertReport(
        real_rooted=bool(np.all(b.imag_ratio <= tol) and np.all(b.real_count == k + 1)),
        interlaced=bool(np.all(b.interlace >= -tol)),
        localized=bool(np.all(b.localize >= -tol)),
        localized_wide=bool(np.all(b.localize_wide >= -tol)),
        samples=int(np.size(b.imag_ratio)),
        imag_ratio_max=float(np.max(b.imag_ratio)),
        interlace_slack_min=float(np.min(b.interlace)),
        localize_slack_min=float(np.min(b.localize)),
        localize_wide_slack_min=float(np.min(b.localize_wide)),
        leading_coeff_p=float(np.min(b.lead_p)),
        leading_coeff_q_min=float(np.min(b.lead_q_min)),
    )


def certify_theorem(R: BlockMatrix, k: int, tol: float = ROOT_TOL) -> CertReport:
    """Check that ``F_k(R + tI)`` has ``k + 1`` real roots separated by those of ``sigma_k(r + tI)``."""
    b = certify_batch(np.array([R.r00]), R.x[None], R.r[None], k, tol)
    return _summarize(b, k, tol)


# --------------------------------------------------------------------------
# concavity


@dataclass(frozen=True)
class ConcavityResult:
    slack: float
    segment_in_s: bool
    min_cone_margin: float
    min_fk: float


def in_s(R: BlockMatrix, k: int) -> bool:
    return symk.cone_test_matrix(R.r, k).inside and eval_Fk(R, k) > 0


def _lobatto(m):
    """m Chebyshev-Lobatto nodes on [0, 1], endpoints included."""
    return 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / (m - 1))


def concavity_batch(a, b, k: int, taus=TAU_GRID):
    """Concavity slack of ``F_k^{1/(k+1)}`` along segments, batched.

    ``a`` and ``b`` are ``(r00, x, r)`` triples with leading batch axes; the
    segment is ``tau a + (1 - tau) b``.  Returns ``(slack, min_margin,
    min_fk)`` per segment over the ``taus`` grid, ``slack`` normalized by
    the segment scale.

    Along a segment ``F_k`` is a polynomial of degree ``k + 1`` in ``tau`` and
    ``sigma_j(r)`` one of degree ``j``, so both are evaluated exactly at
    ``k + 2`` Lobatto nodes and interpolated onto ``taus``.
    """
    taus = np.asarray(taus, dtype=float)
    ra00, xa, ra = (np.asarray(v, dtype=float) for v in a)
    rb00, xb, rb = (np.asarray(v, dtype=float) for v in b)
    nodes = _lobatto(k + 2)
    tt = nodes[:, None]
    r00 = tt * ra00 + (1 - tt) * rb00
    x = tt[..., None] * xa + (1 - tt[..., None]) * xb
    r = tt[..., None, None] * ra + (1 - tt[..., None, None]) * rb
    f_nodes, lam = fk_eig_batch(r00, x, r, k)
    sig_nodes = symk.sigma_all(lam)[..., 1 : k + 1]
    V = np.vander(2 * nodes - 1, k + 2, increasing=True)
    W = np.vander(2 * taus - 1, k + 2, increasing=True) @ np.linalg.inv(V)
    f = np.einsum("tm,mb->tb", W, f_nodes)
    margin = np.einsum("tm,mbj->tbj", W, sig_nodes).min(axis=-1)
    fa, fb = f_nodes[-1], f_nodes[0]
    ex = 1.0 / (k + 1)
    tcol = taus[:, None]
    chord = tcol * np.maximum(fa, 0) ** ex + (1 - tcol) * np.maximum(fb, 0) ** ex
    gap = np.maximum(f, 0) ** ex - chord
    scale = np.maximum.reduce(
        [np.ones_like(ra00), np.abs(ra00), np.abs(rb00), np.linalg.norm(ra, axis=(-2, -1)),
         np.linalg.norm(rb, axis=(-2, -1)), np.linalg.norm(xa, axis=-1), np.linalg.norm(xb, axis=-1)]
    )
    return gap.min(axis=0) / scale, margin.min(axis=0), f.min(axis=0)


def concavity_probe(Ra: BlockMatrix, Rb: BlockMatrix, k: int, samples: int = 33) -> ConcavityResult:
    """Worst gap between ``F_k^{1/(k+1)}`` on the segment ``[Rb, Ra]`` and its chord.

    Raises
    ------
    DomainError
        If either endpoint is outside ``S``.
    """
    for name, R in (("Ra", Ra), ("Rb", Rb)):
        if not in_s(R, k):
            raise DomainError(f"{name} is not in S (needs r in Gamma_{k}^+ and F_k > 0)")
    taus = np.union1d(np.linspace(0.0, 1.0, samples), [0.5])
    slack, margin, fmin = concavity_batch(
        (np.array([Ra.r00]), Ra.x[None], Ra.r[None]), (np.array([Rb.r00]), Rb.x[None], Rb.r[None]), k, taus
    )
    return ConcavityResult(
        slack=float(slack[0]),
        segment_in_s=bool(margin[0] > 0 and fmin[0] > 0),
        min_cone_margin=float(margin[0]),
        min_fk=float(fmin[0]),
    )


# --------------------------------------------------------------------------
# quadratic-form and matrix inequalities


def gradient_form_constant(n: int, k: int) -> float:
    return (n - 2 * k) * (n - k + 1) / (2 * n)


def gradient_form_slack(E, grad, k: int):
    """``<T_{k-1}(E), |v|^2/2 I - v v^T> - c(n,k) sigma_{k-1}(E) |v|^2`` (batched).

    Raises
    ------
    DomainError
        If ``n < 2k``.
    """
    E = np.asarray(E, dtype=float)
    v = np.asarray(grad, dtype=float)
    n = E.shape[-1]
    if n < 2 * k:
        raise DomainError(f"the quadratic-form bound needs n >= 2k, got n={n}, k={k}")
    lam, Q = np.linalg.eigh(E)
    w2 = np.einsum("...ji,...j->...i", Q, v) ** 2
    v2 = np.sum(v * v, axis=-1)
    part = symk.sigma_k_partial_all(lam, k - 1)
    lhs = 0.5 * part.sum(axis=-1) * v2 - np.sum(part * w2, axis=-1)
    rhs = gradient_form_constant(n, k) * symk.sigma_all(lam)[..., k - 1] * v2
    return lhs - rhs


def andrews_matrix_slack(A, k: int):
    """Smallest eigenvalue of ``T_{k-1}(A) Ric(A) - (n-1) sigma_k(A) I`` with ``Ric = (n-2) A + sigma_1(A) I``.

    Raises
    ------
    DomainError
        Unless ``n = 2k``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n != 2 * k:
        raise DomainError(f"the matrix inequality is stated for n = 2k, got n={n}, k={k}")
    lam = np.linalg.eigvalsh(A)
    part = symk.sigma_k_partial_all(lam, k - 1)
    e = symk.sigma_all(lam)
    # T_{k-1}(A) and Ric are simultaneously diagonal in A's eigenbasis
    diag = part * ((n - 2) * lam + e[..., 1:2]) - (n - 1) * e[..., k : k + 1]
    return diag.min(axis=-1)


def andrews_matrix_slack_dense(A, k: int) -> float:
    """Same quantity through explicit matrix products; independent check."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n != 2 * k:
        raise DomainError(f"the matrix inequality is stated for n = 2k, got n={n}, k={k}")
    ric = (n - 2) * A + np.trace(A) * np.eye(n)
    M = symk.newton_transform_series(A, k - 1) @ ric - (n - 1) * symk.sigma_k_matrix(A, k) * np.eye(n)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


# --------------------------------------------------------------------------
# random sampling


def random_orthogonal(rng, size, n):
    G = rng.normal(size=(size, n, n))
    Q, Rr = np.linalg.qr(G)
    return Q * np.sign(np.diagonal(Rr, axis1=-2, axis2=-1))[..., None, :]


def sample_cone_eigs(rng, size: int, n: int, k: int, margin: float = 0.1):
    """Gaussian eigenvalues shifted along (1, ..., 1) until the cone margin exceeds ``margin``."""
    lam = rng.normal(size=(size, n))
    bad = symk.cone_margin(lam, k) <= margin
    while np.any(bad):
        lam[bad] += 0.1
        bad = symk.cone_margin(lam, k) <= margin
    return lam


def sample_cone_matrices(rng, size: int, n: int, k: int, margin: float = 0.1):
    lam = sample_cone_eigs(rng, size, n, k, margin)
    Q = random_orthogonal(rng, size, n)
    return (Q * lam[:, None, :]) @ np.swapaxes(Q, -1, -2)


def sample_block(rng, size: int, n: int):
    """Unrestricted random block matrices, entries standard normal."""
    G = rng.normal(size=(size, n, n))
    r = 0.5 * (G + np.swapaxes(G, -1, -2))
    return rng.normal(size=size), rng.normal(size=(size, n)), r


def sample_s(rng, size: int, n: int, k: int, margin: float = 0.1, f_floor: float = 0.01):
    """Random members of ``S`` away from its boundary.

    ``r`` has cone margin above ``margin``; ``r00`` is redrawn until
    ``F_k(R) > f_floor * (r00 sigma_k(r) + <T_{k-1}(r), x x^T>)``, i.e. the
    two terms of the operator do not nearly cancel.
    """
    r = sample_cone_matrices(rng, size, n, k, margin)
    x = rng.normal(size=(size, n))
    lam, Q = np.linalg.eigh(r)
    y2 = np.einsum("...ji,...j->...i", Q, x) ** 2
    quad = np.sum(symk.sigma_k_partial_all(lam, k - 1) * y2, axis=-1)
    sk = symk.sigma_all(lam)[..., k]
    r00 = np.empty(size)
    todo = np.ones(size, dtype=bool)
    while np.any(todo):
        base = quad[todo] / sk[todo]
        r00[todo] = base + rng.exponential(scale=1.0 + base, size=int(todo.sum()))
        term = r00 * sk
        todo = term - quad <= f_floor * (term + quad)
    return r00, x, r


# --------------------------------------------------------------------------
# campaigns


@dataclass
class CampaignReport:
    n: int
    k: int
    samples: int
    seed: int
    real_rooted: bool
    interlaced: bool
    localized: bool
    localized_wide: bool
    q_interlaced: bool
    concave: bool | None
    segment_in_s: bool | None
    worst: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        flags = [self.real_rooted, self.interlaced, self.localized, self.q_interlaced]
        if self.concave is not None:
            flags += [self.concave, bool(self.segment_in_s)]
        return all(flags)

    def to_dict(self) -> dict:
        return asdict(self)


def _chunks(total, size):
    start = 0
    while start < total:
        yield min(size, total - start)
        start += size


def certification_campaign(
    n: int,
    k: int,
    samples: int,
    seed: int,
    tol: float = ROOT_TOL,
    concavity: bool = True,
    concavity_tol: float = 1e-10,
    chunk: int = 2500,
) -> CampaignReport:
    """Randomized certification of real-rootedness, interlacing, localization and concavity.

    Samples are independent, so the report is an associative merge of the
    worst slacks of its chunks.  The concavity part draws pairs in ``S``.
    """
    _check_k(n, k)
    rng = np.random.default_rng([seed, n, k])
    worst = dict(
        imag_ratio=0.0, interlace=np.inf, localize=np.inf, localize_wide=np.inf,
        q_interlace=np.inf, lead_p_min=np.inf, lead_p_max=-np.inf, lead_q_min=np.inf,
    )
    for m in _chunks(samples, chunk):
        b = certify_batch(*sample_block(rng, m, n), k, tol)
        worst["imag_ratio"] = max(worst["imag_ratio"], float(b.imag_ratio.max()))
        worst["interlace"] = min(worst["interlace"], float(b.interlace.min()))
        worst["localize"] = min(worst["localize"], float(b.localize.min()))
        worst["localize_wide"] = min(worst["localize_wide"], float(b.localize_wide.min()))
        worst["q_interlace"] = min(worst["q_interlace"], float(b.q_interlace.min()))
        worst["lead_p_min"] = min(worst["lead_p_min"], float(b.lead_p.min()))
        worst["lead_p_max"] = max(worst["lead_p_max"], float(b.lead_p.max()))
        worst["lead_q_min"] = min(worst["lead_q_min"], float(b.lead_q_min.min()))
    concave = in_seg = None
    if concavity:
        worst.update(concavity=np.inf, segment_margin=np.inf, segment_fk=np.inf)
        for m in _chunks(samples, chunk):
            a = sample_s(rng, m, n, k)
            b2 = sample_s(rng, m, n, k)
            slack, margin, fmin = concavity_batch(a, b2, k)
            worst["concavity"] = min(worst["concavity"], float(slack.min()))
            worst["segment_margin"] = min(worst["segment_margin"], float(margin.min()))
            worst["segment_fk"] = min(worst["segment_fk"], float(fmin.min()))
        concave = worst["concavity"] >= -concavity_tol
        in_seg = worst["segment_margin"] > 0 and worst["segment_fk"] > 0
    return CampaignReport(
        n=n, k=k, samples=samples, seed=seed,
        real_rooted=worst["imag_ratio"] <= tol,
        interlaced=worst["interlace"] >= -tol,
        localized=worst["localize"] >= -tol,
        localized_wide=worst["localize_wide"] >= -tol,
        q_interlaced=worst["q_interlace"] >= -tol,
        concave=concave, segment_in_s=in_seg,
        worst={key: _jsonable(v) for key, v in worst.items()},
    )


def _jsonable(v):
    v = float(v)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def campaign_json(reports, indent=2) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=indent, sort_keys=True)

