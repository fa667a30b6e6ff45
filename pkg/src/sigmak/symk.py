"""Elementary symmetric functions, Newton transforms and Garding cone tests.

Every function accepts either a single eigenvalue vector of shape ``(n,)``
(or matrix of shape ``(n, n)``) or a stack with arbitrary leading batch
axes, so that randomized sweeps can be run without Python loops.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DomainError

DEFAULT_TOL = 1e-10


def rel_close(lhs, rhs, tol=DEFAULT_TOL):
    """Elementwise ``|lhs - rhs| <= tol * max(1, |lhs|, |rhs|)``."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return np.abs(lhs - rhs) <= tol * scale


def rel_error(lhs, rhs):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return np.abs(lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def _eigen_array(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0 or lam.shape[-1] < 1:
        raise DomainError("eigenvalue list must have n >= 1 entries")
    if not np.all(np.isfinite(lam)):
        raise DomainError("eigenvalue list contains non-finite entries")
    return lam


def sym_eigvals(S) -> np.ndarray:
    """Eigenvalues of a (stack of) symmetric matrices, ascending."""
    S = np.asarray(S, dtype=float)
    if S.shape[-1] != S.shape[-2]:
        raise DomainError(f"matrix must be square, got shape {S.shape[-2:]}")
    return np.linalg.eigvalsh(S)


# --------------------------------------------------------------------------
# sigma_k


def sigma_all(lam) -> np.ndarray:
    """All elementary symmetric functions ``sigma_0 .. sigma_n``.

    Computed as the coefficients of ``prod_i (1 + lam_i s)`` by repeated
    convolution, which costs O(n^2) per vector.

    Returns
    -------
    ndarray of shape ``lam.shape[:-1] + (n + 1,)``.
    """
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i : i + 1]
        # right-hand side is evaluated before assignment, so it sees the previous stage
        e[..., 1 : i + 2] = e[..., 1 : i + 2] + li * e[..., 0 : i + 1]
    return e


def sigma_k(lam, k: int):
    """k-th elementary symmetric function of ``lam`` (``sigma_0 = 1``)."""
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"sigma_k needs 0 <= k <= n, got k={k}, n={n}")
    return sigma_all(lam)[..., k]


def sigma_k_partial_all(lam, k: int) -> np.ndarray:
    """``sigma_k(lam | i)`` for every i at once, shape ``lam.shape``."""
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 0 <= k <= n - 1:
        raise DomainError(f"sigma_k(lam|i) needs 0 <= k <= n-1, got k={k}, n={n}")
    out = np.empty(lam.shape)
    for i in range(n):
        rest = np.delete(lam, i, axis=-1)
        if rest.shape[-1] == 0:
            out[..., i] = 1.0 if k == 0 else 0.0
        else:
            out[..., i] = sigma_all(rest)[..., k]
    return out


def sigma_k_partial(lam, k: int, i: int):
    """``sigma_k`` of ``lam`` with the i-th entry removed (1-based ``i``)."""
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 1 <= i <= n:
        raise DomainError(f"index i={i} out of range 1..{n}")
    return sigma_k_partial_all(lam, k)[..., i - 1]


def sigma_k_matrix(S, k: int):
    return sigma_k(sym_eigvals(S), k)


# --------------------------------------------------------------------------
# Newton transforms


def _check_transform_args(S, k):
    S = np.asarray(S, dtype=float)
    n = S.shape[-1]
    if S.ndim < 2 or S.shape[-2] != n:
        raise DomainError(f"matrix must be square, got shape {S.shape}")
    if not 0 <= k <= n - 1:
        raise DomainError(f"T_k needs 0 <= k <= n-1, got k={k}, n={n}")
    return S, n


def newton_transform(S, k: int) -> np.ndarray:
    """k-th Newton transform ``T_k(S) = sigma_k(S) I - sigma_{k-1}(S) S + ... + (-1)^k S^k``.

    Assembled in the eigenbasis of ``S`` as ``Q diag(sigma_k(lam|i)) Q^T``;
    the alternating matrix series cancels badly once ``k`` is large.
    """
    S, n = _check_transform_args(S, k)
    if k == 0:
        return np.broadcast_to(np.eye(n), S.shape).copy()
    lam, Q = np.linalg.eigh(S)
    d = sigma_k_partial_all(lam, k)
    return (Q * d[..., None, :]) @ np.swapaxes(Q, -1, -2)


def newton_transform_series(S, k: int) -> np.ndarray:
    """The alternating matrix series itself; kept as an independent check."""
    S, n = _check_transform_args(S, k)
    sig = sigma_all(sym_eigvals(S))
    out = np.zeros(S.shape)
    power = np.broadcast_to(np.eye(n), S.shape).copy()
    for j in range(k + 1):
        out += (-1) ** j * sig[..., k - j, None, None] * power
        power = power @ S
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def frob(A, B):
    """Frobenius pairing ``<A, B>`` over the last two axes."""
    return np.einsum("...ij,...ij->...", A, B)


# --------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeLabel:
    k: int
    inside: bool
    margin: float


def cone_margin(lam, k: int):
    """``min_{1<=j<=k} sigma_j(lam)`` (vectorized over leading axes)."""
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 1 <= k <= n:
        raise DomainError(f"cone test needs 1 <= k <= n, got k={k}, n={n}")
    return sigma_all(lam)[..., 1 : k + 1].min(axis=-1)


def cone_test(lam, k: int) -> ConeLabel:
    margin = float(cone_margin(lam, k))
    return ConeLabel(k=k, inside=margin > 0.0, margin=margin)


def cone_test_matrix(S, k: int) -> ConeLabel:
    return cone_test(sym_eigvals(S), k)


# --------------------------------------------------------------------------
# inequalities


@dataclass(frozen=True)
class InequalitySlacks:
    """Signed slacks (right side minus left side) of the classical inequalities.

    ``maclaurin`` is ``None`` when ``l == 0`` (the inequality needs ``l >= 1``).
    """

    newton: float
    maclaurin: float | None
    generalized: float


def newton_slack(lam, k: int):
    """``k(n-k) sigma_k^2 - (n-k+1)(k+1) sigma_{k-1} sigma_{k+1}``, valid for all real lam."""
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 1 <= k <= n - 1:
        raise DomainError(f"Newton inequality needs 1 <= k <= n-1, got k={k}, n={n}")
    e = sigma_all(lam)
    return k * (n - k) * e[..., k] ** 2 - (n - k + 1) * (k + 1) * e[..., k - 1] * e[..., k + 1]


def maclaurin_slack(lam, k: int, l: int):
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not 1 <= l <= k <= n:
        raise DomainError(f"MacLaurin needs 1 <= l <= k <= n, got k={k}, l={l}")
    e = sigma_all(lam)
    if np.any(e[..., 1 : k + 1].min(axis=-1) <= 0):
        raise DomainError("MacLaurin inequality needs lam in Gamma_k^+")
    return (e[..., l] / comb(n, l)) ** (1.0 / l) - (e[..., k] / comb(n, k)) ** (1.0 / k)


def generalized_newton_maclaurin_slack(lam, k: int, l: int, r: int, s: int):
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    if not (k > l >= 0 and r > s >= 0 and k >= r and l >= s and k <= n):
        raise DomainError(
            "generalized Newton-MacLaurin needs k > l >= 0, r > s >= 0, k >= r, l >= s, k <= n;"
            f" got k={k}, l={l}, r={r}, s={s}, n={n}"
        )
    e = sigma_all(lam)
    if np.any(e[..., 1 : k + 1].min(axis=-1) <= 0):
        raise DomainError("generalized Newton-MacLaurin needs lam in Gamma_k^+")
    left = ((e[..., k] / comb(n, k)) / (e[..., l] / comb(n, l))) ** (1.0 / (k - l))
    right = ((e[..., r] / comb(n, r)) / (e[..., s] / comb(n, s))) ** (1.0 / (r - s))
    return right - left


def inequality_suite(lam, k: int, l: int, r: int, s: int) -> InequalitySlacks:
    """Slacks of the Newton, MacLaurin and generalized Newton-MacLaurin inequalities.

    Newton is evaluated at index ``k`` when ``k <= n - 1`` and at ``k - 1``
    otherwise, so that ``k = n`` remains a legal request.
    """
    lam = _eigen_array(lam)
    n = lam.shape[-1]
    kn = k if k <= n - 1 else k - 1
    newton = float(newton_slack(lam, kn)) if kn >= 1 else 0.0
    mac = float(maclaurin_slack(lam, k, l)) if l >= 1 else None
    gen = float(generalized_newton_maclaurin_slack(lam, k, l, r, s))
    return InequalitySlacks(newton=newton, maclaurin=mac, generalized=gen)


# --------------------------------------------------------------------------
# rank-one identities and the E-cone lift


@dataclass(frozen=True)
class RankOneSides:
    """Both sides of ``sigma_k(A - X X^T) = sigma_k(A) - <T_{k-1}(A), X X^T>``
    and of ``<T_k(A - X X^T), X X^T> = <T_k(A), X X^T>``.

    The second pair is ``nan`` when ``k = n`` (``T_n`` is not defined).
    """

    lhs: float
    rhs: float
    lhs_t: float
    rhs_t: float


def rank_one_identity(A, X, k: int) -> RankOneSides:
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=float)
    n = A.shape[-1]
    if X.shape[-1] != n:
        raise DomainError(f"vector length {X.shape[-1]} does not match matrix size {n}")
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}")
    XX = X[..., :, None] * X[..., None, :]
    lhs = sigma_k_matrix(A - XX, k)
    if k == 0:
        rhs = np.ones_like(lhs)
    else:
        rhs = sigma_k_matrix(A, k) - frob(newton_transform(A, k - 1), XX)
    if k <= n - 1:
        lhs_t = frob(newton_transform(A - XX, k), XX)
        rhs_t = frob(newton_transform(A, k), XX)
    else:
        lhs_t = rhs_t = np.full_like(lhs, np.nan)
    return RankOneSides(lhs=lhs, rhs=rhs, lhs_t=lhs_t, rhs_t=rhs_t)


def trace_identity_sides(E, k: int):
    """``(<T_{k-1}(E), E> - (k-1) sigma_k(E), sigma_k(E))``; the two agree for every symmetric E."""
    E = np.asarray(E, dtype=float)
    lhs = frob(newton_transform(E, k - 1), E) - (k - 1) * sigma_k_matrix(E, k)
    return lhs, sigma_k_matrix(E, k)


def e_matrix(A, utt, p) -> np.ndarray:
    """``E = utt * A - p p^T`` (vectorized)."""
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    utt = np.asarray(utt, dtype=float)
    return utt[..., None, None] * A - p[..., :, None] * p[..., None, :]


def e_cone_lift(A, utt: float, p, k: int) -> tuple[ConeLabel, np.ndarray]:
    """Cone label of ``E = utt A - p p^T`` together with the chain ``sigma_0(E) .. sigma_k(E)``.

    Raises
    ------
    DomainError
        If ``A`` is not in ``Gamma_k^+`` or ``utt <= 0``.
    """
    A = np.asarray(A, dtype=float)
    label_a = cone_test_matrix(A, k)
    if not label_a.inside:
        raise DomainError(f"A is not in Gamma_{k}^+ (margin {label_a.margin:.3e})")
    if not utt > 0:
        raise DomainError(f"utt must be positive, got {utt}")
    lam = sym_eigvals(e_matrix(A, utt, p))
    chain = sigma_all(lam)[: k + 1]
    return cone_test(lam, k), chain

