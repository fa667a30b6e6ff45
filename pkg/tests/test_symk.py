from itertools import combinations
from math import comb, prod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sigmak import symk
from sigmak.errors import DomainError


def brute_sigma(lam, k):
    return sum(prod(c) for c in combinations(lam, k)) if k else 1.0


def random_sym(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (M + M.T)


def random_cone_matrix(rng, n, k, margin=0.1):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = rng.normal(size=n)
    while symk.cone_margin(lam, k) <= margin:
        lam = lam + 0.25
    return (Q * lam) @ Q.T


finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# -- sigma_k


def test_sigma_identity_matrix():
    assert symk.sigma_k([1, 1, 1, 1], 2) == 6


def test_sigma_hand_expansion():
    assert symk.sigma_k([-1, 1, 1, 1], 2) == 0
    assert symk.sigma_k([-1, 1, 1, 1], 1) == 2


def test_sigma_zero_is_one():
    assert symk.sigma_k([3.0, -2.0], 0) == 1.0


@pytest.mark.parametrize("k", [-1, 5])
def test_sigma_domain(k):
    with pytest.raises(DomainError):
        symk.sigma_k([1, 2, 3, 4], k)


def test_sigma_matches_brute_force():
    rng = np.random.default_rng(0)
    lam = rng.normal(size=6)
    expected = brute_sigma(lam, 3)
    assert abs(symk.sigma_k(lam, 3) - expected) <= 1e-12 * max(1.0, abs(expected))


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 8), elements=finite))
def test_sigma_brute_and_charpoly_routes_agree(lam):
    n = lam.size
    # characteristic polynomial of diag(lam): prod (t - lam_i) = sum (-1)^k sigma_k t^(n-k)
    charpoly = np.poly(np.diag(lam)) if n > 0 else np.array([1.0])
    all_sig = symk.sigma_all(lam)
    for k in range(n + 1):
        bf = brute_sigma(lam, k)
        cp = (-1) ** k * charpoly[k]
        assert abs(all_sig[k] - bf) <= 1e-10 * max(1.0, abs(bf), 5.0**k)
        assert abs(cp - bf) <= 1e-8 * max(1.0, abs(bf), 5.0**k)


def test_sigma_batched_matches_single():
    rng = np.random.default_rng(1)
    lam = rng.normal(size=(7, 3, 5))
    out = symk.sigma_k(lam, 2)
    assert out.shape == (7, 3)
    assert np.isclose(out[4, 1], brute_sigma(lam[4, 1], 2))


# -- partial sigma


def test_partial_hand():
    assert symk.sigma_k_partial([2, 3, 5], 1, 2) == 7


@pytest.mark.parametrize("n,k", [(3, 0), (4, 2), (6, 3), (5, 4)])
def test_partial_all_ones(n, k):
    for i in range(1, n + 1):
        assert symk.sigma_k_partial(np.ones(n), k, i) == comb(n - 1, k)


def test_partial_index_out_of_range():
    with pytest.raises(DomainError):
        symk.sigma_k_partial([1, 2, 3], 1, 4)
    with pytest.raises(DomainError):
        symk.sigma_k_partial([1, 2, 3], 1, 0)


def test_partial_sum_identity():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = rng.integers(2, 9)
        lam = rng.normal(size=n)
        for k in range(n):
            lhs = symk.sigma_k_partial_all(lam, k).sum()
            rhs = (n - k) * symk.sigma_k(lam, k)
            assert symk.rel_close(lhs, rhs, 1e-12)


@settings(max_examples=150, deadline=None)
@given(arrays(float, st.integers(2, 8), elements=finite))
def test_partial_sum_identities(lam):
    n = lam.size
    for k in range(n):
        part = symk.sigma_k_partial_all(lam, k)
        # sum lam_i sigma_k(lam|i) = (k+1) sigma_{k+1}
        lhs = np.dot(lam, part)
        rhs = (k + 1) * symk.sigma_k(lam, k + 1)
        assert symk.rel_close(lhs, rhs, 1e-12 * 10**k)
        # sigma_{k+1} = sigma_{k+1}(lam|i) + lam_i sigma_k(lam|i)
        if k + 1 <= n - 1:
            nxt = symk.sigma_k_partial_all(lam, k + 1)
            total = nxt + lam * part
            assert np.all(symk.rel_close(total, symk.sigma_k(lam, k + 1), 1e-12 * 10**k))


# -- Newton transforms


def test_t0_is_identity():
    rng = np.random.default_rng(3)
    S = random_sym(rng, 4)
    np.testing.assert_array_equal(symk.newton_transform(S, 0), np.eye(4))


def test_t1_diag_hand():
    out = symk.newton_transform(np.diag([2.0, 3.0, 5.0]), 1)
    np.testing.assert_allclose(out, np.diag([8.0, 7.0, 5.0]), atol=1e-14)


def test_t2_eigenbasis_oracle():
    rng = np.random.default_rng(4)
    S = random_sym(rng, 5)
    lam, Q = np.linalg.eigh(S)
    T = symk.newton_transform(S, 2)
    # T_2(S) must be diagonal in the eigenbasis of S, with entries sigma_2(lam|i)
    D = Q.T @ T @ Q
    np.testing.assert_allclose(np.diag(D), symk.sigma_k_partial_all(lam, 2), atol=1e-10)
    np.testing.assert_allclose(D - np.diag(np.diag(D)), 0.0, atol=1e-10)
    np.testing.assert_allclose(T @ S, S @ T, atol=1e-10)


def test_newton_transform_routes_agree_batched():
    rng = np.random.default_rng(5)
    S = rng.normal(size=(40, 6, 6))
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    for k in range(6):
        np.testing.assert_allclose(symk.newton_transform(S, k), symk.newton_transform_series(S, k), atol=1e-9)


def test_newton_transform_positive_definite_on_cone():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 8))
        k = int(rng.integers(1, n + 1))
        A = random_cone_matrix(rng, n, k, margin=1e-3)
        T = symk.newton_transform(A, k - 1)
        assert np.linalg.eigvalsh(T).min() > 0


# -- cones


@pytest.mark.parametrize("n", [1, 3, 6])
def test_cone_ones_inside(n):
    for k in range(1, n + 1):
        assert symk.cone_test(np.ones(n), k).inside


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_flipped_diagonal_on_boundary_at_n_equal_2k(k):
    # sigma_k(-1, 1, ..., 1) = C(2k-1, k) - C(2k-1, k-1) = 0: closure of the cone, not interior
    lam = np.ones(2 * k)
    lam[0] = -1
    label = symk.cone_test(lam, k)
    assert not label.inside
    assert label.margin == 0.0
    assert all(symk.sigma_k(lam, j) > 0 for j in range(1, k))


@pytest.mark.parametrize("k,n", [(1, 3), (2, 5), (2, 6), (3, 7), (3, 8)])
def test_flipped_diagonal_inside_for_n_above_2k(k, n):
    lam = np.ones(n)
    lam[0] = -1
    assert symk.cone_test(lam, k).inside


def test_cone_excluded_for_two_k_above_n():
    label = symk.cone_test([-1.0, 1.0, 1.0], 2)
    assert not label.inside
    assert label.margin == -1.0


def test_cone_label_invariant():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = rng.normal(size=5)
        lab = symk.cone_test(lam, 3)
        assert lab.inside == (lab.margin > 0)


# -- inequalities


def test_generalized_equality_at_ones():
    slack = symk.inequality_suite(np.ones(5), 3, 1, 2, 0)
    assert abs(slack.generalized) <= 1e-14
    assert abs(slack.newton) <= 1e-12
    assert abs(slack.maclaurin) <= 1e-14


def test_newton_strict_example():
    assert symk.newton_slack([2, 1, 1, 1], 2) > 0


def test_inequality_precondition_errors():
    with pytest.raises(DomainError):
        symk.inequality_suite(np.ones(4), 2, 2, 1, 0)  # k > l violated
    with pytest.raises(DomainError):
        symk.inequality_suite(np.array([-1.0, 1.0, 1.0]), 2, 1, 2, 1)  # outside Gamma_2^+


def test_inequality_randomized_sweep():
    rng = np.random.default_rng(8)
    for n in range(2, 9):
        for k in range(1, n + 1):
            lam = rng.normal(size=(2000, n)) + rng.uniform(0, 3, size=(2000, 1))
            lam = lam[symk.cone_margin(lam, k) > 0]
            if lam.size == 0:
                continue
            scale = np.max(np.abs(lam), axis=1) ** (2 * min(k, n - 1))
            if k <= n - 1:
                assert np.all(symk.newton_slack(lam, k) >= -1e-10 * np.maximum(1, scale))
            for l in range(1, k):
                assert np.all(symk.maclaurin_slack(lam, k, l) >= -1e-10 * np.max(np.abs(lam), axis=1))


# -- rank-one identities


def test_rank_one_zero_vector():
    rng = np.random.default_rng(9)
    A = random_sym(rng, 4)
    sides = symk.rank_one_identity(A, np.zeros(4), 2)
    sk = symk.sigma_k_matrix(A, 2)
    assert np.isclose(sides.lhs, sk) and np.isclose(sides.rhs, sk)


def test_rank_one_hand():
    sides = symk.rank_one_identity(np.eye(4), np.eye(4)[0], 2)
    assert np.isclose(sides.lhs, 3.0)
    assert np.isclose(sides.rhs, 3.0)


def test_rank_one_random():
    rng = np.random.default_rng(10)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        A = random_sym(rng, n)
        X = rng.normal(size=n)
        for k in range(n + 1):
            s = symk.rank_one_identity(A, X, k)
            assert symk.rel_close(s.lhs, s.rhs, 1e-10)
            if k <= n - 1:
                assert symk.rel_close(s.lhs_t, s.rhs_t, 1e-10)


def test_trace_identity_random():
    rng = np.random.default_rng(11)
    E = rng.normal(size=(500, 6, 6))
    E = 0.5 * (E + np.swapaxes(E, 1, 2))
    for k in range(1, 7):
        lhs, rhs = symk.trace_identity_sides(E, k)
        assert np.all(symk.rel_close(lhs, rhs, 1e-10))


# -- E-cone lift


def test_lift_zero_gradient():
    rng = np.random.default_rng(12)
    A = random_cone_matrix(rng, 5, 3)
    for utt in (1e-3, 1.0, 40.0):
        label, chain = symk.e_cone_lift(A, utt, np.zeros(5), 3)
        assert label.inside
        assert chain[0] == 1.0 and np.all(chain > 0)


def test_lift_flips_when_sigma_k_vanishes():
    # A = I, n = 4, k = 2, p = t e_1: sigma_2(E) = 6 - 3 t^2 vanishes at t = sqrt(2)
    ts = np.linspace(0, 2, 401)
    for t in ts:
        label, chain = symk.e_cone_lift(np.eye(4), 1.0, t * np.eye(4)[0], 2)
        s2 = symk.rank_one_identity(np.eye(4), t * np.eye(4)[0], 2).rhs
        assert np.isclose(chain[2], s2)
        assert label.inside == (chain[2] > 0)


def test_lift_requires_cone():
    with pytest.raises(DomainError):
        symk.e_cone_lift(np.diag([-1.0, 1.0, 1.0]), 1.0, np.zeros(3), 2)
    with pytest.raises(DomainError):
        symk.e_cone_lift(np.eye(3), 0.0, np.zeros(3), 2)


def test_lift_randomized():
    rng = np.random.default_rng(13)
    seen = 0
    for _ in range(2000):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        A = random_cone_matrix(rng, n, k, margin=1e-2)
        utt = float(rng.uniform(0.05, 3))
        p = rng.normal(size=n)
        label, chain = symk.e_cone_lift(A, utt, p, k)
        if chain[k] > 0:
            seen += 1
            assert label.inside
    assert seen > 100
