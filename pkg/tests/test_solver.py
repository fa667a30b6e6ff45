import numpy as np
import pytest

from sigmak import grid as g
from sigmak import solver as sv
from sigmak.errors import DomainError
from sigmak.manufactured import default_manufactured


def cosine_slices(geom, eps):
    X = geom.coords()
    u0 = eps * np.cos(X[0])
    u1 = eps * np.sin(X[-1]) + 0.5 * eps * np.cos(X[0] + X[-1])
    return u0, u1


def bump(geom, amp):
    X = geom.coords()
    t = geom.t.reshape((-1,) + (1,) * geom.n)
    return amp * np.sin(np.pi * t) * np.cos(X[0])[None]


@pytest.mark.parametrize("n,k", [(2, 1), (4, 2)])
def test_homogeneous_recovery(n, k):
    geom = g.GridGeometry(n, k, 4, 7)
    c = 0.3
    start = g.comparison_field(geom, -2.0, 0.0, 0.0)
    st = sv.newton_solve(start, c)
    exact = g.comparison_field(geom, -g.homogeneous_constant(geom, c), 0.0, 0.0)
    assert st.converged
    assert np.abs(st.u.values - exact.values).max() <= 1e-10


def test_quadratic_convergence():
    geom = g.GridGeometry(2, 1, 16, 15)
    exact = g.comparison_field(geom, -g.homogeneous_constant(geom, 1.0), 0.0, 0.0)
    start = g.SpaceTimeField(geom, exact.values + bump(geom, 0.05))
    st = sv.newton_solve(start, 1.0, sv.SolverConfig(newton_tol=1e-13))
    h = st.report.residual_history
    assert st.converged and st.report.line_search_shrinks == 0
    ratios = [h[i + 1] / h[i] ** 2 for i in range(len(h) - 1) if h[i + 1] > 1e-12]
    assert len(ratios) >= 2
    assert max(ratios) < 10 * min(ratios) + 1.0


def test_newton_rejects_bad_inputs():
    geom = g.GridGeometry(2, 1, 4, 3)
    w = g.comparison_field(geom, -1.0, 0.0, 0.0)
    with pytest.raises(DomainError, match="positive"):
        sv.newton_solve(w, 0.0)
    with pytest.raises(DomainError, match="not admissible"):
        sv.newton_solve(g.comparison_field(geom, 1.0, 0.0, 0.0), 1.0)
    with pytest.raises(DomainError):
        sv.SolverConfig(armijo_ratio=1.0)
    with pytest.raises(DomainError):
        sv.SolverConfig(newton_tol=0.0)


def test_gmres_matches_direct():
    geom = g.GridGeometry(2, 1, 16, 11)
    u = default_manufactured(2).field(geom)
    lin = g.linearize(u)
    rhs = np.random.default_rng(0).normal(size=geom.n_interior)
    x_direct, its_direct = sv.solve_linear(lin, rhs, sv.SolverConfig(direct_limit=10**6))
    x_iter, its_iter = sv.solve_linear(lin, rhs, sv.SolverConfig(direct_limit=0))
    assert its_direct == 0 and its_iter > 0
    assert np.abs(x_direct - x_iter).max() <= 1e-9 * np.abs(x_direct).max()


def test_subsolution():
    geom = g.GridGeometry(2, 1, 8, 7)
    u0, u1 = cosine_slices(geom, 0.1)
    a, w = sv.subsolution(geom, u0, u1, 3.0)
    assert g.fk_field(w).min() > 3.0
    assert a >= 1.0 and np.log2(a) == int(np.log2(a))
    with pytest.raises(DomainError):
        sv.subsolution(geom, u0, u1, 3.0, a_max=0.5)


def test_continuity_lands_on_comparison_field():
    geom = g.GridGeometry(2, 1, 8, 7)
    w = g.comparison_field(geom, -1.0, 0.0, 0.0)
    st, rep = sv.continuity_solve(geom, 0.0, 0.0, g.fk_field(w))
    assert rep.converged and rep.a == 2.0 and rep.steps[-1] == 1.0
    assert np.abs(st.u.values - w.values).max() <= 1e-10


def test_continuity_zero_boundary():
    geom = g.GridGeometry(2, 1, 8, 7)
    st, rep = sv.continuity_solve(geom, 0.0, 0.0, 0.25)
    exact = g.comparison_field(geom, -g.homogeneous_constant(geom, 0.25), 0.0, 0.0)
    assert rep.converged and rep.steps[-1] == 1.0
    assert np.abs(st.u.values - exact.values).max() <= 1e-9


def test_continuity_n4_critical_case():
    geom = g.GridGeometry(4, 2, 8, 9)
    X = geom.coords()
    u0, u1 = 0.05 * np.cos(X[0]), -0.05 * np.cos(X[1])
    st, rep = sv.continuity_solve(geom, u0, u1, 1.0)
    assert rep.converged
    assert np.abs(g.residual(st.u, 1.0)).max() <= 1e-10
    scan = g.admissibility_scan(st.u)
    assert scan.positive() and scan.cone.margin > 0


def test_sweep_between_identical_slices():
    geom = g.GridGeometry(2, 1, 8, 7)
    X = geom.coords()
    u0 = 0.1 * np.cos(X[0])
    res = sv.degenerate_sweep(geom, u0, u0, sv.SolverConfig(s_levels=8))
    assert res.converged
    dist = np.array([np.abs(st.u.values - u0[None]).max() for st in res.states])
    s = np.array(res.schedule)
    # u^s - u0 = O(s): the ratio to s settles to a constant
    ratio = dist / s
    assert ratio[-1] == pytest.approx(ratio[-2], rel=1e-3)
    assert dist[-1] <= 2 * ratio[0] * s[-1]


def test_homogeneous_sweep_closed_form():
    geom = g.GridGeometry(2, 1, 4, 7)
    cfg = sv.SolverConfig(s_levels=8)
    res = sv.degenerate_sweep(geom, 0.0, 0.0, cfg)
    assert res.converged and res.monotone
    for s, st in zip(res.schedule, res.states):
        exact = g.comparison_field(geom, -g.homogeneous_constant(geom, s), 0.0, 0.0)
        assert np.abs(st.u.values - exact.values).max() <= 1e-9
        # distance to the linear interpolant is a(s)/4 = O(s)
        assert -st.u.values.min() == pytest.approx(g.homogeneous_constant(geom, s) / 4, rel=1e-8)
    ratios = np.array(res.cauchy[1:]) / np.array(res.cauchy[:-1])
    np.testing.assert_allclose(ratios, 0.5, rtol=1e-6)
    assert np.abs(res.extrapolated.values).max() <= 1e-9


def test_sweep_rejects_bad_schedule():
    geom = g.GridGeometry(2, 1, 4, 3)
    with pytest.raises(DomainError):
        sv.degenerate_sweep(geom, 0.0, 0.0, schedule=[1.0, 1.0])


def test_sweep_generic_data():
    geom = g.GridGeometry(2, 1, 8, 9)
    u0, u1 = cosine_slices(geom, 0.1)
    res = sv.degenerate_sweep(geom, u0, u1, sv.SolverConfig(s_levels=6))
    assert res.converged and res.monotone
    assert res.cauchy[-1] < res.cauchy[0]


def test_shrink_to_strict():
    geom = g.GridGeometry(2, 1, 8, 7)
    zero = g.SpaceTimeField(geom, np.zeros(geom.shape))
    sh = sv.shrink_to_strict(zero, 0.1)
    assert sh.ok and sh.scan.fk_min > 0
    with pytest.raises(DomainError, match="2k <= n violated"):
        sv.shrink_to_strict(zero, 0.1, k=2)
    with pytest.raises(DomainError):
        sv.shrink_to_strict(zero, 1.5)
    u0, u1 = cosine_slices(geom, 0.1)
    res = sv.degenerate_sweep(geom, u0, u1, sv.SolverConfig(s_levels=6))
    sh = sv.shrink_to_strict(res.limit, 1e-3)
    assert sh.ok
    assert sh.concavity_slack >= -1e-9


def test_uniqueness_probe():
    geom = g.GridGeometry(2, 1, 8, 7)
    u0, u1 = cosine_slices(geom, 0.1)
    A, _ = sv.continuity_solve(geom, u0, u1, 1.0)
    B, _ = sv.continuity_solve(geom, u0, u1, 1.0, a_start=4.0, steps=3)
    rep = sv.uniqueness_probe(A.u, B.u, bound=1e-8)
    assert rep.ok, rep
    other = g.comparison_field(geom, -1.0, 0.0, 0.0)
    with pytest.raises(DomainError, match="boundary"):
        sv.uniqueness_probe(A.u, other)
    with pytest.raises(DomainError, match="grids"):
        sv.uniqueness_probe(A.u, g.comparison_field(g.GridGeometry(2, 1, 8, 9), -1.0, 0.0, 0.0))


def test_report_serialization():
    geom = g.GridGeometry(2, 1, 4, 3)
    st = sv.newton_solve(g.comparison_field(geom, -2.0, 0.0, 0.0), 1.0)
    d = st.report.to_dict()
    assert "wall_time" not in d
    assert "wall_time" in st.report.to_dict(timing=True)
    assert d["converged"] and d["residual_history"][0] > d["residual_history"][-1]
