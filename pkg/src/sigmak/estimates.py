"""A priori bounds measured on solved fields.

The solver's own subsolution constant ``a`` is used as the barrier
parameter; derivative suprema are reported as measured values.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import grid, symk
from .grid import GridGeometry, SpaceTimeField

SUPREMA = ("sup_grad", "sup_utt", "sup_hess", "sup_grad_ut")


@dataclass
class BoundReport:
    N: int
    Nt: int
    a: float
    c0_low_slack: float
    c0_high_slack: float
    ut_low_slack: float
    ut_high_slack: float
    sup_grad: float
    sup_utt: float
    sup_hess: float
    sup_grad_ut: float
    utt_min: float
    e_margin: float
    e_trace_slack: float
    refinement_trend: list = field(default_factory=list)

    def slacks_ok(self, tol: float) -> bool:
        return min(self.c0_low_slack, self.c0_high_slack, self.ut_low_slack, self.ut_high_slack) >= -tol

    def to_dict(self) -> dict:
        return asdict(self)


def _values(u):
    return u.u if hasattr(u, "u") else u


def verify_c0(u, a: float) -> tuple[float, float]:
    """``min(u - U_{-a})`` and ``min(U_0 - u)`` over the grid."""
    u = _values(u)
    lo = grid.comparison_field(u.geometry, -a, u.u0, u.u1)
    hi = grid.comparison_field(u.geometry, 0.0, u.u0, u.u1)
    return float(np.min(u.values - lo.values)), float(np.min(hi.values - u.values))


def time_derivative(u: SpaceTimeField) -> np.ndarray:
    """``u_t`` on every level: central inside, second-order one-sided at t = 0, 1."""
    return np.gradient(u.values, u.geometry.ht, axis=0, edge_order=2)


def verify_ut(u, a: float) -> tuple[float, float]:
    """Slacks of ``-a + u1 - u0 <= u_t <= a + u1 - u0``."""
    u = _values(u)
    ut = time_derivative(u)
    jump = u.u1 - u.u0
    return float(np.min(ut - (jump - a))), float(np.min((jump + a) - ut))


def verify_e_cone(u) -> tuple[float, float]:
    """Worst cone margin of ``E_u`` and worst ``u_tt sigma_1(A_u) - |grad u_t|^2``."""
    u = _values(u)
    geom = u.geometry
    d = grid.derivatives(u)
    A = grid.schouten_from(geom.lambda0, d.grad, d.hess)
    E = d.utt[..., None, None] * A - d.grad_t[..., :, None] * d.grad_t[..., None, :]
    margin = symk.cone_margin(np.linalg.eigvalsh(E), geom.k)
    trace = d.utt * np.trace(A, axis1=-2, axis2=-1) - np.sum(d.grad_t**2, axis=-1)
    return float(margin.min()), float(trace.min())


def suprema(u) -> dict:
    u = _values(u)
    d = grid.derivatives(u)
    return {
        "sup_grad": float(np.linalg.norm(d.grad, axis=-1).max()),
        "sup_utt": float(np.abs(d.utt).max()),
        "sup_hess": float(np.abs(np.linalg.eigvalsh(d.hess)).max()),
        "sup_grad_ut": float(np.linalg.norm(d.grad_t, axis=-1).max()),
    }


def bound_report(u, a: float) -> BoundReport:
    u = _values(u)
    lo, hi = verify_c0(u, a)
    tlo, thi = verify_ut(u, a)
    em, et = verify_e_cone(u)
    d = grid.derivatives(u)
    return BoundReport(
        N=u.geometry.N,
        Nt=u.geometry.Nt,
        a=a,
        c0_low_slack=lo,
        c0_high_slack=hi,
        ut_low_slack=tlo,
        ut_high_slack=thi,
        utt_min=float(d.utt.min()),
        e_margin=em,
        e_trace_slack=et,
        **suprema(u),
    )


def trend(reports: list[BoundReport]) -> list[dict]:
    """Relative change of every supremum between successive reports."""
    out = []
    for prev, cur in zip(reports, reports[1:]):
        row = {}
        for key in SUPREMA:
            p, c = getattr(prev, key), getattr(cur, key)
            row[key] = abs(c - p) / max(abs(p), abs(c), 1e-300)
        out.append(row)
    return out


@dataclass(frozen=True)
class Problem:
    """Boundary data and right-hand side, realizable at any resolution."""

    n: int
    k: int
    boundary: object  # callable: GridGeometry -> (u0, u1)
    f: float = 1.0
    L: float = 2 * np.pi
    lambda0: float = 0.5

    def geometry(self, N: int, Nt: int) -> GridGeometry:
        return GridGeometry(self.n, self.k, N, Nt, self.L, self.lambda0)


def refinement_study(problem: Problem, resolutions, cfg=None) -> list[BoundReport]:
    """Solve at each ``(N, Nt)`` and attach the supremum trend to every report."""
    from .solver import SolverConfig, continuity_solve

    if len(resolutions) < 2:
        raise ValueError("refinement study needs at least two resolutions")
    cfg = cfg or SolverConfig()
    reports = []
    for N, Nt in resolutions:
        geom = problem.geometry(N, Nt)
        u0, u1 = problem.boundary(geom)
        st, path = continuity_solve(geom, u0, u1, problem.f, cfg)
        reports.append(bound_report(st.u, path.a))
    tr = trend(reports)
    for r in reports:
        r.refinement_trend = tr
    return reports


def reports_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def reports_csv(reports) -> str:
    cols = [
        "N", "Nt", "a", "c0_low_slack", "c0_high_slack", "ut_low_slack", "ut_high_slack",
        *SUPREMA, "utt_min", "e_margin", "e_trace_slack",
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        w.writerow([repr(getattr(r, c)) for c in cols])
    return buf.getvalue()
