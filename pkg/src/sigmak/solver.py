"""Damped Newton, continuation and the degenerate sweep for ``F_k(u) = f``."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import grid, symk
from .errors import DomainError
from .grid import GridGeometry, SpaceTimeField

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton: int = 50
    armijo_ratio: float = 0.5
    armijo_slope: float = 1e-4
    margin_floor: float = 1e-12
    path_steps: int = 10
    s_levels: int = 16
    linear_tol: float = 1e-12
    direct_limit: int = 1000
    path_tol: float = 1e-6

    def __post_init__(self):
        for name in ("newton_tol", "armijo_slope", "margin_floor", "linear_tol", "path_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0 < self.armijo_ratio < 1:
            raise DomainError("armijo_ratio must lie in (0, 1)")
        if self.max_newton < 1 or self.path_steps < 1 or self.s_levels < 0:
            raise DomainError("iteration counts must be positive")

    @property
    def s_schedule(self) -> list[float]:
        return [2.0**-j for j in range(self.s_levels + 1)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list
    margins: dict
    wall_time: float
    message: str = ""
    line_search_shrinks: int = 0
    linear_iterations: int = 0
    target: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d


@dataclass
class SolveState:
    u: SpaceTimeField
    f: np.ndarray
    residual_norm: float
    step: int
    report: SolveReport | None = None

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged


# --------------------------------------------------------------------------
# linear solves


class FourierPreconditioner:
    """Exact inverse of the operator with coefficients averaged over each time level.

    Frozen coefficients are diagonalized by the FFT in space, which leaves one
    tridiagonal system in t per Fourier mode.
    """

    def __init__(self, lin: grid.Linearization):
        geom = lin.operator.geometry
        n, N, ht, hx = geom.n, geom.N, geom.ht, geom.hx
        ax = tuple(range(1, n + 1))
        ctt = lin.ctt.mean(axis=ax)
        M = lin.hess_coef.mean(axis=ax)
        b = lin.grad_coef.mean(axis=ax)
        m = lin.mixed_coef.mean(axis=ax)
        theta = 2 * np.pi * np.fft.fftfreq(N)
        th = np.meshgrid(*([theta] * n), indexing="ij")
        s = np.stack([np.sin(t) for t in th])
        c = np.stack([2 * np.cos(t) - 2 for t in th])
        shape = (geom.Nt,) + (N,) * n
        diag = np.zeros(shape, complex)
        off = np.zeros(shape, complex)
        for j in range(geom.Nt):
            d = -2 * ctt[j] / ht**2 + 0j
            for a in range(n):
                d = d + M[j, a, a] * c[a] / hx**2 + 1j * b[j, a] * s[a] / hx
                for bb in range(n):
                    if bb != a:
                        d = d - M[j, a, bb] * s[a] * s[bb] / hx**2
            diag[j] = d
            off[j] = sum(m[j, a] * 1j * s[a] for a in range(n)) / (2 * ht * hx)
        self.lower = ctt[:, None] / ht**2 - off.reshape(geom.Nt, -1)
        self.upper = ctt[:, None] / ht**2 + off.reshape(geom.Nt, -1)
        self.diag = diag.reshape(geom.Nt, -1)
        self.geom = geom
        self._factor()

    def _factor(self):
        # Thomas algorithm, factored once and reused for every right-hand side
        Nt = self.geom.Nt
        cp = np.zeros_like(self.diag)
        den = np.zeros_like(self.diag)
        den[0] = self.diag[0]
        for j in range(1, Nt):
            cp[j - 1] = self.upper[j - 1] / den[j - 1]
            den[j] = self.diag[j] - self.lower[j] * cp[j - 1]
        self.cp, self.den = cp, den

    def solve(self, rhs):
        geom = self.geom
        Nt = geom.Nt
        ax = tuple(range(1, geom.n + 1))
        r = np.fft.fftn(np.reshape(rhs, geom.interior_shape), axes=ax).reshape(Nt, -1)
        y = np.empty_like(r)
        y[0] = r[0] / self.den[0]
        for j in range(1, Nt):
            y[j] = (r[j] - self.lower[j] * y[j - 1]) / self.den[j]
        for j in range(Nt - 2, -1, -1):
            y[j] = y[j] - self.cp[j] * y[j + 1]
        out = np.fft.ifftn(y.reshape(geom.interior_shape), axes=ax).real
        return out.ravel()


def solve_linear(lin: grid.Linearization, rhs: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, int]:
    """Solve the Newton system; direct for small grids, preconditioned GMRES otherwise."""
    A = lin.operator.matrix()
    b = np.ravel(rhs)
    if A.shape[0] <= cfg.direct_limit:
        return spla.splu(A.tocsc()).solve(b), 0
    pre = FourierPreconditioner(lin)
    P = spla.LinearOperator(A.shape, pre.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(
        A, b, M=P, rtol=cfg.linear_tol, atol=0.0, restart=60, maxiter=40, callback=cb, callback_type="pr_norm"
    )
    if info != 0:
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        log.info("gmres stopped with info=%d, relative residual %.2e", info, res)
        if res > 1e-6:
            x = spla.spsolve(A.tocsc(), b)
    return x, count[0]


# --------------------------------------------------------------------------
# Newton


def roundoff_floor(u: SpaceTimeField) -> float:
    """Smallest residual the discrete operator can resolve at ``u``.

    The second difference in t amplifies rounding of ``u`` by ``4/ht^2``; the
    residual inherits that through ``sigma_k(A_u)``.
    """
    geom = u.geometry
    d = grid.derivatives(u)
    A = grid.schouten_from(geom.lambda0, d.grad, d.hess)
    sig = np.abs(symk.sigma_k(np.linalg.eigvalsh(A), geom.k)).max()
    amp = np.abs(u.values).max() + 1.0
    return 100 * EPS * (4 * amp / geom.ht**2) * sig


def _norm2(r):
    return 0.5 * float(np.sum(r * r))


def newton_solve(u_init: SpaceTimeField, f, cfg: SolverConfig = SolverConfig(), tol: float | None = None) -> SolveState:
    """Damped Newton with an admissibility-preserving Armijo line search.

    Boundary levels of ``u_init`` are kept as Dirichlet data.  ``tol``
    overrides ``cfg.newton_tol`` (used for intermediate continuation steps).
    """
    t0 = time.perf_counter()
    geom = u_init.geometry
    fsrc = grid.source_array(geom, f)
    if np.any(fsrc <= 0):
        raise DomainError("right-hand side must be positive")
    scan = grid.admissibility_scan(u_init)
    if not scan.positive():
        raise DomainError(f"initial field is not admissible: {scan.to_dict()}")
    rel = cfg.newton_tol if tol is None else tol
    target = max(rel * float(fsrc.max()), roundoff_floor(u_init))

    u = u_init
    r = grid.fk_field(u) - fsrc
    history = [float(np.abs(r).max())]
    shrinks = 0
    lin_its = 0
    message = ""
    converged = history[-1] <= target
    it = 0
    while not converged and it < cfg.max_newton:
        it += 1
        lin = grid.linearize(u)
        delta, nits = solve_linear(lin, -r, cfg)
        lin_its += nits
        delta = delta.reshape(geom.interior_shape)
        phi0 = _norm2(r)
        alpha = 1.0
        accepted = None
        while alpha >= 1e-14:
            cand = u.with_interior(u.interior + alpha * delta)
            sc = grid.admissibility_scan(cand)
            if sc.cone.margin >= cfg.margin_floor and sc.utt_min >= cfg.margin_floor and sc.fk_min >= cfg.margin_floor:
                rc = grid.fk_field(cand) - fsrc
                if _norm2(rc) <= (1 - 2 * cfg.armijo_slope * alpha) * phi0:
                    accepted = (cand, rc, sc)
                    break
            alpha *= cfg.armijo_ratio
            shrinks += 1
        if accepted is None:
            worst = grid.admissibility_scan(u.with_interior(u.interior + 1e-14 * delta))
            if history[-1] <= 10 * roundoff_floor(u):
                converged = True
                message = "stopped at the roundoff floor"
                break
            message = (
                f"line search collapsed at iteration {it}; worst cone point {worst.cone_point}, "
                f"u_tt point {worst.utt_point}, F_k point {worst.fk_point}"
            )
            break
        u, r, scan = accepted
        history.append(float(np.abs(r).max()))
        log.debug("newton %d: residual %.3e, step %.3g", it, history[-1], alpha)
        target = max(rel * float(fsrc.max()), roundoff_floor(u))
        converged = history[-1] <= target
    if not converged and not message:
        message = f"iteration cap {cfg.max_newton} reached"
    report = SolveReport(
        converged=bool(converged),
        iterations=it,
        residual_history=history,
        margins={"cone": scan.cone.margin, "utt": scan.utt_min, "fk": scan.fk_min},
        wall_time=time.perf_counter() - t0,
        message=message,
        line_search_shrinks=shrinks,
        linear_iterations=lin_its,
        target=target,
    )
    return SolveState(u, fsrc, history[-1], it, report)


# --------------------------------------------------------------------------
# continuation


def subsolution(geom: GridGeometry, u0, u1, f_max: float, a_start: float = 1.0, a_max: float = 1e6):
    """Double ``a`` from ``a_start`` until ``U_{-a}`` is admissible with ``F_k(U_{-a}) > f_max``."""
    a = a_start
    while a <= a_max:
        w = grid.comparison_field(geom, -a, u0, u1)
        sc = grid.admissibility_scan(w)
        if sc.cone.margin > 0 and sc.utt_min > 0 and sc.fk_min > f_max:
            return a, w
        a *= 2
    raise DomainError(f"no a <= {a_max:g} makes F_k(U_-a) exceed {f_max:g}")


@dataclass
class PathReport:
    converged: bool
    a: float
    steps: list = field(default_factory=list)
    newton_iterations: int = 0
    message: str = ""
    final: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def follow_path(u: SpaceTimeField, f_from, f_to, cfg: SolverConfig, steps: int | None = None):
    """Track ``(1 - s) f_from + s f_to`` from a solution at ``s = 0`` with adaptive halving."""
    geom = u.geometry
    f_from = grid.source_array(geom, f_from)
    f_to = grid.source_array(geom, f_to)
    steps = cfg.path_steps if steps is None else steps
    ds = 1.0 / steps
    s = 0.0
    taken, total_its = [], 0
    state = None
    while s < 1.0:
        s_new = s + ds
        if s_new > 1.0 - 1e-12:
            s_new = 1.0
        fs = (1 - s_new) * f_from + s_new * f_to
        tol = cfg.newton_tol if s_new >= 1.0 else max(cfg.newton_tol, cfg.path_tol)
        try:
            trial = newton_solve(u, fs, cfg, tol=tol)
        except DomainError:
            trial = None
        if trial is not None and trial.converged:
            total_its += trial.step
            taken.append(s_new)
            u, s, state = trial.u, s_new, trial
            ds = min(ds * 1.5, 1.0 / steps)
        else:
            ds *= 0.5
            if ds < 1.0 / steps / 2**20:
                return state, taken, total_its, f"path step underflow at s={s:.6g}"
    return state, taken, total_its, ""


def continuity_solve(
    geom: GridGeometry,
    u0,
    u1,
    f_target,
    cfg: SolverConfig = SolverConfig(),
    a_start: float = 1.0,
    steps: int | None = None,
) -> tuple[SolveState, PathReport]:
    """Solve ``F_k(u) = f_target`` by continuation from the subsolution ``w = U_{-a}``."""
    ftgt = grid.source_array(geom, f_target)
    if np.any(ftgt <= 0):
        raise DomainError("f_target must be positive")
    a, w = subsolution(geom, u0, u1, float(ftgt.max()), a_start)
    f0 = grid.fk_field(w)
    state, taken, its, msg = follow_path(w, f0, ftgt, cfg, steps)
    if state is None:
        state = SolveState(w, ftgt, float(np.abs(grid.residual(w, ftgt)).max()), 0, None)
        return state, PathReport(False, a, taken, its, msg or "no step accepted")
    rep = PathReport(not msg and state.converged, a, taken, its, msg, state.report.margins)
    return state, rep


# --------------------------------------------------------------------------
# degenerate sweep


@dataclass
class SweepResult:
    schedule: list
    states: list
    a: float
    cauchy: list
    monotonicity_min: float
    monotone: bool
    converged: bool
    limit: SpaceTimeField
    extrapolated: SpaceTimeField
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule,
            "a": self.a,
            "cauchy": self.cauchy,
            "monotonicity_min": self.monotonicity_min,
            "monotone": self.monotone,
            "converged": self.converged,
            "iterations": [s.step for s in self.states],
            "residuals": [s.residual_norm for s in self.states],
            "line_search_shrinks": [s.report.line_search_shrinks if s.report else 0 for s in self.states],
            "message": self.message,
        }


def degenerate_sweep(
    geom: GridGeometry,
    u0,
    u1,
    cfg: SolverConfig = SolverConfig(),
    scale: float = 1.0,
    schedule=None,
    a_start: float = 1.0,
) -> SweepResult:
    """Solve ``F_k(u^s) = s * scale`` along a decreasing schedule, warm-starting each level."""
    schedule = list(cfg.s_schedule if schedule is None else schedule)
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("s schedule must be strictly decreasing")
    first, path = continuity_solve(geom, u0, u1, schedule[0] * scale, cfg, a_start)
    states = [first]
    msg = "" if path.converged else f"s={schedule[0]}: {path.message}"
    for s_prev, s in zip(schedule, schedule[1:]):
        if msg:
            break
        prev = states[-1]
        st = None
        try:
            st = newton_solve(prev.u, s * scale, cfg)
        except DomainError:
            pass
        if st is None or not st.converged:
            st, _, _, pmsg = follow_path(prev.u, s_prev * scale, s * scale, cfg, steps=4)
            if st is None or pmsg or not st.converged:
                msg = f"s={s:.3g}: {pmsg or 'newton failed'}"
                break
        states.append(st)
    tol = 10 * cfg.newton_tol
    mono = np.inf
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            # schedule[j] < schedule[i], so u^{s_j} >= u^{s_i}
            mono = min(mono, float(np.min(states[j].u.values - states[i].u.values)))
    cauchy = [float(np.abs(b.u.values - a.u.values).max()) for a, b in zip(states, states[1:])]
    limit = states[-1].u
    if len(states) >= 2:
        r = schedule[len(states) - 1] / schedule[len(states) - 2]
        ex = (limit.values - r * states[-2].u.values) / (1 - r)
        extrapolated = SpaceTimeField(geom, ex)
    else:
        extrapolated = limit
    return SweepResult(
        schedule=schedule[: len(states)],
        states=states,
        a=path.a,
        cauchy=cauchy,
        monotonicity_min=mono if np.isfinite(mono) else 0.0,
        monotone=bool(mono >= -tol) if np.isfinite(mono) else True,
        converged=not msg and len(states) == len(schedule),
        limit=limit,
        extrapolated=extrapolated,
        message=msg,
    )


# --------------------------------------------------------------------------
# strict approximation and uniqueness


@dataclass
class ShrinkResult:
    w: SpaceTimeField
    scan: grid.AdmissibilityReport
    ok: bool
    concavity_slack: float

    def to_dict(self) -> dict:
        return {"ok": self.ok, "concavity_slack": self.concavity_slack} | self.scan.to_dict()


def shrink_to_strict(u: SpaceTimeField, eps: float, k: int | None = None) -> ShrinkResult:
    """``w = (1 - eps) u + eps t^2``, which is strictly admissible with ``F_k(w) > 0``.

    Needs ``2k <= n``: then ``|grad u|^2 I / 2 - grad u (x) grad u`` lies in the
    closed cone.  For ``2k > n`` that matrix has eigenvalues proportional to
    ``(-1, 1, ..., 1)``, which are rejected.
    """
    geom = u.geometry
    n = geom.n
    k = geom.k if k is None else k
    if 2 * k > n:
        witness = np.ones(n)
        witness[0] = -1.0
        lab = symk.cone_test(witness, k) if k <= n else symk.ConeLabel(k, False, -np.inf)
        raise DomainError(
            f"2k <= n violated (n={n}, k={k}): lambda=(-1,1,...,1) has Gamma_{k}^+ margin {lab.margin:g}"
        )
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    t2 = geom.t_field() ** 2
    w = SpaceTimeField(geom, (1 - eps) * u.values + eps * t2)
    scan = grid.admissibility_scan(w)
    fw = np.clip(grid.fk_field(w), 0, None)
    fu = np.clip(grid.fk_field(u), 0, None)
    p = 1.0 / (k + 1)
    slack = float(np.min(fw**p - (1 - eps) * fu**p))
    ok = scan.cone.margin > 0 and scan.fk_min > 0
    return ShrinkResult(w, scan, bool(ok), slack)


@dataclass
class UniquenessReport:
    gap: float
    point: tuple
    bound: float | None = None

    @property
    def ok(self) -> bool:
        return self.bound is None or self.gap <= self.bound


def uniqueness_probe(uA: SpaceTimeField, uB: SpaceTimeField, bound: float | None = None) -> UniquenessReport:
    if uA.geometry != uB.geometry:
        raise DomainError("fields live on different grids")
    if not (np.array_equal(uA.u0, uB.u0) and np.array_equal(uA.u1, uB.u1)):
        raise DomainError("fields have different boundary data")
    diff = np.abs(uA.values - uB.values)
    i = int(np.argmax(diff))
    pt = tuple(int(v) for v in np.unravel_index(i, diff.shape))
    return UniquenessReport(float(diff.flat[i]), pt, bound)
