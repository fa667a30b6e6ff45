"""``gs`` command line: certify | solve | path | sweep | verify | export."""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_NOCONV, EXIT_CERT = 0, 1, 2, 3

log = logging.getLogger("sigmak")


def _set_threads(n: int):
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _dump(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def _default(o):
    import numpy as np

    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _finite(obj):
    """Replace inf/nan by strings so the JSON stays standard."""
    import math

    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


class Run:
    def __init__(self, cfg, out: Path, figures: bool):
        self.cfg = cfg
        self.out = out
        self.figures = figures
        self.timings = {}

    def figure(self, fn, *args):
        if not self.figures:
            return
        from . import plotting

        getattr(plotting, fn)(*args)

    # -- modes ---------------------------------------------------------------

    def certify(self) -> int:
        from . import hyperbolic as hy

        cfg = self.cfg
        pairs = (
            [(n, k) for n in range(2, cfg.n + 1) for k in range(1, n + 1)] if cfg.all_pairs else [(cfg.n, cfg.k)]
        )
        reports = []
        for n, k in pairs:
            conc = cfg.concavity and n <= 6
            t0 = time.perf_counter()
            rep = hy.certification_campaign(n, k, cfg.samples, cfg.seed, concavity=conc)
            self.timings[f"certify_{n}_{k}"] = time.perf_counter() - t0
            reports.append(rep)
            log.info("certified n=%d k=%d ok=%s", n, k, rep.ok)
        (self.out / "cert_report.json").write_text(hy.campaign_json(reports))
        rows = []
        for r in reports:
            rows.append({"n": r.n, "k": r.k, "ok": r.ok} | {key: r.worst[key] for key in sorted(r.worst)})
        _write_csv(self.out / "cert_summary.csv", rows)
        self.figure("certification", rows, self.out / "cert_summary.png")
        return EXIT_OK if all(r.ok for r in reports) else EXIT_CERT

    def _geometry_inputs(self):
        from .config import source_and_boundary

        geom = self.cfg.geometry()
        u0, u1, f, exact = source_and_boundary(self.cfg, geom)
        return geom, u0, u1, f, exact

    def _write_state(self, st, a, exact, stem="solution"):
        from . import estimates, grid

        grid.save_field(st.u, self.out / stem)
        bounds = estimates.bound_report(st.u, a).to_dict()
        if exact is not None:
            import numpy as np

            bounds["error_vs_exact"] = float(np.abs(st.u.values - exact.values).max())
        _dump(self.out / "bounds.json", _finite(bounds))
        g = st.u.geometry
        mid = (g.Nt + 1) // 2
        grid.export_slice_csv(st.u, mid, self.out / f"{stem}_t{mid:03d}.csv")
        self.figure("time_slice", st.u.values[mid], g.x, self.out / f"{stem}_t{mid:03d}.png", f"u at t={g.t[mid]:.3f}")

    def solve(self) -> int:
        from . import solver

        geom, u0, u1, f, exact = self._geometry_inputs()
        import numpy as np

        fmax = float(np.max(f))
        a, w = solver.subsolution(geom, u0, u1, fmax)
        t0 = time.perf_counter()
        st = solver.newton_solve(w, f, self.cfg.solver)
        self.timings["solve"] = time.perf_counter() - t0
        rep = st.report.to_dict() | {"subsolution_a": a}
        _dump(self.out / "solve_report.json", _finite(rep))
        _write_csv(self.out / "residual_history.csv", [{"iteration": i, "residual": r} for i, r in enumerate(st.report.residual_history)])
        self.figure("residual_history", st.report.residual_history, self.out / "residual_history.png")
        self._write_state(st, a, exact)
        return EXIT_OK if st.converged else EXIT_NOCONV

    def path(self) -> int:
        from . import solver

        geom, u0, u1, f, exact = self._geometry_inputs()
        t0 = time.perf_counter()
        st, path = solver.continuity_solve(geom, u0, u1, f, self.cfg.solver)
        self.timings["path"] = time.perf_counter() - t0
        rep = {"path": path.to_dict(), "final": st.report.to_dict() if st.report else None}
        _dump(self.out / "solve_report.json", _finite(rep))
        if st.report:
            self.figure("residual_history", st.report.residual_history, self.out / "residual_history.png")
        self._write_state(st, path.a, exact)
        return EXIT_OK if path.converged else EXIT_NOCONV

    def sweep(self) -> int:
        import numpy as np

        from . import estimates, grid, solver

        geom, u0, u1, _, _ = self._geometry_inputs()
        t0 = time.perf_counter()
        res = solver.degenerate_sweep(geom, u0, u1, self.cfg.solver)
        self.timings["sweep"] = time.perf_counter() - t0
        rows = []
        for s, st in zip(res.schedule, res.states):
            b = estimates.bound_report(st.u, res.a)
            row = {"s": s, "iterations": st.step, "residual": st.residual_norm} | {
                key: getattr(b, key)
                for key in ("c0_low_slack", "c0_high_slack", "utt_min", *estimates.SUPREMA)
            }
            if np.allclose(u0, u0.flat[0]) and np.allclose(u1, u0.flat[0]):
                exact = grid.comparison_field(geom, -grid.homogeneous_constant(geom, s), u0, u1)
                row["closed_form_error"] = float(np.abs(st.u.values - exact.values).max())
            rows.append(row)
        _write_csv(self.out / "sweep.csv", rows)
        _dump(self.out / "sweep_report.json", _finite(res.to_dict() | {"stages": rows}))
        grid.save_field(res.limit, self.out / "limit")
        grid.save_field(res.extrapolated, self.out / "limit_extrapolated")
        self.figure("sweep", res.schedule, res.cauchy, [r["sup_utt"] for r in rows], self.out / "sweep.png")
        ok = res.converged and res.monotone
        return EXIT_OK if ok else EXIT_NOCONV

    def verify(self) -> int:
        from . import estimates
        from .config import source_and_boundary

        cfg = self.cfg

        def boundary(geom):
            u0, u1, _, _ = source_and_boundary(cfg, geom)
            return u0, u1

        f = cfg.f.value if cfg.f.type == "constant" else 1.0
        problem = estimates.Problem(cfg.n, cfg.k, boundary, f, cfg.L, cfg.lambda0)
        t0 = time.perf_counter()
        reports = estimates.refinement_study(problem, [tuple(r) for r in cfg.resolutions], cfg.solver)
        self.timings["verify"] = time.perf_counter() - t0
        (self.out / "bounds.json").write_text(estimates.reports_json(reports))
        (self.out / "bounds.csv").write_text(estimates.reports_csv(reports))
        self.figure("refinement", reports, self.out / "bounds.png")
        tol = 10 * cfg.solver.newton_tol
        return EXIT_OK if all(r.slacks_ok(tol) for r in reports) else EXIT_NOCONV

    def export(self) -> int:
        from . import grid, solver

        geom, u0, u1, f, _ = self._geometry_inputs()
        st, path = solver.continuity_solve(geom, u0, u1, f, self.cfg.solver)
        grid.save_field(st.u, self.out / "field")
        for lv in self.cfg.levels:
            grid.export_slice_csv(st.u, lv, self.out / f"slice_t{lv:03d}.csv")
            self.figure("time_slice", st.u.values[lv], geom.x, self.out / f"slice_t{lv:03d}.png", f"u at t={geom.t[lv]:.3f}")
        return EXIT_OK if path.converged else EXIT_NOCONV


def _write_csv(path: Path, rows: list[dict]):
    import csv

    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def build_parser() -> argparse.ArgumentParser:
    from .config import MODES

    p = argparse.ArgumentParser(prog="gs", description="sigma_k geodesic toolkit")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--threads", type=int, default=0, help="worker threads (0 = library default)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    from . import __version__
    from .config import ConfigError, parse_config
    from .errors import DomainError

    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, base_dir=Path(args.config).parent)
    except (OSError, ConfigError) as e:
        print(f"gs: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.mode != args.mode:
        print(f"gs: config error: mode: config says {cfg.mode!r} but command is {args.mode!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        cfg.out = args.out
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "resolved_config.json", _finite(cfg.to_dict()))

    run = Run(cfg, out, figures=not args.no_figures)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        code = getattr(run, cfg.mode)()
    except (DomainError, ConfigError) as e:
        print(f"gs: {e}", file=sys.stderr)
        code = EXIT_USAGE
    meta = {
        "started": started,
        "wall_time": time.perf_counter() - t0,
        "timings": run.timings,
        "exit_code": code,
        "version": __version__,
        "python": platform.python_version(),
        "threads": args.threads,
    }
    _dump(out / "metadata.json", meta)
    return code


if __name__ == "__main__":
    sys.exit(main())
