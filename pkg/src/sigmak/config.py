"""Run configuration: JSON parsing, validation and boundary-data families."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import GridGeometry
from .solver import SolverConfig

MODES = ("certify", "solve", "path", "sweep", "verify", "export")
FAMILIES = ("constant", "cosine", "two-mode", "file")
SOURCES = ("constant", "manufactured", "file")


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


@dataclass
class BoundarySpec:
    family: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    modes: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    phase: float = 0.0
    path: str = ""


@dataclass
class SourceSpec:
    type: str = "constant"
    value: float = 1.0
    eps: float = 0.1
    alpha: float = 1.0
    path: str = ""


@dataclass
class RunConfig:
    mode: str
    n: int
    k: int
    seed: int = 0
    samples: int = 10000
    concavity: bool = True
    concavity_samples: int = 10000
    all_pairs: bool = False
    N: int = 16
    Nt: int = 17
    L: float = 2 * np.pi
    lambda0: float = 0.5
    u0: BoundarySpec = field(default_factory=BoundarySpec)
    u1: BoundarySpec = field(default_factory=BoundarySpec)
    f: SourceSpec = field(default_factory=SourceSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    resolutions: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    out: str = "out"

    def geometry(self, N: int | None = None, Nt: int | None = None) -> GridGeometry:
        return GridGeometry(self.n, self.k, N or self.N, Nt or self.Nt, self.L, self.lambda0)

    def to_dict(self) -> dict:
        """Resolved settings; valid input for :func:`parse_config`."""
        d = asdict(self)
        d["solver"] = self.solver.to_dict()
        for key in ("resolutions", "levels"):
            if not d[key]:
                del d[key]
        return d


# --------------------------------------------------------------------------
# validation helpers


def _num(v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    return float(v)


def _int(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true/false, got {v!r}")
    return v


def _obj(v, path):
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected an object, got {type(v).__name__}")
    return v


def _reject_unknown(d, allowed, path):
    for key in d:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")


def _boundary(d, path, n) -> BoundarySpec:
    d = _obj(d, path)
    _reject_unknown(d, {f.name for f in fields(BoundarySpec)}, path)
    fam = d.get("family", "constant")
    if fam not in FAMILIES:
        raise ConfigError(f"{path}.family", f"must be one of {FAMILIES}, got {fam!r}")
    spec = BoundarySpec(family=fam)
    if "phase" in d:
        spec.phase = _num(d["phase"], f"{path}.phase")
    if fam == "constant":
        spec.value = _num(d.get("value", 0.0), f"{path}.value")
    elif fam == "cosine":
        if "amplitude" not in d or "modes" not in d:
            raise ConfigError(path, "cosine family needs 'amplitude' and 'modes'")
        spec.amplitude = _num(d["amplitude"], f"{path}.amplitude")
        modes = d["modes"]
        if isinstance(modes, list) and len(modes) == 1 and isinstance(modes[0], list):
            modes = modes[0]  # the resolved form written back by to_dict
        spec.modes = [_wave(modes, f"{path}.modes", n)]
    elif fam == "two-mode":
        if "amplitudes" not in d or "modes" not in d:
            raise ConfigError(path, "two-mode family needs 'amplitudes' and 'modes'")
        amps, modes = d["amplitudes"], d["modes"]
        if not isinstance(amps, list) or len(amps) != 2:
            raise ConfigError(f"{path}.amplitudes", "expected a list of two numbers")
        if not isinstance(modes, list) or len(modes) != 2:
            raise ConfigError(f"{path}.modes", "expected a list of two wave vectors")
        spec.amplitudes = [_num(a, f"{path}.amplitudes[{i}]") for i, a in enumerate(amps)]
        spec.modes = [_wave(m, f"{path}.modes[{i}]", n) for i, m in enumerate(modes)]
    else:
        if not isinstance(d.get("path"), str):
            raise ConfigError(f"{path}.path", "file family needs a path string")
        spec.path = d["path"]
    return spec


def _wave(m, path, n):
    if not isinstance(m, list) or len(m) != n:
        raise ConfigError(path, f"expected {n} integer mode indices")
    return [_int(v, f"{path}[{i}]") for i, v in enumerate(m)]


def _source(d, path) -> SourceSpec:
    d = _obj(d, path)
    _reject_unknown(d, {f.name for f in fields(SourceSpec)}, path)
    typ = d.get("type", "constant")
    if typ not in SOURCES:
        raise ConfigError(f"{path}.type", f"must be one of {SOURCES}, got {typ!r}")
    spec = SourceSpec(type=typ)
    if typ == "constant":
        spec.value = _num(d.get("value", 1.0), f"{path}.value", positive=True)
    elif typ == "manufactured":
        spec.eps = _num(d.get("eps", 0.1), f"{path}.eps")
        spec.alpha = _num(d.get("alpha", 1.0), f"{path}.alpha", positive=True)
    else:
        if not isinstance(d.get("path"), str):
            raise ConfigError(f"{path}.path", "file source needs a path string")
        spec.path = d["path"]
    return spec


def _solver(d, path) -> SolverConfig:
    d = _obj(d, path)
    names = {f.name: f for f in fields(SolverConfig)}
    _reject_unknown(d, names, path)
    kw = {}
    for key, v in d.items():
        if names[key].type in ("int", int):
            kw[key] = _int(v, f"{path}.{key}", minimum=0)
        else:
            kw[key] = _num(v, f"{path}.{key}", positive=True)
    try:
        return SolverConfig(**kw)
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


GEOMETRY_MODES = ("solve", "path", "sweep", "verify", "export")


def parse_config(text: str, base_dir: str | Path | None = None) -> RunConfig:
    """Validate a JSON configuration; every error names the offending field."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON: {e}") from None
    d = _obj(d, "")
    allowed = {f.name for f in fields(RunConfig)}
    _reject_unknown(d, allowed, "")
    for req in ("mode", "n", "k"):
        if req not in d:
            raise ConfigError(req, "missing required field")
    mode = d["mode"]
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {mode!r}")
    n = _int(d["n"], "n", minimum=1)
    k = _int(d["k"], "k", minimum=1)
    if 2 * k > n:
        raise ConfigError("k", f"2k <= n violated (n={n}, k={k})")
    cfg = RunConfig(mode=mode, n=n, k=k)

    if "seed" in d:
        cfg.seed = _int(d["seed"], "seed", minimum=0)
    if mode == "certify":
        if "samples" not in d:
            raise ConfigError("samples", "missing required field")
        cfg.samples = _int(d["samples"], "samples", minimum=1)
        if "seed" not in d:
            raise ConfigError("seed", "missing required field")
    elif "samples" in d:
        cfg.samples = _int(d["samples"], "samples", minimum=1)
    if "concavity" in d:
        cfg.concavity = _bool(d["concavity"], "concavity")
    if "concavity_samples" in d:
        cfg.concavity_samples = _int(d["concavity_samples"], "concavity_samples", minimum=1)
    if "all_pairs" in d:
        cfg.all_pairs = _bool(d["all_pairs"], "all_pairs")

    for key in ("N", "Nt"):
        if key in d:
            setattr(cfg, key, _int(d[key], key, minimum=1))
    if mode in GEOMETRY_MODES and "N" in d and "Nt" not in d:
        cfg.Nt = cfg.N + 1
    for key in ("L", "lambda0"):
        if key in d:
            setattr(cfg, key, _num(d[key], key, positive=True))
    if cfg.N < 4:
        raise ConfigError("N", f"resolution must be >= 4, got {cfg.N}")
    if cfg.Nt < 3:
        raise ConfigError("Nt", f"resolution must be >= 3, got {cfg.Nt}")

    if "u0" in d:
        cfg.u0 = _boundary(d["u0"], "u0", n)
    if "u1" in d:
        cfg.u1 = _boundary(d["u1"], "u1", n)
    if "f" in d:
        cfg.f = _source(d["f"], "f")
    if "solver" in d:
        cfg.solver = _solver(d["solver"], "solver")

    if "resolutions" in d:
        res = d["resolutions"]
        if not isinstance(res, list) or len(res) < 2:
            raise ConfigError("resolutions", "expected a list of at least two [N, Nt] pairs")
        out = []
        for i, r in enumerate(res):
            if not isinstance(r, list) or len(r) != 2:
                raise ConfigError(f"resolutions[{i}]", "expected [N, Nt]")
            out.append([_int(r[0], f"resolutions[{i}][0]", 4), _int(r[1], f"resolutions[{i}][1]", 3)])
        cfg.resolutions = out
    elif mode == "verify":
        cfg.resolutions = [[cfg.N, cfg.Nt], [2 * cfg.N, 2 * cfg.Nt + 1]]

    if "levels" in d:
        lv = d["levels"]
        if not isinstance(lv, list):
            raise ConfigError("levels", "expected a list of time levels")
        cfg.levels = [_int(v, f"levels[{i}]", 0) for i, v in enumerate(lv)]
        for i, v in enumerate(cfg.levels):
            if v > cfg.Nt + 1:
                raise ConfigError(f"levels[{i}]", f"time level {v} exceeds Nt+1={cfg.Nt + 1}")
    elif mode == "export":
        cfg.levels = [0, (cfg.Nt + 1) // 2, cfg.Nt + 1]

    if "out" in d:
        if not isinstance(d["out"], str):
            raise ConfigError("out", "expected a directory path")
        cfg.out = d["out"]

    if base_dir is not None:
        for spec in (cfg.u0, cfg.u1, cfg.f):
            if spec.path and not Path(spec.path).is_absolute():
                spec.path = str(Path(base_dir) / spec.path)
    return cfg


# --------------------------------------------------------------------------
# realizing boundary data and sources


def boundary_slice(spec: BoundarySpec, geom: GridGeometry) -> np.ndarray:
    X = geom.coords()
    kx = 2 * np.pi / geom.L
    if spec.family == "constant":
        return np.full(geom.slice_shape, spec.value)
    if spec.family == "cosine":
        th = sum(kx * m * X[a] for a, m in enumerate(spec.modes[0])) + spec.phase
        return spec.amplitude * np.cos(th)
    if spec.family == "two-mode":
        out = np.zeros(geom.slice_shape)
        for amp, wave in zip(spec.amplitudes, spec.modes):
            out = out + amp * np.cos(sum(kx * m * X[a] for a, m in enumerate(wave)) + spec.phase)
        return out
    vals = np.fromfile(spec.path, dtype="<f8")
    if vals.size != geom.N**geom.n:
        raise ConfigError("path", f"{spec.path}: expected {geom.N**geom.n} values, found {vals.size}")
    return vals.reshape(geom.slice_shape)


def source_and_boundary(cfg: RunConfig, geom: GridGeometry):
    """``(u0, u1, f, exact)``; ``exact`` is the manufactured field or ``None``."""
    if cfg.f.type == "manufactured":
        from .manufactured import default_manufactured

        ms = default_manufactured(geom.n, cfg.f.eps, cfg.f.alpha)
        ex = ms.field(geom)
        return ex.u0, ex.u1, ms.fk(geom), ex
    u0 = boundary_slice(cfg.u0, geom)
    u1 = boundary_slice(cfg.u1, geom)
    if cfg.f.type == "constant":
        return u0, u1, cfg.f.value, None
    vals = np.fromfile(cfg.f.path, dtype="<f8")
    if vals.size != geom.n_interior:
        raise ConfigError("f.path", f"{cfg.f.path}: expected {geom.n_interior} values, found {vals.size}")
    return u0, u1, vals.reshape(geom.interior_shape), None
