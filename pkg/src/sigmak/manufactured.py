"""Closed-form trigonometric test fields with analytic derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid
from .grid import GridGeometry, SpaceTimeField

# time profiles (phi, phi', phi'')
_PROFILES = {
    "one": (lambda t: np.ones_like(t), lambda t: np.zeros_like(t), lambda t: np.zeros_like(t)),
    "left": (lambda t: 1 - t, lambda t: -np.ones_like(t), lambda t: np.zeros_like(t)),
    "right": (lambda t: t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
    "bump": (lambda t: t * (1 - t), lambda t: 1 - 2 * t, lambda t: -2 * np.ones_like(t)),
}


@dataclass(frozen=True)
class Mode:
    amp: float
    wave: tuple
    profile: str = "one"
    phase: float = 0.0


@dataclass(frozen=True)
class TrigField:
    """``u = -alpha t (1 - t) + sum amp phi(t) cos(2 pi m.x / L + phase)``."""

    alpha: float
    modes: tuple = field(default_factory=tuple)

    def _parts(self, geom: GridGeometry):
        t = geom.t.reshape((-1,) + (1,) * geom.n)
        X = geom.coords()
        kx = 2 * np.pi / geom.L
        for m in self.modes:
            if len(m.wave) != geom.n:
                raise ValueError(f"mode {m.wave} does not match n={geom.n}")
            kv = kx * np.asarray(m.wave, float)
            theta = sum(kv[a] * X[a] for a in range(geom.n)) + m.phase
            phi, dphi, ddphi = (g(t) for g in _PROFILES[m.profile])
            yield m.amp, kv, np.cos(theta)[None], np.sin(theta)[None], phi, dphi, ddphi

    def values(self, geom: GridGeometry) -> np.ndarray:
        t = geom.t.reshape((-1,) + (1,) * geom.n)
        u = np.broadcast_to(-self.alpha * t * (1 - t), geom.shape).copy()
        for amp, _, c, _, phi, _, _ in self._parts(geom):
            u = u + amp * phi * c
        return u

    def field(self, geom: GridGeometry) -> SpaceTimeField:
        return SpaceTimeField(geom, self.values(geom))

    def derivatives(self, geom: GridGeometry) -> grid.Derivatives:
        """Exact derivatives on interior levels, in the layout of :func:`grid.derivatives`."""
        n = geom.n
        t = geom.t.reshape((-1,) + (1,) * n)
        shape = geom.shape
        utt = np.full(shape, 2.0 * self.alpha)
        grad = np.zeros(shape + (n,))
        hess = np.zeros(shape + (n, n))
        grad_t = np.zeros(shape + (n,))
        for amp, kv, c, s, phi, dphi, ddphi in self._parts(geom):
            utt = utt + amp * ddphi * c
            for a in range(n):
                grad[..., a] -= amp * phi * kv[a] * s
                grad_t[..., a] -= amp * dphi * kv[a] * s
                for b in range(n):
                    hess[..., a, b] -= amp * phi * kv[a] * kv[b] * c
        del t
        sl = slice(1, -1)
        return grid.Derivatives(utt[sl], grad[sl], hess[sl], grad_t[sl])

    def fk(self, geom: GridGeometry) -> np.ndarray:
        """Analytic ``F_k(u)`` sampled on interior points."""
        d = self.derivatives(geom)
        A = grid.schouten_from(geom.lambda0, d.grad, d.hess)
        return grid.fk_pointwise(d.utt, A, d.grad_t, geom.k)

    def schouten(self, geom: GridGeometry) -> np.ndarray:
        d = self.derivatives(geom)
        return grid.schouten_from(geom.lambda0, d.grad, d.hess)


def default_manufactured(n: int, eps: float = 0.1, alpha: float = 1.0) -> TrigField:
    """A smooth, admissible, genuinely space-time dependent test solution."""
    e1 = tuple(1 if a == 0 else 0 for a in range(n))
    e2 = tuple(1 if a == 1 % n else 0 for a in range(n))
    diag = tuple(1 for _ in range(n))
    return TrigField(
        alpha,
        (
            Mode(eps, e1, "left"),
            Mode(eps, e2, "right", -np.pi / 2),
            Mode(0.5 * eps, diag, "bump"),
        ),
    )
