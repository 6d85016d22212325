"""Kelvin-transformed CGO probe field and its tractions.

The probe is ``v(y) = (e1 + i e2) f(w)`` with ``w = (y1 - x1) + i (y2 - x2)``
and ``f(w) = exp(-i tau / w)``.  Because ``f`` is holomorphic, ``v`` is
divergence free and solves the Navier system away from ``x``; its stress is
``sigma(v) = 2 mu eps(v)`` and for any unit normal ``n``

    sigma(v) n = 2 mu f'(w) (n1 + i n2) (e1 + i e2).

With ``n = e2`` this reduces to ``2 mu tau zeta^2 v`` where
``zeta = (y - x)/|y - x|^2 . (e2 + i e1) = i / w``.

All pairings with real vectors are bilinear (no conjugation).  Every function
accepts ``weight_s``: when given, values are multiplied by ``exp(-tau/(2 s))``
inside the exponent so that large tau never overflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Material

DIR = np.array([1.0, 1.0j])  # e1 + i e2


def _w(y, x) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    w = (y[..., 0] - x[0]) + 1j * (y[..., 1] - x[1])
    if np.any(w == 0):
        raise ValueError("probe field evaluated at its pole y = x")
    return w


def circle_exponent(y, x, s: float) -> np.ndarray:
    """(|y - (x - s e2)|^2 - s^2) / (2 s |y - x|^2), the decay rate per unit tau.

    Negative inside the disc B_s(x - s e2), zero on its boundary circle.
    """
    y = np.asarray(y, dtype=float)
    d1 = y[..., 0] - x[0]
    d2 = y[..., 1] - x[1]
    r2 = d1 * d1 + d2 * d2
    return (d1 * d1 + (d2 + s) ** 2 - s * s) / (2.0 * s * r2)


def log_f(y, x, tau: float, weight_s: float | None = None) -> np.ndarray:
    """log of the scalar factor f, optionally shifted by -tau/(2 s)."""
    w = _w(y, x)
    if weight_s is None:
        return -1j * tau / w
    r2 = (w * w.conjugate()).real
    return -tau * circle_exponent(y, x, weight_s) - 1j * tau * w.real / r2


def scalar_v(y, x, tau, weight_s=None) -> np.ndarray:
    return np.exp(log_f(y, x, tau, weight_s))


def v_tau(y, x, tau: float, weight_s: float | None = None) -> np.ndarray:
    """Probe displacement, shape (..., 2) complex."""
    return scalar_v(y, x, tau, weight_s)[..., None] * DIR


def v_tau_prime(y, x, tau: float, weight_s: float | None = None) -> np.ndarray:
    """Derivative of the probe with respect to tau: (-i/w) v."""
    w = _w(y, x)
    return ((-1j / w) * scalar_v(y, x, tau, weight_s))[..., None] * DIR


def _normal_factor(normal, shape) -> np.ndarray:
    n = np.asarray(normal, dtype=float)
    if n.ndim == 1:
        n = np.broadcast_to(n, shape + (2,))
    return n[..., 0] + 1j * n[..., 1]


def dscalar_v(y, x, tau, weight_s=None) -> np.ndarray:
    """df/dw for the (weighted) scalar factor."""
    w = _w(y, x)
    return (1j * tau / (w * w)) * scalar_v(y, x, tau, weight_s)


def dscalar_vprime(y, x, tau, weight_s=None) -> np.ndarray:
    """d/dw of the tau-derivative factor (-i/w) f."""
    w = _w(y, x)
    return (1j / (w * w) + tau / (w * w * w)) * scalar_v(y, x, tau, weight_s)


def traction_v(y, x, tau: float, mat: Material, normal=(0.0, 1.0),
               weight_s: float | None = None) -> np.ndarray:
    """sigma(v_tau) n, shape (..., 2) complex."""
    fp = dscalar_v(y, x, tau, weight_s)
    nf = _normal_factor(normal, fp.shape)
    return (2.0 * mat.mu * fp * nf)[..., None] * DIR


def traction_vprime(y, x, tau: float, mat: Material, normal=(0.0, 1.0),
                    weight_s: float | None = None) -> np.ndarray:
    """sigma(v'_tau) n, shape (..., 2) complex."""
    fp = dscalar_vprime(y, x, tau, weight_s)
    nf = _normal_factor(normal, fp.shape)
    return (2.0 * mat.mu * fp * nf)[..., None] * DIR


def traction_v_e2(y, x, tau, mat, weight_s=None):
    """The e2-traction in the printed form 2 mu tau zeta^2 v, zeta = i/w."""
    zeta = 1j / _w(y, x)
    return (2 * mat.mu * tau * zeta ** 2)[..., None] * v_tau(y, x, tau, weight_s)


def traction_vprime_e2(y, x, tau, mat, weight_s=None):
    """The e2-traction of v' in the printed form 2 mu (1 - tau zeta) zeta^2 v."""
    zeta = 1j / _w(y, x)
    return (2 * mat.mu * (1 - tau * zeta) * zeta ** 2)[..., None] * v_tau(y, x, tau, weight_s)


@dataclass(frozen=True)
class NavierReport:
    navier_residual: float
    divergence: float
    field_scale: float
    h: float
    reliable: bool

    @property
    def ok(self) -> bool:
        return self.reliable and max(self.navier_residual, self.divergence) <= 1e-5 * self.field_scale


def verify_navier(x, tau: float, mat: Material, points, h: float = 1e-5) -> NavierReport:
    """Finite-difference check that the probe solves the Navier system.

    Uses 5-point stencils with step ``h * max(1, |w|)`` per point.  The stencil
    is declared unreliable when it reaches within ten steps of the pole.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float)
    nav = div = scale = 0.0
    reliable = True
    e = np.eye(2)
    for y in pts:
        dist = np.hypot(*(y - x))
        hh = h * max(1.0, dist)
        if 10 * hh >= dist:
            reliable = False
        f = lambda p: v_tau(p, x, tau)
        c = f(y)
        d1 = [(f(y + hh * e[k]) - f(y - hh * e[k])) / (2 * hh) for k in range(2)]
        d2 = [(f(y + hh * e[k]) - 2 * c + f(y - hh * e[k])) / hh ** 2 for k in range(2)]
        dxy = (f(y + hh * (e[0] + e[1])) - f(y + hh * (e[0] - e[1]))
               - f(y - hh * (e[0] - e[1])) + f(y - hh * (e[0] + e[1]))) / (4 * hh ** 2)
        lap = d2[0] + d2[1]
        # grad(div v) = (d11 v1 + d12 v2, d12 v1 + d22 v2)
        gdiv = np.array([d2[0][0] + dxy[1], dxy[0] + d2[1][1]])
        res = mat.mu * lap + (mat.lam + mat.mu) * gdiv
        dv = d1[0][0] + d1[1][1]
        w = abs(complex(*(y - x)))
        local = np.abs(c).max() * (1 + tau / w ** 2) ** 2 * max(mat.mu, abs(mat.lam) + mat.mu)
        nav = max(nav, float(np.abs(res).max()))
        div = max(div, float(abs(dv)))
        scale = max(scale, float(local))
    return NavierReport(nav, div, scale, h, reliable)
