"""Semi-analytic ground truth that does not touch the finite element solver.

Three ingredients:

* crack-opening displacements built from the odd terms of the crack-tip
  eigenfunction series, optionally cut off by a smooth window;
* the model oscillatory integrals ``I_n`` / ``I'_n`` along the crack line
  near the touched tip, with their closed-form large-tau limits;
* the leading coefficients ``C_k`` of the large-tau expansion of the
  indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import CrackConfig, Material, PlateGeometry, kolosov_kappa
from .quadrature import integrate


# ---------------------------------------------------------------------------
# crack-tip series


@dataclass(frozen=True)
class SeriesCoefficients:
    """Odd-index series coefficients at interior tip ``tip``.

    ``A[k-1]`` and ``B[k-1]`` hold A_{2k-1} and B_{2k-1}.  ``eta`` is the
    radius past which the windowed jump vanishes.
    """

    tip: int
    A: tuple[float, ...]
    B: tuple[float, ...]
    eta: float

    def __init__(self, tip: int, A: Sequence[float], B: Sequence[float], eta: float):
        object.__setattr__(self, "tip", int(tip))
        object.__setattr__(self, "A", tuple(float(a) for a in A))
        object.__setattr__(self, "B", tuple(float(b) for b in B))
        object.__setattr__(self, "eta", float(eta))
        if len(self.A) != len(self.B) or not self.A:
            raise ValueError("need K >= 1 matching (A, B) coefficient pairs")
        if not self.eta > 0:
            raise ValueError("cutoff radius eta must be positive")

    @property
    def K(self) -> int:
        return len(self.A)

    def check_radius(self, cracks: CrackConfig, geom: PlateGeometry) -> None:
        """Enforce eta below half the admissible series radius."""
        t = cracks.tips
        eta0 = min(min(b - a for a, b in zip(t[:-1], t[1:])), geom.b - geom.c, geom.c)
        if not self.eta < 0.5 * eta0:
            raise ValueError(f"eta={self.eta} must be below half of {eta0}")


def series_jump(r, coeffs: SeriesCoefficients, mat: Material) -> np.ndarray:
    """Crack opening u+ - u- at distance ``r`` from the tip, shape (..., 2)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance from the tip must be non-negative")
    kappa = kolosov_kappa(mat)
    out = np.zeros(r.shape + (2,))
    j = coeffs.tip
    for k, (A, B) in enumerate(zip(coeffs.A, coeffs.B), start=1):
        term = (-1.0) ** (k + j) * r ** ((2 * k - 1) / 2)
        out[..., 0] += -B * term
        out[..., 1] += A * term
    return out * ((kappa + 1.0) / mat.mu)


@dataclass(frozen=True)
class SmoothWindow:
    """1 on [0, r_flat], 0 on [r_zero, inf), quintic smoothstep in between."""

    r_flat: float
    r_zero: float

    def __post_init__(self):
        if not 0 <= self.r_flat < self.r_zero:
            raise ValueError("need 0 <= r_flat < r_zero")

    @classmethod
    def for_eta(cls, eta: float, r_flat: float | None = None) -> "SmoothWindow":
        return cls(0.5 * eta if r_flat is None else r_flat, eta)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        u = np.clip((r - self.r_flat) / (self.r_zero - self.r_flat), 0.0, 1.0)
        return 1.0 - u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)

    @property
    def breakpoints(self) -> tuple[float, float]:
        return (self.r_flat, self.r_zero)


@dataclass(frozen=True)
class JumpPiece:
    """A crack opening supported on [0, r_max] measured from ``tip_x``.

    Points are ``y1 = tip_x + direction * r``.  ``singular`` marks a
    square-root endpoint at r = 0, handled with the substitution r = t^2.
    """

    tip_x: float
    direction: int
    r_max: float
    func: Callable[[np.ndarray], np.ndarray]
    breaks: tuple[float, ...] = ()
    singular: bool = True


@dataclass(frozen=True)
class SeriesJump:
    """Sum of windowed series openings at several interior tips."""

    cracks: CrackConfig
    mat: Material
    coeffs: tuple[SeriesCoefficients, ...]
    windows: tuple[SmoothWindow, ...] = field(default=())

    def __post_init__(self):
        if not self.windows:
            object.__setattr__(self, "windows", tuple(SmoothWindow.for_eta(c.eta) for c in self.coeffs))
        if len(self.windows) != len(self.coeffs):
            raise ValueError("one window per tip")
        for c in self.coeffs:
            if c.tip not in self.cracks.interior_tips:
                raise ValueError(f"tip index {c.tip} is not an interior tip")

    @property
    def pieces(self) -> list[JumpPiece]:
        out = []
        for c, win in zip(self.coeffs, self.windows):
            def func(r, c=c, win=win):
                return win(r)[..., None] * series_jump(r, c, self.mat)
            out.append(JumpPiece(self.cracks.tips[c.tip], -1 if c.tip % 2 else 1,
                                 win.r_zero, func, win.breakpoints))
        return out

    def __call__(self, y1) -> np.ndarray:
        y1 = np.asarray(y1, dtype=float)
        out = np.zeros(y1.shape + (2,))
        for p in self.pieces:
            r = (y1 - p.tip_x) * p.direction
            inside = (r >= 0) & (r <= p.r_max)
            out[inside] += p.func(r[inside])
        return out

    def scaled(self, factor: float) -> "SeriesJump":
        cs = tuple(SeriesCoefficients(c.tip, [factor * a for a in c.A], [factor * b for b in c.B], c.eta)
                   for c in self.coeffs)
        return SeriesJump(self.cracks, self.mat, cs, self.windows)


def windowed_jump(coeffs: SeriesCoefficients | Sequence[SeriesCoefficients], cracks: CrackConfig,
                  mat: Material, window: SmoothWindow | Sequence[SmoothWindow] | None = None) -> SeriesJump:
    if isinstance(coeffs, SeriesCoefficients):
        coeffs = [coeffs]
    coeffs = tuple(coeffs)
    if window is None:
        windows: tuple = ()
    elif isinstance(window, SmoothWindow):
        windows = (window,) * len(coeffs)
    else:
        windows = tuple(window)
    return SeriesJump(cracks, mat, coeffs, windows)


# ---------------------------------------------------------------------------
# model oscillatory integrals


@dataclass(frozen=True)
class AlphaKernelParams:
    """Kernel data for the model integrals near the touched tip.

    ``odd`` is the parity of the tip index.  ``eta_prime`` is the upper
    integration limit; by default it is the chord overshoot of the ball
    of radius ``s0 + delta``.
    """

    s0: float
    alpha: float
    odd: bool
    eta_prime: float

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if not (-0.5 * math.pi < self.alpha <= 0.5 * math.pi + 1e-15):
            raise ValueError("alpha must lie in ]-pi/2, pi/2]")
        if not self.eta_prime > 0:
            raise ValueError("eta_prime must be positive")

    @classmethod
    def from_delta(cls, s0: float, alpha: float, odd: bool, delta: float | None = None):
        if delta is None:
            delta = 0.1 * s0
        return cls(s0, alpha, bool(odd), chord_overshoot(s0, alpha, delta))

    @property
    def z_alpha(self) -> complex:
        return complex(-math.cos(self.alpha), 1.0 + math.sin(self.alpha))

    @property
    def sign(self) -> int:
        """(-1)^j."""
        return -1 if self.odd else 1

    @property
    def pole(self) -> complex:
        """The point s0 * conj(z) (odd) or s0 * z (even) subtracted from r."""
        z = self.z_alpha
        return self.s0 * (z.conjugate() if self.odd else z)

    @property
    def theta(self) -> float:
        """Frequency (-1)^{j+1} cos(alpha) / (2 s0 (1 + sin alpha)) of the residual phase."""
        return -self.sign * math.cos(self.alpha) / (2 * self.s0 * (1 + math.sin(self.alpha)))


def chord_overshoot(s0: float, alpha: float, delta: float) -> float:
    """How far the ball of radius s0 + delta reaches past the tip along the crack."""
    return math.sqrt((s0 + delta) ** 2 - (s0 * math.sin(alpha)) ** 2) - s0 * math.cos(alpha)


def log_derivative_closed_form(s0: float, alpha: float, j: int) -> complex:
    """Large-tau limit of I'/I: 1/(2 s0) + i (-1)^{j+1} cos a / (2 s0 (1 + sin a))."""
    sgn = 1.0 if j % 2 else -1.0
    return complex(1.0 / (2 * s0), sgn * math.cos(alpha) / (2 * s0 * (1 + math.sin(alpha))))


def _kernel(n: int, tau: float, p: AlphaKernelParams, prime: bool):
    q_pole = p.pole
    sgn = p.sign
    cos_a = math.cos(p.alpha)

    def f(t):
        r = t * t
        q = r - q_pole
        absq2 = (q * q.conjugate()).real
        # exponent -(-1)^j i tau / q - tau/(2 s0), real part in cancellation-free form
        re = -tau * r * (r + 2 * p.s0 * cos_a) / (2 * p.s0 * absq2)
        im = -sgn * tau * q.real / absq2
        val = r ** ((2 * n - 1) / 2) / (q * q) * np.exp(re + 1j * im) * (2 * t)
        if prime:
            val = val * (1.0 - sgn * 1j * tau / q)
        return val
    return f


def _t_edges(tau: float, p: AlphaKernelParams) -> np.ndarray:
    T = math.sqrt(p.eta_prime)
    scale = abs(p.pole) ** 2 / max(tau, 1e-300)
    ts = math.sqrt(scale)
    inner = ts * np.geomspace(1e-3, 8.0, 24)
    edges = np.concatenate([[0.0], inner[inner < T], [T]])
    return edges


def oscillatory_I(n: int, tau: float, params: AlphaKernelParams, weighted: bool = True,
                  rtol: float = 1e-12) -> complex:
    """Model integral I_n(tau); multiplied by exp(-tau/(2 s0)) when ``weighted``."""
    return _osc(n, tau, params, False, weighted, rtol)


def oscillatory_Iprime(n: int, tau: float, params: AlphaKernelParams, weighted: bool = True,
                       rtol: float = 1e-12) -> complex:
    """Model integral I'_n(tau) = d/dtau (tau I_n(tau)) with the same weighting."""
    return _osc(n, tau, params, True, weighted, rtol)


def _osc(n, tau, p, prime, weighted, rtol):
    if not tau > 0:
        raise ValueError("tau must be positive")
    if n < 1:
        raise ValueError("mode index n must be >= 1")
    res = integrate(_kernel(n, tau, p, prime), _t_edges(tau, p), rtol=rtol)
    val = complex(res.value)
    if not weighted:
        val *= math.exp(tau / (2 * p.s0))
    return val


def lemma51_limit(n: int, params: AlphaKernelParams) -> complex:
    """Closed-form limit of tau^{(2n+1)/2} e^{-tau/(2 s0)} e^{-i theta tau} I_n(tau)."""
    p = params
    m = (2 * n - 1) / 2
    return (p.sign * 1j * p.s0 ** (2 * n - 1) * 2 ** m * (1 + math.sin(p.alpha)) ** m
            * np.exp(-p.sign * 1j * m * p.alpha) * math.gamma(n + 0.5))


def scaled_oscillatory_I(n: int, tau: float, params: AlphaKernelParams) -> complex:
    """The quantity whose limit is :func:`lemma51_limit`."""
    val = oscillatory_I(n, tau, params)
    return tau ** (n + 0.5) * np.exp(-1j * params.theta * tau) * val


def iprime_asymptote(n: int, tau: float, params: AlphaKernelParams) -> complex:
    """Leading behaviour of e^{-tau/(2 s0)} I'_n(tau)."""
    p = params
    lam = complex(1 / (2 * p.s0), p.theta)
    return (1 + tau * lam) * lemma51_limit(n, p) * np.exp(1j * p.theta * tau) * tau ** (-(n + 0.5))


def prop43_coefficient(k: int, s0: float, alpha: float, j: int, A: float, B: float,
                       mat: Material | float) -> complex:
    """Coefficient of e^{i theta tau} tau^{-(2k-1)/2} in e^{-tau/(2 s0)} I(tau).

    ``A``, ``B`` are A_{2k-1}, B_{2k-1} at tip ``j``; ``mat`` may also be the
    Kolosov constant itself.  The pairing (B, -A).(e1 + i e2) is bilinear.
    The overall sign follows from the representation integral with the
    opening and traction factors as implemented in this package.
    """
    kappa = mat if isinstance(mat, (int, float)) else kolosov_kappa(mat)
    m = (2 * k - 1) / 2
    sgn_j = -1.0 if j % 2 else 1.0
    return (-1j * (kappa + 1) * (-1.0) ** k * s0 ** (2 * k - 1) * 2 ** ((2 * k + 1) / 2)
            * (1 + math.sin(alpha)) ** m * np.exp(-sgn_j * 1j * m * alpha)
            * math.gamma(k + 0.5) * complex(B, -A))
