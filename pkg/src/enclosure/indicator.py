"""Indicator function I(tau; x) and its tau-derivative, computed two ways.

``indicator_boundary`` uses only boundary data (traction g and displacement
u on the plate boundary).  ``indicator_sigma`` integrates a crack opening
against the e2-traction of the probe along the junction line.  For an exact
solution the two agree; comparing them is the main consistency check of the
forward solver.

Values are stored weighted by ``exp(-tau / (2 s))`` for a declared ``s``
because the raw indicator grows like ``exp(tau / (2 s_sigma))``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import Material
from .oracle import JumpPiece, SeriesJump
from .probe import _w, log_f
from .quadrature import integrate

CURVE_COLUMNS = ("tau", "weight_s", "Re_I", "Im_I", "Re_Iprime", "Im_Iprime", "err_estimate")
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BoundaryTrace:
    """Quadrature-ready boundary samples, counterclockwise.

    ``weights`` are arc-length quadrature weights, ``normals`` are outward.
    ``side`` and ``arclen`` locate each sample for file output.
    """

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    u: np.ndarray
    g: np.ndarray
    side: np.ndarray
    arclen: np.ndarray

    def with_displacement(self, u: np.ndarray) -> "BoundaryTrace":
        return replace(self, u=np.asarray(u, dtype=float))

    def with_load(self, g: np.ndarray) -> "BoundaryTrace":
        return replace(self, g=np.asarray(g, dtype=float))


@dataclass(frozen=True)
class JumpSamples:
    """Crack opening at quadrature points y1 on the junction line."""

    y1: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    c: float


@dataclass(frozen=True)
class IndicatorSample:
    tau: float
    I: complex
    Iprime: complex
    weight_s: float
    route: str
    err: float = 0.0

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.I) and np.isfinite(self.Iprime))


@dataclass(frozen=True)
class IndicatorCurve:
    """Samples of one probe point, ordered by tau, all with the same weighting."""

    x: tuple[float, float]
    weight_s: float
    samples: tuple[IndicatorSample, ...]
    route: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        taus = [s.tau for s in self.samples]
        if any(b <= a for a, b in zip(taus[:-1], taus[1:])):
            raise ValueError("tau grid must be strictly increasing")
        if any(s.weight_s != self.weight_s for s in self.samples):
            raise ValueError("inconsistent weighting inside one curve")

    @property
    def tau(self) -> np.ndarray:
        return np.array([s.tau for s in self.samples])

    @property
    def I(self) -> np.ndarray:
        return np.array([s.I for s in self.samples])

    @property
    def Iprime(self) -> np.ndarray:
        return np.array([s.Iprime for s in self.samples])

    @property
    def err(self) -> np.ndarray:
        return np.array([s.err for s in self.samples])

    @property
    def usable(self) -> bool:
        bad = sum(not s.finite or s.I == 0 for s in self.samples)
        return bad <= 0.2 * len(self.samples)

    def log_abs_I(self) -> np.ndarray:
        """log |I(tau)| without weighting."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.I)) + self.tau / (2 * self.weight_s)

    def reweighted(self, s_new: float) -> "IndicatorCurve":
        """Same curve with weight exp(-tau/(2 s_new)) instead of exp(-tau/(2 s))."""
        fac = np.exp(self.tau * (1 / (2 * self.weight_s) - 1 / (2 * s_new)))
        samples = tuple(replace(s, I=s.I * f, Iprime=s.Iprime * f, err=s.err * f, weight_s=s_new)
                        for s, f in zip(self.samples, fac))
        return IndicatorCurve(self.x, s_new, samples, self.route, dict(self.meta))

    def tail(self, n: int) -> "IndicatorCurve":
        return IndicatorCurve(self.x, self.weight_s, self.samples[-n:], self.route, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CURVE_COLUMNS)
        for s in self.samples:
            wr.writerow([_fmt(v) for v in (s.tau, s.weight_s, s.I.real, s.I.imag,
                                           s.Iprime.real, s.Iprime.imag, s.err)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, x: Sequence[float], route: str = "") -> "IndicatorCurve":
        rd = csv.reader(io.StringIO(text))
        header = tuple(next(rd))
        if header != CURVE_COLUMNS:
            raise ValueError(f"unexpected curve columns {header}")
        samples = []
        ws = None
        for row in rd:
            t, w, a, b, c, d, e = (float(v) for v in row)
            ws = w if ws is None else ws
            samples.append(IndicatorSample(t, complex(a, b), complex(c, d), w, route, e))
        if ws is None:
            raise ValueError("empty curve file")
        return cls((float(x[0]), float(x[1])), ws, tuple(samples), route)


def format_number(v: float) -> str:
    """17 significant digits: every double survives a write/read round trip."""
    v = float(v)
    return format(v, ".17g") if math.isfinite(v) else str(v)


_fmt = format_number


# ---------------------------------------------------------------------------
# measurement-side route


def _probe_table(y, x, tau, weight_s):
    """Weighted f, f_w, f_tau and (f_tau)_w at the points y, with a common log shift."""
    w = _w(y, x)
    lf = log_f(y, x, tau, weight_s)
    shift = float(np.max(lf.real)) if lf.size else 0.0
    shift = max(shift, 0.0)
    f = np.exp(lf - shift)
    inv = 1.0 / w
    fw = 1j * tau * inv * inv * f
    ft = -1j * inv * f
    ftw = (1j * inv * inv + tau * inv * inv * inv) * f
    return f, fw, ft, ftw, shift


def indicator_boundary(trace: BoundaryTrace, x, tau: float, mat: Material,
                       weight_s: float) -> IndicatorSample:
    """Boundary integral of g . v - u . sigma(v) nu (and its tau-derivative)."""
    x = np.asarray(x, dtype=float)
    f, fw, ft, ftw, shift = _probe_table(trace.points, x, tau, weight_s)
    gc = trace.g[:, 0] + 1j * trace.g[:, 1]
    uc = trace.u[:, 0] + 1j * trace.u[:, 1]
    nc = trace.normals[:, 0] + 1j * trace.normals[:, 1]
    wt = trace.weights
    dens = gc * f - 2 * mat.mu * fw * nc * uc
    densp = gc * ft - 2 * mat.mu * ftw * nc * uc
    val = np.sum(wt * dens)
    valp = np.sum(wt * densp)
    l1 = np.sum(wt * (np.abs(gc * f) + np.abs(2 * mat.mu * fw * nc * uc)))
    scale = math.exp(shift) if shift < 709 else math.inf
    err = float(l1 * _EPS * math.sqrt(len(wt)) * scale)
    return IndicatorSample(float(tau), complex(val * scale), complex(valp * scale),
                           float(weight_s), "boundary", err)


# ---------------------------------------------------------------------------
# crack-side route


def _sigma_density(y1, c, x, tau, mat, weight_s, jump):
    y = np.stack([y1, np.full_like(y1, c)], axis=-1)
    w = _w(y, x)
    f = np.exp(log_f(y, x, tau, weight_s))
    inv = 1.0 / w
    fw = 1j * tau * inv * inv * f
    ftw = (1j * inv * inv + tau * inv * inv * inv) * f
    jc = jump[..., 0] + 1j * jump[..., 1]
    # -(u+ - u-) . sigma(v) e2 with sigma(v) e2 = 2 mu f_w i (e1 + i e2)
    return np.stack([-2j * mat.mu * fw * jc, -2j * mat.mu * ftw * jc], axis=-1)


def _piece_integral(piece: JumpPiece, c, x, tau, mat, weight_s, rtol):
    y_tip = np.array([piece.tip_x, c])
    d2 = float(np.sum((y_tip - x) ** 2))
    T = math.sqrt(piece.r_max)
    ts = math.sqrt(d2 / max(tau, 1e-300))
    # contact point of the probe circle, if it falls on this piece
    r_contact = (x[0] - piece.tip_x) * piece.direction
    cand = list(ts * np.geomspace(1e-3, 8.0, 20)) + [math.sqrt(b) for b in piece.breaks]
    if 0 < r_contact < piece.r_max:
        width = math.sqrt(d2 * (x[1] - c) / max(tau, 1e-300))
        for k in np.linspace(-6, 6, 13):
            rr = r_contact + k * width
            if 0 < rr < piece.r_max:
                cand.append(math.sqrt(rr))
    edges = np.unique(np.clip(np.array([0.0, T] + cand), 0.0, T))

    def f(t):
        r = t * t
        dens = _sigma_density(piece.tip_x + piece.direction * r, c, x, tau, mat, weight_s, piece.func(r))
        return dens * (2 * t)[:, None]
    # pieces far from the contact point are negligible; their achieved error is reported instead
    res = integrate(f, edges, rtol=rtol, raise_on_fail=False)
    # cancellation floor: the integrand is far larger than the integral near the contact point
    return res.value, res.error + 4 * _EPS * res.abs_integral


def indicator_sigma(jump, x, tau: float, mat: Material, weight_s: float,
                    c: float | None = None, rtol: float = 1e-12) -> IndicatorSample:
    """Representation integral -int_Sigma (u+ - u-) . sigma(v) e2 ds.

    ``jump`` is a :class:`~enclosure.oracle.SeriesJump` (adaptive quadrature
    with r = t^2 near each tip) or :class:`JumpSamples` (fixed quadrature, as
    produced by the finite element solver).
    """
    x = np.asarray(x, dtype=float)
    if isinstance(jump, JumpSamples):
        dens = _sigma_density(jump.y1, jump.c, x, tau, mat, weight_s, jump.values)
        val = (jump.weights[:, None] * dens).sum(axis=0)
        l1 = float((jump.weights * np.abs(dens[:, 0])).sum())
        return IndicatorSample(float(tau), complex(val[0]), complex(val[1]), float(weight_s), "sigma",
                               l1 * _EPS * math.sqrt(max(len(jump.weights), 1)))
    if isinstance(jump, SeriesJump):
        if c is None:
            raise ValueError("junction ordinate c required for analytic jumps")
        pieces = jump.pieces
    else:
        pieces = list(jump)
    total = np.zeros(2, dtype=complex)
    err = 0.0
    for p in pieces:
        v, e = _piece_integral(p, c, x, tau, mat, weight_s, rtol)
        total += v
        err += e
    return IndicatorSample(float(tau), complex(total[0]), complex(total[1]), float(weight_s), "sigma", err)


def sweep_tau(source, x, taus: Sequence[float], mat: Material, weight_s: float,
              c: float | None = None, threads: int = 1, min_points: int = 8) -> IndicatorCurve:
    """Evaluate the indicator on a tau grid; route picked from the source type."""
    taus = [float(t) for t in taus]
    if len(taus) < min_points:
        raise ValueError(f"tau grid needs at least {min_points} points, got {len(taus)}")
    if any(b <= a for a, b in zip(taus[:-1], taus[1:])):
        raise ValueError("tau grid must be strictly increasing")
    if isinstance(source, BoundaryTrace):
        fn = lambda t: indicator_boundary(source, x, t, mat, weight_s)
        route = "boundary"
    else:
        fn = lambda t: indicator_sigma(source, x, t, mat, weight_s, c=c)
        route = "sigma"
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            samples = list(ex.map(fn, taus))
    else:
        samples = [fn(t) for t in taus]
    xx = (float(x[0]), float(x[1]))
    return IndicatorCurve(xx, float(weight_s), tuple(samples), route)


def geometric_tau_grid(tau0: float = 10.0, ratio: float = 1.2, n: int = 15) -> np.ndarray:
    return tau0 * ratio ** np.arange(n)
