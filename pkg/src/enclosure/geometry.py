"""Plate geometry, crack configuration, material law and boundary loads.

Everything here is an immutable value type or a pure function.  The
tangency geometry (:func:`s_sigma`, :func:`alpha_from_tangency`) is the
ground truth against which the reconstruction is checked, and also the
forward map inverted by :func:`enclosure.extraction.recover_tip`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class PlateGeometry:
    """Rectangle ]0,a[ x ]0,b[ with junction line x2 = c.

    Probe points live on the line x2 = b + eps above the plate.
    """

    a: float
    b: float
    c: float
    eps: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("plate extents a, b must be positive")
        if not (0 < self.c < self.b):
            raise ValueError("junction ordinate must satisfy 0 < c < b")
        if not self.eps > 0:
            raise ValueError("probe offset eps must be positive")

    @property
    def probe_height(self) -> float:
        return self.b + self.eps

    @property
    def s_tilde(self) -> float:
        """Radius of the disc through x that touches the junction line from above."""
        return 0.5 * (self.b + self.eps - self.c)

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.a + self.b)

    def probe(self, x1: float) -> np.ndarray:
        if not (-1e-12 <= x1 <= self.a + 1e-12):
            raise ValueError(f"probe abscissa {x1} outside [0, {self.a}]")
        return np.array([float(x1), self.probe_height])


@dataclass(frozen=True)
class CrackConfig:
    """Tip abscissae c_0 < c_1 < ... < c_{2m+1} on the junction line.

    Cracks are the closed segments [c_{2j}, c_{2j+1}] x {c}; the welded gaps
    are the open intervals between them.  Tip indices are 0-based and match
    the usual numbering, so parity tests use ``j`` directly.
    """

    tips: tuple[float, ...]

    def __init__(self, tips: Sequence[float]):
        t = tuple(float(v) for v in tips)
        object.__setattr__(self, "tips", t)
        if len(t) < 4 or len(t) % 2:
            raise ValueError("need an even number (>= 4) of tip abscissae")
        if any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise ValueError("tip abscissae must be strictly increasing")
        if t[0] != 0.0:
            raise ValueError("the leftmost crack must start at x1 = 0")

    @property
    def m(self) -> int:
        return len(self.tips) // 2 - 1

    @property
    def interior_tips(self) -> tuple[int, ...]:
        """Indices 1..2m of the tips that lie inside the plate."""
        return tuple(range(1, len(self.tips) - 1))

    def segments(self) -> list[tuple[float, float]]:
        return [(self.tips[2 * j], self.tips[2 * j + 1]) for j in range(self.m + 1)]

    def gaps(self) -> list[tuple[float, float]]:
        return [(self.tips[2 * j - 1], self.tips[2 * j]) for j in range(1, self.m + 1)]

    def validate(self, geom: PlateGeometry) -> None:
        if abs(self.tips[-1] - geom.a) > 1e-12 * max(1.0, geom.a):
            raise ValueError("the rightmost crack must end at x1 = a")

    def on_crack(self, x1, tol: float = 0.0):
        """Boolean mask: abscissa lies on a closed crack segment."""
        x1 = np.asarray(x1, dtype=float)
        out = np.zeros(x1.shape, dtype=bool)
        for lo, hi in self.segments():
            out |= (x1 >= lo - tol) & (x1 <= hi + tol)
        return out


@dataclass(frozen=True)
class Material:
    """Isotropic Lame constants for plane strain."""

    lam: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("shear modulus mu must be positive")
        if not self.lam + self.mu > 0:
            raise ValueError("need lambda + mu > 0")

    @property
    def kappa(self) -> float:
        return kolosov_kappa(self)

    def stress(self, strain: np.ndarray) -> np.ndarray:
        """Hooke's law on (..., 2, 2) strain arrays."""
        tr = strain[..., 0, 0] + strain[..., 1, 1]
        eye = np.eye(2)
        return self.lam * tr[..., None, None] * eye + 2.0 * self.mu * strain


def kolosov_kappa(mat: Material) -> float:
    """Plane-strain Kolosov constant (lambda + 3 mu) / (lambda + mu)."""
    if mat.lam + mat.mu <= 0:
        raise ValueError("need lambda + mu > 0")
    return (mat.lam + 3.0 * mat.mu) / (mat.lam + mat.mu)


# ---------------------------------------------------------------------------
# tangency geometry


@dataclass(frozen=True)
class TangencyResult:
    s_sigma: float
    touching_tips: tuple[int, ...]
    alpha: float
    unique: bool


def s_sigma(x: Sequence[float], cracks: CrackConfig, geom: PlateGeometry,
            tol: float | None = None) -> TangencyResult:
    """Largest s such that the open disc B_s(x - s e2) misses the crack set.

    For x over a crack the disc is tangent to the junction line and
    ``s = (x2 - c) / 2``.  Over a welded gap the disc grows until its chord on
    the junction line reaches the nearer tip.  At the gap midpoint both tips
    are touched and ``unique`` is False.
    """
    x1, x2 = float(x[0]), float(x[1])
    if tol is None:
        tol = 1e-9 * geom.a
    if not (-tol <= x1 <= geom.a + tol):
        raise ValueError(f"probe abscissa {x1} outside [0, {geom.a}]")
    if x2 <= geom.b:
        raise ValueError("probe point must lie above the plate")
    h = x2 - geom.c
    tips = cracks.tips
    for j in cracks.interior_tips:
        if abs(x1 - tips[j]) <= tol:
            return TangencyResult(0.5 * h, (j,), 0.5 * math.pi, True)
    if cracks.on_crack(x1, tol):
        return TangencyResult(0.5 * h, (), 0.5 * math.pi, False)
    for jp in range(1, cracks.m + 1):
        lo, hi = tips[2 * jp - 1], tips[2 * jp]
        if lo < x1 < hi:
            dl, dr = x1 - lo, hi - x1
            if abs(dl - dr) <= tol:
                d = 0.5 * (dl + dr)
                s = (d * d + h * h) / (2.0 * h)
                return TangencyResult(s, (2 * jp - 1, 2 * jp), float("nan"), False)
            j = 2 * jp - 1 if dl < dr else 2 * jp
            d = min(dl, dr)
            s = (d * d + h * h) / (2.0 * h)
            alpha, _ = alpha_from_tangency((x1, x2), j, s, cracks, geom)
            return TangencyResult(s, (j,), alpha, True)
    raise AssertionError("abscissa classified neither as crack nor gap")


def alpha_from_tangency(x: Sequence[float], j: int, s: float, cracks: CrackConfig,
                        geom: PlateGeometry) -> tuple[float, complex]:
    """Contact angle alpha in ]-pi/2, pi/2] and the unit number e^{i alpha}."""
    x1, x2 = float(x[0]), float(x[1])
    cj = cracks.tips[j]
    sign = -1.0 if j % 2 else 1.0
    e = complex(sign * (cj - x1) / s, (x2 - s - geom.c) / s)
    if abs(abs(e) - 1.0) > 1e-9:
        raise ValueError(f"inconsistent tangency data: |e^(i alpha)| = {abs(e):.12g}")
    if e.real < -1e-12:
        raise ValueError("tangency data give cos(alpha) < 0; tip index does not match probe")
    e /= abs(e)
    alpha = math.atan2(e.imag, max(e.real, 0.0))
    if alpha <= -0.5 * math.pi:
        alpha = 0.5 * math.pi
    return alpha, e


# ---------------------------------------------------------------------------
# boundary loads


@dataclass(frozen=True)
class LoadSegment:
    """Constant traction on ``side`` for side coordinate t in [t0, t1].

    The side coordinate is x1 on top/bottom and x2 on left/right.
    """

    side: str
    t0: float
    t1: float
    traction: tuple[float, float]

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")
        if not self.t1 > self.t0:
            raise ValueError("load segment must have positive length")

    def endpoints(self, geom: PlateGeometry) -> tuple[np.ndarray, np.ndarray]:
        return _side_point(self.side, self.t0, geom), _side_point(self.side, self.t1, geom)


def _side_point(side: str, t: float, geom: PlateGeometry) -> np.ndarray:
    if side == "bottom":
        return np.array([t, 0.0])
    if side == "top":
        return np.array([t, geom.b])
    if side == "left":
        return np.array([0.0, t])
    return np.array([geom.a, t])


@dataclass(frozen=True)
class BoundaryLoad:
    """Piecewise-constant traction density on the plate boundary."""

    geom: PlateGeometry
    segments: tuple[LoadSegment, ...]
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def evaluate(self, side: str, t) -> np.ndarray:
        """Traction at side coordinates ``t``; shape (..., 2).

        Points exactly on a support endpoint get the average of both sides.
        """
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2,))
        for seg in self.segments:
            if seg.side != side:
                continue
            inside = (t > seg.t0) & (t < seg.t1)
            edge = np.isclose(t, seg.t0, rtol=0, atol=1e-14) | np.isclose(t, seg.t1, rtol=0, atol=1e-14)
            wgt = inside + 0.5 * edge
            out += wgt[..., None] * np.asarray(seg.traction)
        return out

    def breakpoints(self) -> dict[str, list[float]]:
        out: dict[str, list[float]] = {s: [] for s in SIDES}
        for seg in self.segments:
            out[seg.side] += [seg.t0, seg.t1]
        return out

    def scale(self) -> float:
        if not self.segments:
            return 0.0
        return max(math.hypot(*seg.traction) for seg in self.segments) * self.geom.perimeter

    def scaled(self, factor: float) -> "BoundaryLoad":
        segs = tuple(LoadSegment(s.side, s.t0, s.t1, (factor * s.traction[0], factor * s.traction[1]))
                     for s in self.segments)
        return BoundaryLoad(self.geom, segs, self.name, dict(self.params, factor=factor))


def make_load_g1(geom: PlateGeometry, beta1: float, gamma: float) -> BoundaryLoad:
    """Opposite uniform normal tractions on the top and bottom faces."""
    if beta1 == 0:
        raise ValueError("beta1 must be nonzero")
    _check_gamma(geom, gamma)
    if not 2 * gamma < geom.a:
        raise ValueError("gamma too large for the top/bottom supports")
    segs = (
        LoadSegment("top", gamma, geom.a - gamma, (0.0, beta1)),
        LoadSegment("bottom", gamma, geom.a - gamma, (0.0, -beta1)),
    )
    return BoundaryLoad(geom, segs, "g1", {"beta1": beta1, "gamma": gamma})


def make_load_g2(geom: PlateGeometry, beta2: float, gamma: float) -> BoundaryLoad:
    """Opposing oblique tractions on the two vertical sides, balanced in moment."""
    if beta2 == 0:
        raise ValueError("beta2 must be nonzero")
    _check_gamma(geom, gamma)
    gp = min(geom.c - 2 * gamma, geom.b - geom.c - 2 * gamma)
    if not gp > 0:
        raise ValueError("gamma' = min(c - 2 gamma, b - c - 2 gamma) must be positive")
    trac = (beta2 * geom.a, -beta2 * (2 * gamma + gp))
    segs = (
        LoadSegment("right", geom.c - gamma - gp, geom.c - gamma, trac),
        LoadSegment("left", geom.c + gamma, geom.c + gamma + gp, (-trac[0], -trac[1])),
    )
    return BoundaryLoad(geom, segs, "g2", {"beta2": beta2, "gamma": gamma, "gamma_prime": gp})


def _check_gamma(geom: PlateGeometry, gamma: float) -> None:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not (gamma < geom.c and gamma < geom.b - geom.c):
        raise ValueError("gamma band around the junction line leaves no room for supports")


@dataclass(frozen=True)
class CompatibilityReport:
    residuals: tuple[float, float, float]
    load_scale: float
    compatible: bool
    support_ok: bool
    nondegenerate: bool
    messages: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.compatible and self.support_ok


def _segment_moments(seg: LoadSegment, geom: PlateGeometry, half: str | None = None):
    """Exact integrals of g against e1, e2 and (x2, -x1) over one segment.

    ``half`` restricts to the part above ('upper') or below ('lower') x2 = c.
    """
    t0, t1 = seg.t0, seg.t1
    if half is not None and seg.side in ("left", "right"):
        if half == "upper":
            t0 = max(t0, geom.c)
        else:
            t1 = min(t1, geom.c)
        if t1 <= t0:
            return np.zeros(3)
    elif half is not None:
        on_top = seg.side == "top"
        if (half == "upper") != on_top:
            return np.zeros(3)
    p0, p1 = _side_point(seg.side, t0, geom), _side_point(seg.side, t1, geom)
    length = t1 - t0
    mid = 0.5 * (p0 + p1)
    g1, g2 = seg.traction
    return np.array([g1 * length, g2 * length, (g1 * mid[1] - g2 * mid[0]) * length])


def check_compatibility(load: BoundaryLoad, gamma: float | None = None,
                        rtol: float = 1e-10) -> CompatibilityReport:
    """Rigid-motion residuals of the load and the support condition verdict."""
    geom = load.geom
    res = np.zeros(3)
    upper = np.zeros(3)
    lower = np.zeros(3)
    for seg in load.segments:
        res += _segment_moments(seg, geom)
        upper += _segment_moments(seg, geom, "upper")
        lower += _segment_moments(seg, geom, "lower")
    scale = load.scale()
    thr = rtol * max(scale, 1e-300) * max(1.0, geom.a, geom.b)
    compatible = bool(np.all(np.abs(res) <= thr))
    msgs = []
    if not compatible:
        msgs.append("load violates the rigid-motion compatibility condition "
                    "(net force and moment must vanish): "
                    f"residuals {res.tolist()}")
    if gamma is None:
        gamma = float(load.params.get("gamma", 0.0))
    support_ok = True
    if gamma > 0:
        ttol = 1e-12 * max(geom.a, geom.b)
        for seg in load.segments:
            if seg.side in ("top", "bottom"):
                hi = geom.a
                if abs((geom.b if seg.side == "top" else 0.0) - geom.c) <= gamma:
                    support_ok = False
            else:
                hi = geom.b
                if not (seg.t0 >= geom.c + gamma - ttol or seg.t1 <= geom.c - gamma + ttol):
                    support_ok = False
            if seg.t0 < gamma - ttol or seg.t1 > hi - gamma + ttol:
                support_ok = False
        if not support_ok:
            msgs.append(f"load support enters a corner ball or the junction band (gamma={gamma})")
    nondeg = bool(np.any(np.abs(upper) > thr) or np.any(np.abs(lower) > thr))
    if not nondeg:
        msgs.append("load is self-balanced on each plate separately")
    return CompatibilityReport(tuple(float(r) for r in res), scale, compatible,
                               support_ok, nondeg, tuple(msgs))
