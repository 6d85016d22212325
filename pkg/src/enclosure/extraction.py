"""From indicator curves to crack information.

* :func:`fit_decay_rate` reads s_Sigma(x) off the exponential growth of |I|.
* :func:`log_derivative_limit` estimates lim I'/I, whose imaginary part
  carries the contact angle and the parity of the touched tip.
* :func:`recover_tip` turns (s, L) into a tip abscissa.
* :func:`scan_theorem31` classifies probe points by whether the disc of the
  fixed radius s~ = (b + eps - c)/2 produces algebraic or exponential decay.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import PlateGeometry
from .indicator import IndicatorCurve, format_number

EXTRACTION_COLUMNS = ("x1", "s_hat", "parity", "alpha_hat", "c_hat", "confidence",
                      "window_lo", "window_hi", "r2")
SCAN_COLUMNS = ("x1", "verdict", "p_hat", "q_hat", "score")

R2_THRESHOLD = 0.999
MIN_WINDOW = 6
TIE_TOL = 0.02
TAIL_SPAN = 8.0
RESOLVE_FACTOR = 10.0
# weighted values this small lose digits (subnormals) and I'/I overflows
UNDERFLOW_GUARD = 1e-200


class ExtractionError(ValueError):
    """Raised for unusable input curves when soft failure is not requested."""


@dataclass(frozen=True)
class DecayFit:
    s_hat: float | None
    slope: float
    intercept: float
    window: tuple[int, int]
    tau_window: tuple[float, float]
    r2: float
    ok: bool
    message: str = ""


@dataclass(frozen=True)
class LogDerivative:
    L: complex
    c: complex
    last_ratio: complex
    window: tuple[int, int]
    residual: float


@dataclass(frozen=True)
class ExtractionResult:
    x1: float
    s_hat: float
    parity_hat: str
    alpha_hat: float
    c_hat: float
    confidence: str
    window: tuple[float, float] = (math.nan, math.nan)
    r2: float = math.nan
    L: complex = complex("nan")
    tip_index: int | None = None
    messages: tuple[str, ...] = field(default=())

    def row(self) -> list[str]:
        return [_fmt(self.x1), _fmt(self.s_hat), self.parity_hat, _fmt(self.alpha_hat), _fmt(self.c_hat),
                self.confidence, _fmt(self.window[0]), _fmt(self.window[1]), _fmt(self.r2)]


@dataclass(frozen=True)
class ScanClassification:
    x1: float
    verdict: str
    p_hat: float
    q_hat: float
    score: float
    confident: bool
    rms_algebraic: float
    rms_exponential: float

    def row(self) -> list[str]:
        return [_fmt(self.x1), self.verdict, _fmt(self.p_hat), _fmt(self.q_hat), _fmt(self.score)]


_fmt = format_number


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    rms = math.sqrt(ss_res / len(x))
    return coef[0], coef[1], r2, rms


def _usable(curve: IndicatorCurve) -> np.ndarray:
    I = curve.I
    with np.errstate(invalid="ignore"):
        return (np.isfinite(I) & (np.abs(I) > UNDERFLOW_GUARD) & np.isfinite(curve.Iprime)
                & (np.abs(I) > RESOLVE_FACTOR * curve.err))


def _tail_start_end(ok: np.ndarray) -> tuple[int, int]:
    """Last contiguous run of usable samples, ignoring unresolved samples at the end.

    Weighted curves with s_w below s_sigma decay and may underflow or sink
    into the quadrature noise at the largest tau; those samples carry no
    information and are dropped rather than voiding the tail.
    """
    idx = np.flatnonzero(ok)
    if not len(idx):
        return len(ok), len(ok)
    end = int(idx[-1]) + 1
    bad = np.flatnonzero(~ok[:end])
    return (int(bad[-1]) + 1 if len(bad) else 0), end


def fit_decay_rate(curve: IndicatorCurve, min_points: int = MIN_WINDOW,
                   r2_threshold: float = R2_THRESHOLD) -> DecayFit:
    """Slope of log|I| against tau on the longest tail window with R^2 >= threshold.

    The fit runs on the weighted values; the weight's known slope 1/(2 s_w)
    is added back, and R^2 is taken on the unweighted log|I|.
    """
    tau = curve.tau
    start, n = _tail_start_end(_usable(curve))
    if n - start < min_points:
        return DecayFit(None, math.nan, math.nan, (start, n), (math.nan, math.nan), math.nan, False,
                        "no usable tail")
    yw = np.log(np.abs(curve.I[start:n]))
    t = tau[start:n]
    shift = 1.0 / (2.0 * curve.weight_s)
    best = None
    for lo in range(0, len(t) - min_points + 1):
        sw, icpt, _, _ = _linfit(t[lo:], yw[lo:])
        _, _, r2, _ = _linfit(t[lo:], yw[lo:] + shift * t[lo:])
        if r2 >= r2_threshold:
            best = (lo, sw, icpt, r2)
            break
    if best is None:
        lo = len(t) - min_points
        sw, icpt, _, _ = _linfit(t[lo:], yw[lo:])
        _, _, r2, _ = _linfit(t[lo:], yw[lo:] + shift * t[lo:])
        best = (lo, sw, icpt, r2)
        msg = f"R^2 {r2:.5f} below {r2_threshold} on the shortest tail"
    else:
        msg = ""
    lo, sw, icpt, r2 = best
    slope = sw + shift
    win = (start + lo, n)
    twin = (float(tau[start + lo]), float(tau[n - 1]))
    if not slope > 0:
        return DecayFit(None, slope, icpt, win, twin, r2, False, "non-positive growth rate")
    return DecayFit(1.0 / (2.0 * slope), slope, icpt, win, twin, r2, not msg, msg)


def log_derivative_limit(curve: IndicatorCurve, window: tuple[int, int] | None = None,
                         min_points: int = MIN_WINDOW) -> LogDerivative:
    """Fit I'/I = L + c/tau on the tail window and return L with the raw last ratio.

    Inside ``window`` only samples with tau >= tau_max / 8 are used (at least
    ``min_points`` of them).
    """
    if window is None:
        window = _tail_start_end(_usable(curve))
    lo, hi = window
    # the 1/tau model leaves O(tau^-2) terms, so only the upper part of the window is used
    tau_all = curve.tau
    while hi - lo > min_points and tau_all[lo] < tau_all[hi - 1] / TAIL_SPAN:
        lo += 1
    if hi - lo < min(min_points, 2):
        raise ExtractionError("tail window too short for the log-derivative fit")
    tau = curve.tau[lo:hi]
    R = curve.Iprime[lo:hi] / curve.I[lo:hi]
    A = np.vstack([np.ones_like(tau), 1.0 / tau]).T.astype(complex)
    coef, *_ = np.linalg.lstsq(A, R, rcond=None)
    res = float(np.sqrt(np.mean(np.abs(A @ coef - R) ** 2)))
    return LogDerivative(complex(coef[0]), complex(coef[1]), complex(R[-1]), (lo, hi), res)


def recover_tip(x: Sequence[float], s_hat: float, L: complex, geom: PlateGeometry,
                tie_tol: float = TIE_TOL, consistency_tol: float = 0.10) -> ExtractionResult:
    """Parity, contact angle and tip abscissa from s_Sigma and the log-derivative limit."""
    if not s_hat > 0:
        raise ExtractionError("s_hat must be positive")
    x1, x2 = float(x[0]), float(x[1])
    t = 2.0 * s_hat * L.imag
    msgs = []
    if abs(t) < tie_tol:
        parity = "indeterminate"
        alpha = 0.5 * math.pi
        c_hat = x1
    else:
        parity = "odd" if t > 0 else "even"
        alpha = 0.5 * math.pi - 2.0 * math.atan(abs(t))
        sgn = -1.0 if parity == "odd" else 1.0
        c_hat = x1 + sgn * s_hat * math.cos(alpha)
    height = x2 - geom.c
    dev = abs(s_hat * (1.0 + math.sin(alpha)) - height) / height
    confidence = "high"
    if dev > consistency_tol:
        confidence = "low"
        msgs.append(f"s_hat (1 + sin alpha) misses x2 - c by {100 * dev:.1f}%")
    return ExtractionResult(x1, float(s_hat), parity, float(alpha), float(c_hat), confidence,
                            L=complex(L), messages=tuple(msgs))


def extract(curve: IndicatorCurve, geom: PlateGeometry, tau_cap: float | None = None) -> ExtractionResult:
    """Full chain on one curve: decay rate, log-derivative limit, tip recovery."""
    if tau_cap is not None:
        keep = sum(s.tau <= tau_cap for s in curve.samples)
        curve = IndicatorCurve(curve.x, curve.weight_s, curve.samples[:keep], curve.route, dict(curve.meta))
    fit = fit_decay_rate(curve)
    if fit.s_hat is None:
        return ExtractionResult(curve.x[0], math.nan, "indeterminate", 0.5 * math.pi, curve.x[0],
                                "failed", fit.tau_window, fit.r2, messages=(fit.message,))
    ld = log_derivative_limit(curve, fit.window)
    res = recover_tip(curve.x, fit.s_hat, ld.L, geom)
    msgs = list(res.messages)
    if fit.message:
        msgs.append(fit.message)
    conf = res.confidence
    # the real part of L estimates the same growth rate
    if abs(ld.L.real - fit.slope) > 0.02 * fit.slope:
        msgs.append(f"Re L = {ld.L.real:.4g} disagrees with the decay slope {fit.slope:.4g}")
        conf = "low"
    if not fit.ok:
        conf = "low"
    return ExtractionResult(res.x1, res.s_hat, res.parity_hat, res.alpha_hat, res.c_hat, conf,
                            fit.tau_window, fit.r2, res.L, None, tuple(msgs))


def discrepancy_cap(boundary: IndicatorCurve, sigma: IndicatorCurve, threshold: float = 0.10) -> float | None:
    """Largest tau of the leading run where the two indicator routes agree within ``threshold``."""
    if boundary.weight_s != sigma.weight_s or not np.array_equal(boundary.tau, sigma.tau):
        raise ExtractionError("curves must share the tau grid and the weighting")
    rel = np.abs(boundary.I - sigma.I) / np.abs(sigma.I)
    cap = None
    for t, r in zip(boundary.tau, rel):
        if not (np.isfinite(r) and r <= threshold):
            break
        cap = float(t)
    return cap


def scan_theorem31(curves: Sequence[IndicatorCurve], geom: PlateGeometry,
                   ratio: float = 2.0, resolve: float = RESOLVE_FACTOR) -> list[ScanClassification]:
    """Algebraic-versus-exponential model selection for discs of radius s~.

    A sample whose modulus is below ``resolve`` times its error estimate has
    decayed into the numerical noise floor.  An algebraically decaying tip
    curve never gets there, so such curves are classified "non-tip" and q is
    fitted on the resolved samples only.
    """
    st = geom.s_tilde
    for cv in curves:
        if not math.isclose(cv.weight_s, st, rel_tol=1e-12):
            raise ExtractionError(f"scan curves must be weighted at s~ = {st}, got {cv.weight_s}")
    return [_classify(cv, ratio, resolve) for cv in curves]


def _classify(cv: IndicatorCurve, ratio: float, resolve: float) -> ScanClassification:
    tau = cv.tau
    d = np.abs(cv.I)
    x1 = cv.x[0]
    ok = np.isfinite(d) & (d > resolve * cv.err)
    if not ok.all():
        first = int(np.argmin(ok))
        t, y = tau[:first], np.log(d[:first])
        q_hat = -_linfit(t, y)[0] if first >= 3 else math.inf
        return ScanClassification(x1, "non-tip", math.nan, float(q_hat), -math.inf, True, math.nan, math.nan)
    t, y = tau, np.log(d)
    pa, _, _, ra = _linfit(np.log(t), y)
    qb, _, _, rb = _linfit(t, y)
    p_hat, q_hat = -pa, -qb
    ra = max(ra, 1e-300)
    rb = max(rb, 1e-300)
    score = math.log(rb / ra)
    if ra * ratio <= rb:
        verdict, confident = "tip", True
    elif rb * ratio <= ra:
        verdict, confident = "non-tip", True
    else:
        verdict, confident = ("tip" if ra < rb else "non-tip"), False
    if verdict == "non-tip" and not q_hat > 0:
        confident = False
    return ScanClassification(x1, verdict, float(p_hat), float(q_hat), score, confident, ra, rb)


def extraction_csv(results: Sequence[ExtractionResult]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(EXTRACTION_COLUMNS)
    for r in results:
        wr.writerow(r.row())
    return buf.getvalue()


def scan_csv(results: Sequence[ScanClassification]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SCAN_COLUMNS)
    for r in results:
        wr.writerow(r.row())
    return buf.getvalue()
