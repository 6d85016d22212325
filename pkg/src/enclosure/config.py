"""Run configuration: a TOML file with a strict schema."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .geometry import (BoundaryLoad, CrackConfig, LoadSegment, Material, PlateGeometry, make_load_g1,
                       make_load_g2)
from .oracle import SeriesCoefficients, SmoothWindow, windowed_jump


class ConfigError(ValueError):
    pass


_SCHEMA: dict[str, set[str]] = {
    "geometry": {"a", "b", "c", "eps"},
    "cracks": {"tips"},
    "material": {"lambda", "mu"},
    "load": {"preset", "beta", "gamma", "segments"},
    "solver": {"h", "grading"},
    "indicator": {"tau0", "ratio", "n", "taus", "weighting"},
    "probes": {"x1", "scan"},
    "oracle": {"tips"},
    "output": {"directory", "formats", "dump"},
}
_REQUIRED = ("geometry", "cracks", "material")


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    geom: PlateGeometry
    cracks: CrackConfig
    mat: Material
    load: BoundaryLoad | None
    h: float
    grading: int
    taus: np.ndarray
    weighting: str | float
    probes: tuple[float, ...]
    scan: tuple[float, ...]
    oracle: tuple[dict, ...]
    out_dir: str
    formats: tuple[str, ...]
    dump: bool
    source: str = field(default="", compare=False)

    def section_hash(self, *names: str) -> str:
        """Hash of the named sections (canonical JSON), used as a cache key."""
        sub = {n: self.raw.get(n) for n in names}
        return hashlib.sha256(json.dumps(sub, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def full_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def weight_for(self, x) -> float:
        if self.weighting == "s_tilde":
            return self.geom.s_tilde
        return float(self.weighting)

    def oracle_jump(self):
        if not self.oracle:
            raise ConfigError("no [oracle] tips configured")
        coeffs, wins = [], []
        for t in self.oracle:
            coeffs.append(SeriesCoefficients(t["tip"], t["A"], t["B"], t["eta"]))
            wins.append(SmoothWindow(t.get("r_flat", 0.5 * t["eta"]), t["eta"]))
        for c in coeffs:
            c.check_radius(self.cracks, self.geom)
        return windowed_jump(coeffs, self.cracks, self.mat, wins)


def _need(sec: dict, key: str, name: str):
    if key not in sec:
        raise ConfigError(f"[{name}] missing required key {key!r}")
    return sec[key]


def _check_keys(raw: dict) -> None:
    for name, sec in raw.items():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(sec) - _SCHEMA[name]
        if extra:
            raise ConfigError(f"[{name}] unknown keys {sorted(extra)}")
    for name in _REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing required section [{name}]")


def _tau_grid(sec: dict) -> np.ndarray:
    if "taus" in sec:
        taus = np.array([float(t) for t in sec["taus"]])
    else:
        taus = float(sec.get("tau0", 10.0)) * float(sec.get("ratio", 1.2)) ** np.arange(int(sec.get("n", 25)))
    if len(taus) < 8:
        raise ConfigError(f"tau grid has {len(taus)} points; extraction needs at least 8")
    if np.any(np.diff(taus) <= 0) or taus[0] <= 0:
        raise ConfigError("tau grid must be positive and strictly increasing")
    return taus


def _load(sec: dict, geom: PlateGeometry) -> BoundaryLoad:
    preset = sec.get("preset", "g1")
    if preset == "g1":
        return make_load_g1(geom, float(sec.get("beta", 1.0)), float(_need(sec, "gamma", "load")))
    if preset == "g2":
        return make_load_g2(geom, float(sec.get("beta", 1.0)), float(_need(sec, "gamma", "load")))
    if preset == "custom":
        segs = []
        for s in _need(sec, "segments", "load"):
            extra = set(s) - {"side", "t0", "t1", "traction"}
            if extra:
                raise ConfigError(f"load segment has unknown keys {sorted(extra)}")
            segs.append(LoadSegment(s["side"], float(s["t0"]), float(s["t1"]),
                                    (float(s["traction"][0]), float(s["traction"][1]))))
        params = {"gamma": float(sec["gamma"])} if "gamma" in sec else {}
        return BoundaryLoad(geom, tuple(segs), "custom", params)
    raise ConfigError(f"unknown load preset {preset!r}")


def parse_config(raw: dict, source: str = "") -> RunConfig:
    _check_keys(raw)
    g = raw["geometry"]
    try:
        geom = PlateGeometry(*(float(_need(g, k, "geometry")) for k in ("a", "b", "c", "eps")))
        cracks = CrackConfig(_need(raw["cracks"], "tips", "cracks"))
        cracks.validate(geom)
        m = raw["material"]
        mat = Material(float(_need(m, "lambda", "material")), float(_need(m, "mu", "material")))
        load = _load(raw["load"], geom) if "load" in raw else None
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    solver = raw.get("solver", {})
    ind = raw.get("indicator", {})
    weighting: Any = ind.get("weighting", "s_tilde")
    if weighting != "s_tilde":
        try:
            weighting = float(weighting)
        except (TypeError, ValueError) as exc:
            raise ConfigError("indicator.weighting must be 's_tilde' or a positive number") from exc
        if not weighting > 0:
            raise ConfigError("indicator.weighting must be positive")
    pr = raw.get("probes", {})
    probes = tuple(float(v) for v in pr.get("x1", ()))
    scan: tuple[float, ...] = ()
    if "scan" in pr:
        sc = pr["scan"]
        extra = set(sc) - {"start", "stop", "n"}
        if extra:
            raise ConfigError(f"probes.scan unknown keys {sorted(extra)}")
        scan = tuple(np.round(np.linspace(float(sc["start"]), float(sc["stop"]), int(sc["n"])), 12).tolist())
    for x1 in probes + scan:
        if not 0 <= x1 <= geom.a:
            raise ConfigError(f"probe abscissa {x1} outside [0, {geom.a}]")
    oracle = tuple(dict(t) for t in raw.get("oracle", {}).get("tips", ()))
    for t in oracle:
        extra = set(t) - {"tip", "A", "B", "eta", "r_flat"}
        if extra:
            raise ConfigError(f"oracle tip has unknown keys {sorted(extra)}")
        for k in ("tip", "A", "B", "eta"):
            _need(t, k, "oracle.tips")
    out = raw.get("output", {})
    h = float(solver.get("h", geom.a / 80))
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError("solver.h must be positive")
    return RunConfig(raw, geom, cracks, mat, load, h, int(solver.get("grading", 4)), _tau_grid(ind),
                     weighting, probes, scan, oracle, str(out.get("directory", "out")),
                     tuple(out.get("formats", ("csv", "svg"))), bool(out.get("dump", False)), source)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        raw = tomli.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return parse_config(raw, str(p))
