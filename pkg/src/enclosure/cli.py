"""Command-line pipeline: forward -> indicate -> extract / scan.

Output directory layout::

    forward/trace.csv      boundary trace (side, arclen, y1, y2, u1, u2, g1, g2)
    forward/jump.csv       crack opening samples used for the reference route
    forward/solution.txt   optional nodal dump
    curves/index.csv       one row per curve file
    curves/*.csv           indicator curves
    results/extraction.*   per-probe recovery, CSV and SVG
    results/scan.*         tip scan, CSV and SVG
    oracle/*.csv           oracle self-checks
    manifest.json          written last by ``pipeline``
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .extraction import (ExtractionError, ExtractionResult, discrepancy_cap, extract, extraction_csv, scan_csv,
                         scan_theorem31)
from .fem import (SolverError, assemble_and_solve, boundary_trace, build_mesh, jump_csv, read_jump_csv,
                  read_trace_csv, trace_csv)
from .geometry import check_compatibility, s_sigma
from .indicator import IndicatorCurve, format_number, sweep_tau
from .oracle import (AlphaKernelParams, lemma51_limit, prop43_coefficient, scaled_oscillatory_I)
from .plot import extraction_svg, scan_svg
from .probe import verify_navier

INDEX_COLUMNS = ("file", "set", "x1", "x2", "route", "weight_s")
LEMMA51_COLUMNS = ("n", "alpha", "parity", "s0", "tau", "modulus_rel_err", "phase_err")
PROP43_COLUMNS = ("x1", "tip", "s0", "alpha", "tau", "Re_C1", "Im_C1", "Re_measured", "Im_measured", "rel_err")
NAVIER_COLUMNS = ("y1", "y2", "tau", "navier_residual", "divergence", "field_scale", "ok")


class CliError(RuntimeError):
    """A failure reported to the user with a stage prefix and a nonzero exit."""

    def __init__(self, stage: str, message: str, code: int = 2):
        super().__init__(f"{stage}: {message}")
        self.code = code


# ---------------------------------------------------------------------------
# file helpers


def write_atomic(path: Path, text: str) -> Path:
    """Write via a temporary file in the same directory and rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _table(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _read(path: Path, stage: str) -> str:
    try:
        return path.read_text()
    except FileNotFoundError:
        raise CliError(stage, f"missing input file {path}") from None


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# stages


def _solve(cfg: RunConfig):
    if cfg.load is None:
        raise CliError("forward", "config has no [load] section")
    rep = check_compatibility(cfg.load)
    if not rep.compatible:
        raise CliError("forward", "; ".join(rep.messages))
    try:
        mesh = build_mesh(cfg.geom, cfg.cracks, cfg.h, grading=cfg.grading, load=cfg.load)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            return assemble_and_solve(mesh, cfg.mat, cfg.load)
    except (SolverError, ValueError, RuntimeWarning, UserWarning) as exc:
        raise CliError("forward", f"solver failed: {exc}") from exc


def cmd_forward(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    sol = _solve(cfg)
    focus = tuple(cfg.probes) + tuple(cfg.scan)
    files = [write_atomic(out / "forward" / "trace.csv", trace_csv(boundary_trace(sol, focus=focus))),
             write_atomic(out / "forward" / "jump.csv", jump_csv(sol.jump()))]
    if cfg.dump:
        files.append(write_atomic(out / "forward" / "solution.txt", sol.dump()))
    r = sol.report
    files.append(write_atomic(out / "forward" / "report.csv", _table(
        ("residual", "constraint_residual", "energy", "work", "energy_mismatch", "n_nodes", "n_elements"),
        [[format_number(v) for v in (r.residual, r.constraint_residual, r.energy, r.work, r.energy_mismatch)]
         + [str(sol.mesh.n_nodes), str(len(sol.mesh.elements))]])))
    return files


def _curve_name(kind: str, i: int) -> str:
    return f"{kind}_{i:03d}.csv"


def cmd_indicate(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    use_oracle = bool(getattr(args, "oracle", False))
    threads = int(getattr(args, "threads", 1) or 1)
    geom, mat = cfg.geom, cfg.mat
    if not cfg.probes and not cfg.scan:
        raise CliError("indicate", "config lists no probe points")
    if use_oracle:
        try:
            source = cfg.oracle_jump()
        except (ConfigError, ValueError) as exc:
            raise CliError("indicate", str(exc)) from exc
        reference = None
    else:
        source = read_trace_csv(_read(out / "forward" / "trace.csv", "indicate"), geom)
        jpath = out / "forward" / "jump.csv"
        reference = read_jump_csv(jpath.read_text(), geom.c) if jpath.exists() else None
    cdir = out / "curves"
    jobs = [("probe", x1, cfg.weight_for(x1)) for x1 in cfg.probes]
    jobs += [("scan", x1, geom.s_tilde) for x1 in cfg.scan]
    files, index = [], []
    counters: dict[str, int] = {}
    for kind, x1, ws in jobs:
        x = geom.probe(x1)
        srcs = [(kind, source)]
        if kind == "probe" and reference is not None:
            srcs.append(("reference", reference))
        for set_name, src in srcs:
            i = counters.get(set_name, 0)
            counters[set_name] = i + 1
            try:
                cv = sweep_tau(src, x, cfg.taus, mat, ws, c=geom.c, threads=threads)
            except ValueError as exc:
                raise CliError("indicate", str(exc)) from exc
            name = _curve_name(set_name, i)
            files.append(write_atomic(cdir / name, cv.to_csv()))
            index.append([name, set_name, format_number(x[0]), format_number(x[1]), cv.route, format_number(ws)])
    files.append(write_atomic(cdir / "index.csv", _table(INDEX_COLUMNS, index)))
    return files


def _load_curves(out: Path, stage: str) -> dict[str, list[IndicatorCurve]]:
    cdir = out / "curves"
    text = _read(cdir / "index.csv", stage)
    rd = csv.reader(io.StringIO(text))
    if tuple(next(rd, ())) != INDEX_COLUMNS:
        raise CliError(stage, f"{cdir / 'index.csv'} has unexpected columns")
    sets: dict[str, list[IndicatorCurve]] = {}
    for name, set_name, x1, x2, route, ws in rd:
        try:
            cv = IndicatorCurve.from_csv(_read(cdir / name, stage), (float(x1), float(x2)), route)
        except ValueError as exc:
            raise CliError(stage, f"{cdir / name}: {exc}") from exc
        if not math.isclose(cv.weight_s, float(ws), rel_tol=1e-15):
            raise CliError(stage, f"{cdir / name}: weighting {cv.weight_s} differs from the index ({ws})")
        sets.setdefault(set_name, []).append(cv)
    return sets


def _check_weighting(curves: Sequence[IndicatorCurve], stage: str) -> None:
    ws = {cv.weight_s for cv in curves}
    if len(ws) > 1:
        raise CliError(stage, f"curves carry different weightings {sorted(ws)}")


def cmd_extract(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    sets = _load_curves(out, "extract")
    curves = sets.get("probe", [])
    if not curves:
        raise CliError("extract", "no probe curves in the index")
    _check_weighting(curves, "extract")
    refs = {cv.x: cv for cv in sets.get("reference", [])}
    results = []
    for cv in curves:
        if len(s_sigma(cv.x, cfg.cracks, cfg.geom).touching_tips) > 1:
            # two tips tie for the tangent disc: the log-derivative formula does not apply
            results.append(ExtractionResult(cv.x[0], math.nan, "indeterminate", 0.5 * math.pi, cv.x[0], "skipped",
                                            messages=("two tips tie for the tangent disc",)))
            continue
        cap = None
        if cv.x in refs:
            try:
                cap = discrepancy_cap(cv, refs[cv.x])
            except ExtractionError as exc:
                raise CliError("extract", str(exc)) from exc
            cap = -math.inf if cap is None else cap
        results.append(extract(cv, cfg.geom, tau_cap=cap))
    rdir = out / "results"
    files = [write_atomic(rdir / "extraction.csv", extraction_csv(results))]
    if "svg" in cfg.formats:
        files.append(write_atomic(rdir / "extraction.svg", extraction_svg(cfg.geom, cfg.cracks, results)))
    return files


def cmd_scan(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    curves = _load_curves(out, "scan").get("scan", [])
    if not curves:
        raise CliError("scan", "no scan curves in the index (configure [probes].scan)")
    _check_weighting(curves, "scan")
    try:
        results = scan_theorem31(curves, cfg.geom)
    except ExtractionError as exc:
        raise CliError("scan", str(exc)) from exc
    rdir = out / "results"
    files = [write_atomic(rdir / "scan.csv", scan_csv(results))]
    if "svg" in cfg.formats:
        files.append(write_atomic(rdir / "scan.svg", scan_svg(cfg.geom, cfg.cracks, results)))
    return files


def cmd_oracle(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    """Self-checks of the semi-analytic oracle, written as tables."""
    odir = out / "oracle"
    rows = []
    for n in (1, 2):
        for alpha in (0.0, 0.25 * math.pi, 0.5 * math.pi):
            for odd in (True, False):
                for s0 in (0.75, 1.0):
                    p = AlphaKernelParams.from_delta(s0, alpha, odd, delta=0.5 * s0)
                    lim = lemma51_limit(n, p)
                    for tau in (400.0, 800.0):
                        r = scaled_oscillatory_I(n, tau, p) / lim
                        rows.append([str(n), format_number(alpha), "odd" if odd else "even", format_number(s0),
                                     format_number(tau), format_number(abs(abs(r) - 1)),
                                     format_number(abs(np.angle(r)))])
    files = [write_atomic(odir / "lemma51.csv", _table(LEMMA51_COLUMNS, rows))]
    if cfg.oracle:
        jump = cfg.oracle_jump()
        by_tip = {int(t["tip"]): t for t in cfg.oracle}
        rows = []
        tau = 400.0
        for x1 in cfg.probes:
            x = cfg.geom.probe(x1)
            tg = s_sigma(x, cfg.cracks, cfg.geom)
            if not tg.unique or len(tg.touching_tips) != 1 or tg.touching_tips[0] not in by_tip:
                continue
            j = tg.touching_tips[0]
            t = by_tip[j]
            C1 = prop43_coefficient(1, tg.s_sigma, tg.alpha, j, t["A"][0], t["B"][0], cfg.mat)
            theta = (-1) ** (j + 1) * math.cos(tg.alpha) / (2 * tg.s_sigma * (1 + math.sin(tg.alpha)))
            cv = sweep_tau(jump, x, [tau * (1 + 1e-3 * k) for k in range(8)], cfg.mat, tg.s_sigma, c=cfg.geom.c)
            emp = cv.samples[0].I * math.sqrt(tau) * np.exp(-1j * theta * tau)
            rows.append([format_number(v) for v in (x1,)] + [str(j)]
                        + [format_number(v) for v in (tg.s_sigma, tg.alpha, tau, C1.real, C1.imag,
                                                      emp.real, emp.imag, abs(emp / C1 - 1))])
        files.append(write_atomic(odir / "prop43.csv", _table(PROP43_COLUMNS, rows)))
    rng = np.random.default_rng(int(getattr(args, "seed", 0) or 0))
    rows = []
    for x1 in cfg.probes or (0.5 * cfg.geom.a,):
        x = cfg.geom.probe(x1)
        pts = np.column_stack([rng.uniform(0, cfg.geom.a, 4), rng.uniform(0, cfg.geom.b, 4)])
        for y in pts:
            rep = verify_navier(x, 5.0, cfg.mat, [y])
            rows.append([format_number(v) for v in (y[0], y[1], 5.0, rep.navier_residual, rep.divergence,
                                                    rep.field_scale)] + [str(rep.ok).lower()])
    files.append(write_atomic(odir / "navier.csv", _table(NAVIER_COLUMNS, rows)))
    return files


# ---------------------------------------------------------------------------
# pipeline with caching and manifest


_STAGE_SECTIONS = {
    "forward": ("geometry", "cracks", "material", "load", "solver", "probes", "output"),
    "indicate": ("geometry", "cracks", "material", "load", "solver", "probes", "indicator", "oracle"),
}


def _stage_key(cfg: RunConfig, stage: str, oracle: bool) -> str:
    secs = _STAGE_SECTIONS[stage]
    if oracle:
        secs = tuple(s for s in secs if s not in ("load", "solver"))
    return f"{cfg.section_hash(*secs)}-{'oracle' if oracle else 'fem'}"


def _cached(out: Path, stage: str, key: str) -> list[Path] | None:
    kfile = out / stage / ".cache-key"
    lfile = out / stage / ".cache-files"
    if not (kfile.exists() and lfile.exists()) or kfile.read_text().strip() != key:
        return None
    files = [out / p for p in lfile.read_text().split()]
    return files if all(f.exists() for f in files) else None


def _remember(out: Path, stage: str, key: str, files: list[Path]) -> None:
    write_atomic(out / stage / ".cache-files", "\n".join(str(f.relative_to(out)) for f in files) + "\n")
    write_atomic(out / stage / ".cache-key", key + "\n")


def cmd_pipeline(cfg: RunConfig, out: Path, args=None) -> list[Path]:
    use_oracle = bool(getattr(args, "oracle", False))
    manifest = out / "manifest.json"
    if manifest.exists():
        manifest.unlink()
    timing: dict[str, dict] = {}
    files: list[Path] = []
    stages = [] if use_oracle else ["forward"]
    stages += ["indicate"]
    if cfg.probes:
        stages.append("extract")
    if cfg.scan:
        stages.append("scan")
    for stage in stages:
        t0 = time.perf_counter()
        hit = None
        if stage in _STAGE_SECTIONS:
            key = _stage_key(cfg, stage, use_oracle)
            hit = _cached(out, stage if stage != "indicate" else "curves", key)
        if hit is not None:
            produced = hit
        else:
            produced = COMMANDS[stage](cfg, out, args)
            if stage in _STAGE_SECTIONS:
                _remember(out, stage if stage != "indicate" else "curves", key, produced)
        timing[stage] = {"seconds": round(time.perf_counter() - t0, 3), "cached": hit is not None}
        files += produced
    inventory = [{"path": str(f.relative_to(out)), "sha256": sha256(f), "bytes": f.stat().st_size}
                 for f in sorted(set(files))]
    doc = {
        "config": cfg.source,
        "config_hash": cfg.full_hash,
        "mode": "oracle" if use_oracle else "fem",
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
        "versions": {"enclosure": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "timing": timing,
        "files": inventory,
    }
    write_atomic(manifest, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return files + [manifest]


COMMANDS = {"forward": cmd_forward, "indicate": cmd_indicate, "extract": cmd_extract, "scan": cmd_scan,
            "oracle": cmd_oracle, "pipeline": cmd_pipeline}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="enclosure", description="Crack reconstruction by the enclosure method.")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--out", default=None, help="output directory (default: [output].directory)")
    ap.add_argument("--oracle", action="store_true", help="use the configured series jumps instead of FEM data")
    ap.add_argument("--threads", type=int, default=1, help="threads for the tau sweeps")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized oracle checks")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("enclosure: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else cfg.out_dir)
        files = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"enclosure: config: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"enclosure: {exc}", file=sys.stderr)
        return exc.code
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
