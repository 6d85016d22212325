"""Boundary traces and crack openings of a finite element solution."""

from __future__ import annotations

import csv
import io
import warnings

import numpy as np

from ..indicator import BoundaryTrace, JumpSamples, format_number
from .mesh import OUTWARD, side_arclength
from .solver import GAUSS5_W, GAUSS5_X, DiscreteSolution, edge_shape


def _edge_samples(nodes, edges, values, n_sub: np.ndarray):
    """Gauss points, weights and interpolated values on edges split into n_sub panels."""
    pts, wts, vals = [], [], []
    s01 = 0.5 * (GAUSS5_X + 1)
    w01 = 0.5 * GAUSS5_W
    for e, k in zip(edges, n_sub):
        pa, pb = nodes[e[0]], nodes[e[1]]
        length = float(np.hypot(*(pb - pa)))
        s = ((np.arange(k)[:, None] + s01[None, :]) / k).ravel()
        w = np.tile(w01, k) * length / k
        N = edge_shape(s)
        pts.append(pa + s[:, None] * (pb - pa))
        wts.append(w)
        vals.append(N @ values[e])
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(vals)


def boundary_trace(sol: DiscreteSolution, focus: tuple[float, ...] = (), focus_radius: float | None = None,
                   n_sub: int = 16) -> BoundaryTrace:
    """Displacement and load at 5-point Gauss nodes of every boundary edge, counterclockwise.

    Top edges within ``focus_radius`` (default 3 eps) of an abscissa in
    ``focus`` are split into ``n_sub`` panels, since the probe varies fastest there.
    """
    mesh = sol.mesh
    geom = mesh.geom
    rad = 3 * geom.eps if focus_radius is None else focus_radius
    nodes = mesh.nodes
    out = {k: [] for k in ("p", "n", "w", "u", "g", "side", "arc")}
    for side in ("bottom", "right", "top", "left"):
        sel = mesh.edge_side == side
        edges = mesh.boundary_edges[sel]
        if not len(edges):
            continue
        k = np.ones(len(edges), dtype=int)
        if side == "top" and focus:
            xm = nodes[edges[:, 2], 0]
            near = np.min(np.abs(xm[:, None] - np.asarray(focus)[None, :]), axis=1) < rad
            k[near] = n_sub
        p, w, u = _edge_samples(nodes, edges, sol.u, k)
        coord = p[:, 0] if side in ("top", "bottom") else p[:, 1]
        out["p"].append(p)
        out["w"].append(w)
        out["u"].append(u)
        out["g"].append(sol.load.evaluate(side, coord))
        out["n"].append(np.broadcast_to(np.array(OUTWARD[side]), p.shape))
        out["side"].append(np.full(len(p), side))
        out["arc"].append(side_arclength(side, p, geom))
    cat = {k: np.concatenate(v) for k, v in out.items()}
    order = np.argsort(cat["arc"], kind="stable")
    return BoundaryTrace(cat["p"][order], np.ascontiguousarray(cat["n"][order]), cat["w"][order],
                         cat["u"][order], cat["g"][order], cat["side"][order], cat["arc"][order])


def sigma_jump(sol: DiscreteSolution, include_gaps: bool = True) -> JumpSamples:
    """Opening u+ - u- at Gauss nodes of the junction-line edges, ordered in x1.

    Crack edges pair an upper face with its duplicated lower face.  Welded
    gap edges share their nodes, so their samples are exactly zero.
    """
    mesh = sol.mesh
    c = mesh.geom.c
    nodes = mesh.nodes
    pairs = mesh.crack_pairs
    up = mesh.crack_edges_upper
    lo = np.array([[pairs.get(int(v), int(v)) for v in e] for e in up], dtype=np.int64).reshape(-1, 3)
    ones = np.ones(len(up), dtype=int)
    p, w, uu = _edge_samples(nodes, up, sol.u, ones)
    _, _, ul = _edge_samples(nodes, lo, sol.u, ones)
    y1, wts, vals = [p[:, 0]], [w], [uu - ul]
    if include_gaps:
        gaps = _gap_edges(mesh)
        if len(gaps):
            pg, wg, ug = _edge_samples(nodes, gaps, sol.u, np.ones(len(gaps), dtype=int))
            y1.append(pg[:, 0])
            wts.append(wg)
            vals.append(ug - ug)
    y1 = np.concatenate(y1)
    order = np.argsort(y1, kind="stable")
    return JumpSamples(y1[order], np.concatenate(wts)[order], np.concatenate(vals)[order], c)


def _gap_edges(mesh) -> np.ndarray:
    el = mesh.elements
    c = mesh.geom.c
    tol = 1e-12 * max(mesh.geom.a, mesh.geom.b)
    rows = []
    for (i, j), m in (((1, 2), 3), ((2, 0), 4), ((0, 1), 5)):
        e = el[:, [i, j, m]]
        on = (np.abs(mesh.nodes[e[:, 0], 1] - c) < tol) & (np.abs(mesh.nodes[e[:, 1], 1] - c) < tol)
        rows.append(e[on])
    e = np.concatenate(rows)
    if len(e) and mesh.cracks is not None:
        # crack faces also lie on the line; keep only welded edges
        xm = mesh.nodes[e[:, 2], 0]
        on_crack = np.zeros(len(e), dtype=bool)
        for lo, hi in mesh.cracks.segments():
            on_crack |= (xm > lo) & (xm < hi)
        e = e[~on_crack]
    if not len(e):
        return e
    # interior edges on the line appear twice (once from each side); orient left to right
    x0, x1 = mesh.nodes[e[:, 0], 0], mesh.nodes[e[:, 1], 0]
    e = np.where((x0 > x1)[:, None], e[:, [1, 0, 2]], e)
    _, idx = np.unique(np.sort(e[:, :2], axis=1), axis=0, return_index=True)
    return e[np.sort(idx)]


TRACE_COLUMNS = ("side", "arclen", "y1", "y2", "u1", "u2", "g1", "g2")
JUMP_COLUMNS = ("y1", "weight", "j1", "j2")


def _table(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _read_table(text: str, header: tuple[str, ...], what: str) -> list[list[str]]:
    rd = csv.reader(io.StringIO(text))
    got = tuple(next(rd, ()))
    if got != header:
        raise ValueError(f"{what}: expected columns {header}, got {got}")
    return [row for row in rd if row]


def trace_csv(trace: BoundaryTrace) -> str:
    rows = ([str(s)] + [format_number(v) for v in (t, p[0], p[1], u[0], u[1], g[0], g[1])]
            for s, t, p, u, g in zip(trace.side, trace.arclen, trace.points, trace.u, trace.g))
    return _table(TRACE_COLUMNS, rows)


def jump_csv(jump: JumpSamples) -> str:
    rows = ([format_number(v) for v in (y, w, j[0], j[1])]
            for y, w, j in zip(jump.y1, jump.weights, jump.values))
    return _table(JUMP_COLUMNS, rows)


def read_jump_csv(text: str, c: float) -> JumpSamples:
    data = np.array(_read_table(text, JUMP_COLUMNS, "jump file"), dtype=float).reshape(-1, 4)
    return JumpSamples(data[:, 0], data[:, 1], data[:, 2:4], float(c))


def _gauss_weights(t: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray | None:
    """Recover weights if ``t`` tiles [t_lo, t_hi] with 5-point Gauss groups, else None."""
    if len(t) % 5:
        return None
    s01 = 0.5 * (GAUSS5_X + 1)
    grp = t.reshape(-1, 5)
    length = (grp[:, 4] - grp[:, 0]) / (s01[4] - s01[0])
    start = grp[:, 0] - s01[0] * length
    tol = 1e-9 * max(1.0, abs(t_hi - t_lo))
    recon = start[:, None] + s01[None, :] * length[:, None]
    ends = np.concatenate([start, [start[-1] + length[-1]]])
    if (np.abs(recon - grp).max() > tol or abs(ends[0] - t_lo) > tol or abs(ends[-1] - t_hi) > tol
            or np.abs(ends[1:-1] - (start[:-1] + length[:-1])).max(initial=0) > tol):
        return None
    return (0.5 * GAUSS5_W[None, :] * length[:, None]).ravel()


def _cell_weights(t: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray:
    mids = np.concatenate([[t_lo], 0.5 * (t[1:] + t[:-1]), [t_hi]])
    return np.diff(mids)


def read_trace_csv(text: str, geom) -> BoundaryTrace:
    """Parse a trace file; arc-length weights are rebuilt side by side.

    Traces written by :func:`trace_csv` consist of 5-point Gauss groups and
    get their exact weights back.  Other sample layouts fall back to
    midpoint cells, with a warning.
    """
    rows = _read_table(text, TRACE_COLUMNS, "trace file")
    if not rows:
        raise ValueError("trace file has no samples")
    side = np.array([r[0] for r in rows])
    num = np.array([r[1:] for r in rows], dtype=float)
    bad = set(side) - set(OUTWARD)
    if bad:
        raise ValueError(f"trace file has unknown sides {sorted(bad)}")
    order = np.argsort(num[:, 0], kind="stable")
    side, num = side[order], num[order]
    pts = num[:, 1:3]
    w = np.empty(len(side))
    spans = {"bottom": (0.0, geom.a), "right": (0.0, geom.b), "top": (0.0, geom.a), "left": (0.0, geom.b)}
    for sname, (lo, hi) in spans.items():
        sel = np.flatnonzero(side == sname)
        if not len(sel):
            continue
        t = pts[sel, 0] if sname in ("bottom", "top") else pts[sel, 1]
        rev = sname in ("top", "left")
        if rev:
            t = t[::-1]
        ws = _gauss_weights(t, lo, hi)
        if ws is None:
            warnings.warn(f"trace side {sname!r}: samples are not Gauss groups; using midpoint cells")
            ws = _cell_weights(t, lo, hi)
        w[sel] = ws[::-1] if rev else ws
    normals = np.array([OUTWARD[s] for s in side], dtype=float)
    return BoundaryTrace(pts, normals, w, num[:, 3:5].copy(), num[:, 5:7].copy(), side, num[:, 0].copy())
