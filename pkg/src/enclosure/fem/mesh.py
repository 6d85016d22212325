"""Conforming triangular meshes of the welded plate with split crack faces.

The mesh starts from a tensor grid whose lines pass through every tip, every
load support endpoint and the junction line.  Each cell is cut along a
diagonal, and elements near interior tips are refined by newest-vertex
bisection, which keeps the mesh conforming and the angles bounded.  Finally
every node strictly inside a crack segment (and the two crack mouths on the
plate sides) is duplicated; elements below the junction line are rewired to
the copy, so the two faces are free to separate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import SIDES, BoundaryLoad, CrackConfig, PlateGeometry


@dataclass(frozen=True)
class Mesh:
    """Quadratic (P2) triangle mesh.

    ``elements`` has six columns: three vertices counterclockwise, then the
    midside nodes of edges (v1,v2), (v2,v0), (v0,v1).  ``boundary_edges``
    rows are (vertex, vertex, midside) traversed counterclockwise around the
    plate; ``edge_side`` names the plate side of each row.  ``crack_pairs``
    maps an upper-face node to its lower-face copy.
    """

    geom: PlateGeometry
    cracks: CrackConfig | None
    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    edge_side: np.ndarray
    crack_edges_upper: np.ndarray
    crack_edges_lower: np.ndarray
    crack_pairs: dict
    h: float
    grading: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_vertices(self) -> int:
        return int(self.elements[:, :3].max()) + 1

    def vertex_coords(self) -> np.ndarray:
        return self.nodes[self.elements[:, :3]]

    def areas(self) -> np.ndarray:
        p = self.vertex_coords()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angle_deg(self) -> float:
        p = self.vertex_coords()
        ang = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cosv = (u * v).sum(1) / np.linalg.norm(u, axis=1) / np.linalg.norm(v, axis=1)
            ang.append(np.degrees(np.arccos(np.clip(cosv, -1, 1))))
        return float(np.min(ang))

    def element_size(self) -> np.ndarray:
        """Leg length of the equivalent right isosceles triangle, sqrt(2 area)."""
        return np.sqrt(2.0 * np.abs(self.areas()))

    def junction_multiplicity(self, tol: float = 1e-12) -> dict[float, int]:
        """How many nodes sit at each abscissa of the junction line."""
        on = np.abs(self.nodes[:, 1] - self.geom.c) < tol
        xs, counts = np.unique(np.round(self.nodes[on, 0], 12), return_counts=True)
        return dict(zip(xs.tolist(), counts.tolist()))

    def tip_element_size(self) -> float:
        """Smallest element size among elements touching an interior tip."""
        if self.cracks is None:
            return float(self.element_size().min())
        p = self.vertex_coords()
        size = self.element_size()
        best = math.inf
        for j in self.cracks.interior_tips:
            tip = np.array([self.cracks.tips[j], self.geom.c])
            touch = np.any(np.linalg.norm(p - tip, axis=2) < 1e-12, axis=1)
            if touch.any():
                best = min(best, float(size[touch].min()))
        return best


def _axis_breaks(lo: float, hi: float, points, h: float) -> np.ndarray:
    pts = sorted({lo, hi, *[p for p in points if lo < p < hi]})
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        out.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return np.array(out)


def _grid(xs: np.ndarray, ys: np.ndarray):
    """Structured triangulation with refinement edge = diagonal (opposite vertex 0)."""
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(ny, nx)
    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            p00, p10, p01, p11 = idx[j, i], idx[j, i + 1], idx[j + 1, i], idx[j + 1, i + 1]
            # alternate the diagonal so the pattern is symmetric under x1 -> a - x1
            if (i + j) % 2 == 0:
                tris.append((p10, p11, p00))
                tris.append((p01, p00, p11))
            else:
                tris.append((p00, p10, p01))
                tris.append((p11, p01, p10))
    return nodes, np.array(tris, dtype=np.int64)


def _orient_ccw(nodes, tris):
    # keep vertex 0 as the newest vertex; swap 1 and 2 if clockwise
    p = nodes[tris]
    cr = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    bad = cr < 0
    tris = tris.copy()
    tris[bad, 1], tris[bad, 2] = tris[bad, 2].copy(), tris[bad, 1].copy()
    return tris


def bisect(nodes: np.ndarray, tris: np.ndarray, marked: np.ndarray):
    """Newest-vertex bisection of the marked elements plus conforming closure.

    Element rows are (newest, a, b) with refinement edge (a, b).
    """
    nodes = [tuple(p) for p in nodes]
    tris = [tuple(t) for t in tris]
    key = lambda a, b: (a, b) if a < b else (b, a)
    cut = {key(t[1], t[2]) for t, m in zip(tris, marked) if m}
    changed = True
    while changed:
        changed = False
        for t in tris:
            if key(t[1], t[2]) in cut:
                continue
            if key(t[0], t[1]) in cut or key(t[0], t[2]) in cut:
                cut.add(key(t[1], t[2]))
                changed = True
    mids: dict = {}
    while True:
        out = []
        split = False
        for t in tris:
            e = key(t[1], t[2])
            if e not in cut:
                out.append(t)
                continue
            if e not in mids:
                pa, pb = nodes[t[1]], nodes[t[2]]
                mids[e] = len(nodes)
                nodes.append((0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])))
            m = mids[e]
            out.append((m, t[0], t[1]))
            out.append((m, t[2], t[0]))
            split = True
        tris = out
        if not split:
            break
        # only edges of the original cut set are bisected in this round
        cut = {e for e in cut if e not in mids}
        if not cut:
            break
    return np.array(nodes), np.array(tris, dtype=np.int64)


def _graded_target(centroids, tips, h, grading, theta):
    if len(tips) == 0 or grading <= 0:
        return np.full(len(centroids), h)
    d = np.min(np.linalg.norm(centroids[:, None, :] - tips[None, :, :], axis=2), axis=1)
    return np.maximum(h * 2.0 ** (-grading), np.minimum(h, theta * d))


def build_mesh(geom: PlateGeometry, cracks: CrackConfig | None, h: float, grading: int = 4,
               load: BoundaryLoad | None = None, theta: float = 0.5,
               extra_x: tuple[float, ...] = ()) -> Mesh:
    """Tip-graded P2 mesh aligned with the junction line, tips and load supports.

    ``cracks=None`` gives an uncracked plate (patch tests).
    """
    if not h > 0:
        raise ValueError("mesh size must be positive")
    if cracks is not None:
        cracks.validate(geom)
        t = cracks.tips
        shortest = min(b - a for a, b in zip(t[:-1], t[1:]))
        if not h < shortest / 4:
            raise ValueError(f"h={h} too coarse: need h < {shortest / 4} (quarter of shortest crack/gap)")
    if not h < min(geom.c, geom.b - geom.c) / 2:
        raise ValueError("h too coarse for the plate height")
    xb = list(extra_x)
    yb = [geom.c]
    if cracks is not None:
        xb += list(cracks.tips)
    if load is not None:
        bp = load.breakpoints()
        xb += bp["top"] + bp["bottom"]
        yb += bp["left"] + bp["right"]
    xs = _axis_breaks(0.0, geom.a, xb, h)
    ys = _axis_breaks(0.0, geom.b, yb, h)
    nodes, tris = _grid(xs, ys)
    tris = _orient_ccw(nodes, tris)

    tip_pts = np.zeros((0, 2))
    if cracks is not None:
        tip_pts = np.array([[cracks.tips[j], geom.c] for j in cracks.interior_tips])
    for _ in range(4 * grading + 4):
        p = nodes[tris]
        size = np.sqrt(np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                              - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])))
        target = _graded_target(p.mean(axis=1), tip_pts, h, grading, theta)
        marked = size > target * (1 + 1e-9)
        if not marked.any():
            break
        nodes, tris = bisect(nodes, tris, marked)
    tris = _orient_ccw(nodes, tris)
    return _finish(geom, cracks, nodes, tris, h, grading)


def _finish(geom, cracks, nodes, tris, h, grading) -> Mesh:
    tol = 1e-12 * max(geom.a, geom.b)
    nodes = np.asarray(nodes, dtype=float)
    nodes[np.abs(nodes[:, 1] - geom.c) < tol, 1] = geom.c
    # duplicate crack nodes
    pairs: dict[int, int] = {}
    tris = tris.copy()
    if cracks is not None:
        on_line = np.abs(nodes[:, 1] - geom.c) < tol
        cand = np.where(on_line)[0]
        x = nodes[cand, 0]
        split = np.zeros(len(cand), bool)
        for a0, a1 in cracks.segments():
            lo_open = a0 == 0.0
            hi_open = a1 == geom.a
            left = (x >= a0 - tol) if lo_open else (x > a0 + tol)
            right = (x <= a1 + tol) if hi_open else (x < a1 - tol)
            split |= left & right
        extra = []
        for n in cand[split]:
            pairs[int(n)] = len(nodes) + len(extra)
            extra.append(nodes[n])
        if extra:
            nodes = np.vstack([nodes, np.array(extra)])
        below = nodes[tris].mean(axis=1)[:, 1] < geom.c
        remap = np.arange(len(nodes))
        for up, lo in pairs.items():
            remap[up] = lo
        tris[below] = remap[tris[below]]
    # drop vertices not referenced (none expected) and add midside nodes
    n_vert = len(nodes)
    edges = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    ekey = np.sort(edges, axis=1)
    uniq, inv = np.unique(ekey, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid_ids = n_vert + np.arange(len(uniq))
    mid_xy = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
    all_nodes = np.vstack([nodes, mid_xy])
    ne = len(tris)
    elems = np.column_stack([tris, mid_ids[inv[:ne]], mid_ids[inv[ne:2 * ne]], mid_ids[inv[2 * ne:]]])

    # boundary edges appear once; directed edges of ccw triangles run ccw around the domain
    counts = np.bincount(inv, minlength=len(uniq))
    once = counts[inv] == 1
    dir_edges = edges[once]
    mids = mid_ids[inv[once]]
    pa, pb = nodes[dir_edges[:, 0]], nodes[dir_edges[:, 1]]
    side = np.full(len(dir_edges), "", dtype=object)
    side[(np.abs(pa[:, 1]) < tol) & (np.abs(pb[:, 1]) < tol)] = "bottom"
    side[(np.abs(pa[:, 1] - geom.b) < tol) & (np.abs(pb[:, 1] - geom.b) < tol)] = "top"
    side[(np.abs(pa[:, 0]) < tol) & (np.abs(pb[:, 0]) < tol)] = "left"
    side[(np.abs(pa[:, 0] - geom.a) < tol) & (np.abs(pb[:, 0] - geom.a) < tol)] = "right"
    crack = side == ""
    on_c = (np.abs(pa[:, 1] - geom.c) < tol) & (np.abs(pb[:, 1] - geom.c) < tol)
    if np.any(crack & ~on_c):
        raise RuntimeError("mesh has a free edge that is neither on the boundary nor on a crack")
    # ccw around the upper plate its crack face runs in +x1, the lower face in -x1
    upper = crack & (pb[:, 0] > pa[:, 0])
    lower = crack & (pb[:, 0] < pa[:, 0])
    crack_up = np.column_stack([dir_edges[upper], mids[upper]])
    crack_lo = np.column_stack([dir_edges[lower], mids[lower]])
    bnd = np.column_stack([dir_edges[~crack], mids[~crack]])
    bside = side[~crack].astype(str)
    order = _ccw_order(all_nodes, bnd, bside, geom)
    # extend the duplicate map to midside nodes
    lo_key = {tuple(sorted(e[:2])): e[2] for e in crack_lo}
    pairs_full = dict(pairs)
    for e in crack_up:
        a, b = int(e[0]), int(e[1])
        key = tuple(sorted((pairs.get(a, a), pairs.get(b, b))))
        if key in lo_key:
            pairs_full[int(e[2])] = int(lo_key[key])
    return Mesh(geom, cracks, all_nodes, elems.astype(np.int64), bnd[order], bside[order],
                crack_up, crack_lo, pairs_full, float(h), int(grading))


def _ccw_order(nodes, bnd, side, geom):
    """Sort boundary edges by the arclength of their midpoint from (0, 0), ccw."""
    mid = nodes[bnd[:, 2]]
    s = np.empty(len(bnd))
    a, b = geom.a, geom.b
    for name, off, coord, sign in (("bottom", 0.0, 0, 1), ("right", a, 1, 1),
                                   ("top", a + b, 0, -1), ("left", 2 * a + b, 1, -1)):
        m = side == name
        base = 0.0 if sign > 0 else (a if coord == 0 else b)
        s[m] = off + sign * (mid[m, coord] - base)
    return np.argsort(s, kind="stable")


def side_arclength(side: str, y: np.ndarray, geom: PlateGeometry) -> np.ndarray:
    """Counterclockwise arclength from the corner (0, 0)."""
    a, b = geom.a, geom.b
    if side == "bottom":
        return y[..., 0]
    if side == "right":
        return a + y[..., 1]
    if side == "top":
        return a + b + (a - y[..., 0])
    if side == "left":
        return 2 * a + b + (b - y[..., 1])
    raise ValueError(side)


OUTWARD = {"bottom": (0.0, -1.0), "right": (1.0, 0.0), "top": (0.0, 1.0), "left": (-1.0, 0.0)}
assert set(OUTWARD) == set(SIDES)
