"""P2 plane-strain assembly and the bordered solve for the pure traction problem."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..geometry import BoundaryLoad, CompatibilityReport, Material, check_compatibility
from .mesh import Mesh, side_arclength

# degree-2 rule on the reference triangle, barycentric points, weights sum to 1
_QP = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_QW = np.full(3, 1 / 3)

GAUSS5_X, GAUSS5_W = np.polynomial.legendre.leggauss(5)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveReport:
    residual: float
    constraint_residual: float
    energy: float
    work: float
    compat: CompatibilityReport
    projected: bool

    @property
    def energy_mismatch(self) -> float:
        return abs(self.energy - self.work) / max(abs(self.work), 1e-300)


@dataclass(frozen=True)
class DiscreteSolution:
    mesh: Mesh
    mat: Material
    load: BoundaryLoad
    u: np.ndarray
    multipliers: np.ndarray
    report: SolveReport
    f: np.ndarray = field(repr=False, default=None)

    def trace(self, **kw):
        from .trace import boundary_trace
        return boundary_trace(self, **kw)

    def jump(self, **kw):
        from .trace import sigma_jump
        return sigma_jump(self, **kw)

    def element_strains(self) -> np.ndarray:
        """Strain (e11, e22, e12) per element at its three quadrature points."""
        grads = _p2_gradients(self.mesh)
        ue = self.u[self.mesh.elements]          # (ne, 6, 2)
        du = np.einsum("eqni,enk->eqki", grads, ue)  # du_k/dx_i
        e11 = du[..., 0, 0]
        e22 = du[..., 1, 1]
        e12 = 0.5 * (du[..., 0, 1] + du[..., 1, 0])
        return np.stack([e11, e22, e12], axis=-1)

    def dump(self) -> str:
        """Plain-text nodal dump: node id, x1, x2, u1, u2."""
        lines = ["# node_id x1 x2 u1 u2"]
        for i, (p, v) in enumerate(zip(self.mesh.nodes, self.u)):
            lines.append(f"{i} {p[0]:.17g} {p[1]:.17g} {v[0]:.17g} {v[1]:.17g}")
        return "\n".join(lines) + "\n"


def _barycentric_gradients(mesh: Mesh):
    p = mesh.vertex_coords()
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    if np.any(area2 <= 0):
        raise SolverError("mesh has inverted or degenerate elements")
    gl = np.empty((len(p), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        gl[:, i, 0] = (y[:, j] - y[:, k]) / area2
        gl[:, i, 1] = (x[:, k] - x[:, j]) / area2
    return gl, 0.5 * area2


def _p2_gradients(mesh: Mesh) -> np.ndarray:
    """Shape-function gradients at the quadrature points, shape (ne, nq, 6, 2)."""
    gl, _ = _barycentric_gradients(mesh)
    L = _QP
    out = np.empty((len(gl), 3, 6, 2))
    for q in range(3):
        for i in range(3):
            out[:, q, i] = (4 * L[q, i] - 1) * gl[:, i]
        for m, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
            out[:, q, 3 + m] = 4 * (L[q, i] * gl[:, j] + L[q, j] * gl[:, i])
    return out


def assemble_stiffness(mesh: Mesh, mat: Material) -> sp.csr_matrix:
    grads = _p2_gradients(mesh)
    _, area = _barycentric_gradients(mesh)
    ne = len(mesh.elements)
    B = np.zeros((ne, 3, 3, 12))
    B[:, :, 0, 0::2] = grads[..., 0]
    B[:, :, 1, 1::2] = grads[..., 1]
    B[:, :, 2, 0::2] = grads[..., 1]
    B[:, :, 2, 1::2] = grads[..., 0]
    lam, mu = mat.lam, mat.mu
    D = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
    Ke = np.einsum("q,e,eqai,ab,eqbj->eij", _QW, area, B, D, B)
    dofs = np.empty((ne, 12), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.elements
    dofs[:, 1::2] = 2 * mesh.elements + 1
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    n = 2 * mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def rigid_constraints(mesh: Mesh) -> sp.csr_matrix:
    """Rows: int u1, int u2, int (d1 u2 - d2 u1) over the plate."""
    grads = _p2_gradients(mesh)
    _, area = _barycentric_gradients(mesh)
    n = 2 * mesh.n_nodes
    el = mesh.elements
    # int N over a triangle: 0 at vertices, area/3 at midside nodes
    intN = np.zeros((len(el), 6))
    intN[:, 3:] = area[:, None] / 3
    intG = np.einsum("q,e,eqni->eni", _QW, area, grads)
    rows, cols, vals = [], [], []
    for r, (dof_of, v) in enumerate(((2 * el, intN), (2 * el + 1, intN),
                                     (2 * el + 1, intG[..., 0]), (2 * el, -intG[..., 1]))):
        row = min(r, 2)
        rows.append(np.full(v.size, row))
        cols.append(dof_of.ravel())
        vals.append(v.ravel())
    C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3, n))
    return C.tocsr()


def edge_shape(s: np.ndarray) -> np.ndarray:
    """Quadratic shape functions on an edge parametrised by s in [0, 1]: (start, end, mid)."""
    return np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=-1)


def load_vector(mesh: Mesh, load: BoundaryLoad) -> np.ndarray:
    f = np.zeros(2 * mesh.n_nodes)
    s = 0.5 * (GAUSS5_X + 1)
    w = 0.5 * GAUSS5_W
    N = edge_shape(s)
    nodes = mesh.nodes
    for side in ("bottom", "right", "top", "left"):
        sel = mesh.edge_side == side
        if not sel.any():
            continue
        e = mesh.boundary_edges[sel]
        pa, pb = nodes[e[:, 0]], nodes[e[:, 1]]
        length = np.linalg.norm(pb - pa, axis=1)
        pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]
        coord = pts[..., 0] if side in ("top", "bottom") else pts[..., 1]
        g = load.evaluate(side, coord)              # (ne, 5, 2)
        contrib = np.einsum("q,qn,e,eqk->enk", w, N, length, g)
        for k in range(2):
            np.add.at(f, 2 * e + k, contrib[..., k])
    return f


def rigid_modes(mesh: Mesh) -> np.ndarray:
    """Nodal interpolants of e1, e2 and (x2, -x1), shape (3, 2 n_nodes)."""
    x = mesh.nodes
    R = np.zeros((3, 2 * mesh.n_nodes))
    R[0, 0::2] = 1
    R[1, 1::2] = 1
    R[2, 0::2] = x[:, 1]
    R[2, 1::2] = -x[:, 0]
    return R


def assemble_and_solve(mesh: Mesh, mat: Material, load: BoundaryLoad,
                       tol: float = 1e-10) -> DiscreteSolution:
    """Galerkin solution normalised by the three rigid-motion integral constraints."""
    compat = check_compatibility(load)
    K = assemble_stiffness(mesh, mat)
    C = rigid_constraints(mesh)
    f = load_vector(mesh, load)
    projected = False
    R = rigid_modes(mesh)
    fr = R @ f
    if not compat.compatible:
        warnings.warn("; ".join(compat.messages) + " -- projecting the load onto the compatible subspace")
        f = f - R.T @ np.linalg.solve(R @ R.T, fr)
        projected = True
    n = K.shape[0]
    A = sp.bmat([[K, C.T], [C, None]], format="csc")
    rhs = np.concatenate([f, np.zeros(3)])
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"bordered system is singular: {exc}") from exc
    sol = lu.solve(rhs)
    # iterative refinement, residuals in extended precision so the result does not
    # inherit the condition number of the bordered system
    Ax, bx = A.astype(np.longdouble), rhs.astype(np.longdouble)
    for _ in range(3):
        r = bx - Ax @ sol.astype(np.longdouble)
        sol = (sol.astype(np.longdouble) + lu.solve(r.astype(float)).astype(np.longdouble)).astype(float)
    if not np.all(np.isfinite(sol)):
        raise SolverError("solve produced non-finite values (rigid constraints redundant?)")
    u, lam = sol[:n], sol[n:]
    fn = max(np.linalg.norm(f), 1e-300)
    res = np.linalg.norm(K @ u + C.T @ lam - f) / fn if np.linalg.norm(f) > 0 else float(np.linalg.norm(K @ u))
    cres = float(np.abs(C @ u).max())
    energy = float(u @ (K @ u))
    work = float(f @ u)
    report = SolveReport(float(res), cres, energy, work, compat, projected)
    if res > tol:
        warnings.warn(f"weak-form residual {res:.2e} above tolerance {tol:.0e}")
    return DiscreteSolution(mesh, mat, load, u.reshape(-1, 2), lam, report, f)


__all__ = ["DiscreteSolution", "SolveReport", "SolverError", "assemble_and_solve", "assemble_stiffness",
           "rigid_constraints", "load_vector", "rigid_modes", "edge_shape", "side_arclength"]
