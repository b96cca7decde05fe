"""Metric-aware P1 finite element operators.

Weak forms on a triangulated surface (M, g):

    stiffness      K[i,j] = int_M  g^{ab} d_a phi_i d_b phi_j sqrt(det g) dx
    weighted mass  M[i,j] = int_M  w(x) phi_i phi_j sqrt(det g) dx
    boundary mass  B[i,j] = int_dM phi_i phi_j dS_g

The metric is evaluated at quadrature points (not vertex averaged), weights w
are P1 interpolants of nodal data, and triangle iteration order is fixed, so
assembly is deterministic and repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import quadrature
from .geometry import MetricField, TriangleMesh, potential_values


@dataclass(frozen=True)
class SparseOperator:
    """Assembled operator with a symmetry tag and matrix-market export."""

    matrix: sparse.csr_matrix
    symmetric: bool

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def symmetry_gap(self) -> float:
        d = self.matrix - self.matrix.T
        scale = max(np.abs(self.matrix.data).max(initial=0.0), 1e-300)
        return float(np.abs(d.data).max(initial=0.0) / scale)

    def export_matrix_market(self, path) -> None:
        m = self.matrix.tocoo()
        with open(path, "w", encoding="ascii") as fh:
            kind = "symmetric" if self.symmetric else "general"
            fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
            if self.symmetric:
                keep = m.row >= m.col  # store the lower triangle
                rows, cols, vals = m.row[keep], m.col[keep], m.data[keep]
            else:
                rows, cols, vals = m.row, m.col, m.data
            fh.write(f"{m.shape[0]} {m.shape[1]} {len(vals)}\n")
            for i, j, v in zip(rows, cols, vals):
                fh.write(f"{i + 1} {j + 1} {v!r}\n")


def load_matrix_market(path) -> sparse.csr_matrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        symmetric = header[-1] == "symmetric"
        nr, nc, _ = (int(t) for t in fh.readline().split())
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, v = line.split()
            rows.append(int(i) - 1)
            cols.append(int(j) - 1)
            vals.append(float(v))
    m = sparse.coo_matrix((vals, (rows, cols)), shape=(nr, nc))
    if symmetric:
        strict = m.copy()
        strict.data = np.where(strict.row == strict.col, 0.0, strict.data)
        m = m + strict.T
    return m.tocsr()


class FemCache:
    """Per-(mesh, metric) geometric quantities reused across assemblies."""

    def __init__(self, mesh: TriangleMesh, metric: MetricField):
        self.mesh = mesh
        self.metric = metric
        tris = mesh.triangles
        pts = mesh.vertices[tris]  # (nt, 3, 2)
        e1 = pts[:, 1] - pts[:, 0]
        e2 = pts[:, 2] - pts[:, 0]
        self.area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        # P1 gradients: rows of the inverse Jacobian arrangement
        inv_det = 1.0 / (2.0 * self.area)
        gx = np.stack(
            [
                (pts[:, 1, 1] - pts[:, 2, 1]),
                (pts[:, 2, 1] - pts[:, 0, 1]),
                (pts[:, 0, 1] - pts[:, 1, 1]),
            ],
            axis=1,
        )
        gy = np.stack(
            [
                (pts[:, 2, 0] - pts[:, 1, 0]),
                (pts[:, 0, 0] - pts[:, 2, 0]),
                (pts[:, 1, 0] - pts[:, 0, 0]),
            ],
            axis=1,
        )
        self.grads = np.stack([gx, gy], axis=2) * inv_det[:, None, None]  # (nt, 3, 2)
        self.qpoints = quadrature.triangle_points(mesh.vertices, tris)  # (nt, 6, 2)
        flat = self.qpoints.reshape(-1, 2)
        self.sqrt_det = metric.sqrt_det(flat).reshape(len(tris), 6)
        self.metric_inv = metric.inverse(flat).reshape(len(tris), 6, 2, 2)
        self.phi = quadrature.TRI_BARY  # (6, 3) P1 values at quadrature points
        self.qweights = quadrature.TRI_WEIGHTS

    # -- volume operators ---------------------------------------------------

    def _scatter(self, local: np.ndarray) -> sparse.csr_matrix:
        tris = self.mesh.triangles
        n = self.mesh.n_vertices
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        mat = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
        return mat.tocsr()

    def stiffness(self) -> sparse.csr_matrix:
        # w_q sqrt(det g)_q (grad_i . g^{-1}_q grad_j), integrated per triangle
        weight = self.qweights[None, :] * self.sqrt_det  # (nt, 6)
        gig = np.einsum("tia,tqab,tjb->tqij", self.grads, self.metric_inv, self.grads)
        local = self.area[:, None, None] * np.einsum("tq,tqij->tij", weight, gig)
        return self._scatter(local)

    def mass(self, nodal_weight=None, quad_weight=None) -> sparse.csr_matrix:
        weight = self.qweights[None, :] * self.sqrt_det
        if nodal_weight is not None:
            wq = np.einsum("qk,tk->tq", self.phi, nodal_weight[self.mesh.triangles])
            weight = weight * wq
        if quad_weight is not None:
            weight = weight * quad_weight
        phi2 = np.einsum("qi,qj->qij", self.phi, self.phi)
        local = self.area[:, None, None] * np.einsum("tq,qij->tij", weight, phi2)
        return self._scatter(local)

    def load(self, quad_values: np.ndarray) -> np.ndarray:
        """Vector int f phi_i dV_g from values f at quadrature points (nt, 6)."""
        weight = self.qweights[None, :] * self.sqrt_det * quad_values
        local = self.area[:, None] * np.einsum("tq,qi->ti", weight, self.phi)
        out = np.zeros(self.mesh.n_vertices)
        np.add.at(out, self.mesh.triangles.ravel(), local.ravel())
        return out

    def interpolate_at_quad(self, nodal: np.ndarray) -> np.ndarray:
        return np.einsum("qk,tk->tq", self.phi, nodal[self.mesh.triangles])

    def integrate(self, quad_values: np.ndarray) -> float:
        weight = self.qweights[None, :] * self.sqrt_det * quad_values
        return float(np.sum(self.area[:, None] * weight))

    # -- boundary operator ----------------------------------------------------

    def boundary_mass(self) -> sparse.csr_matrix:
        """Boundary mass in boundary-DOF order (tridiagonal per loop)."""
        mesh = self.mesh
        bidx = mesh.boundary_vertices
        local_of = {int(v): i for i, v in enumerate(bidx)}
        rows, cols, vals = [], [], []
        s = quadrature.EDGE_NODES
        w = quadrature.EDGE_WEIGHTS
        shape = np.array([(1.0 - s), s])  # (2, 3) P1 values along the edge
        for loop in mesh.boundary_loops:
            a_idx = loop
            b_idx = np.roll(loop, -1)
            a = mesh.vertices[a_idx]
            b = mesh.vertices[b_idx]
            pts = quadrature.edge_points(a, b).reshape(-1, 2)
            g = self.metric.tensor(pts).reshape(len(loop), 3, 2, 2)
            tau = b - a  # unnormalized tangent doubles as the ds/dparam factor
            rho = np.sqrt(np.einsum("ea,eqab,eb->eq", tau, g, tau))
            local = np.einsum("eq,q,iq,jq->eij", rho, w, shape, shape)
            la = np.array([local_of[int(v)] for v in a_idx])
            lb = np.array([local_of[int(v)] for v in b_idx])
            for (i, j, block) in (
                (la, la, local[:, 0, 0]),
                (la, lb, local[:, 0, 1]),
                (lb, la, local[:, 1, 0]),
                (lb, lb, local[:, 1, 1]),
            ):
                rows.append(i)
                cols.append(j)
                vals.append(block)
        n = len(bidx)
        mat = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        return mat.tocsr()


# ---------------------------------------------------------------------------
# Public assembly operations
# ---------------------------------------------------------------------------


def assemble_stiffness(mesh: TriangleMesh, metric: MetricField) -> SparseOperator:
    return SparseOperator(FemCache(mesh, metric).stiffness(), symmetric=True)


def assemble_mass(mesh: TriangleMesh, metric: MetricField, weight=None) -> SparseOperator:
    """Weighted mass matrix; weight is 1, a PotentialField, or nodal values."""
    nodal = None if weight is None else potential_values(weight, mesh.n_vertices)
    return SparseOperator(FemCache(mesh, metric).mass(nodal), symmetric=True)


def assemble_boundary_mass(mesh: TriangleMesh, metric: MetricField) -> SparseOperator:
    return SparseOperator(FemCache(mesh, metric).boundary_mass(), symmetric=True)
