"""Concavity of the potential-to-DtN map along potential segments.

For potentials V_t = (1-t) V_1 + t V_2 with small sup norms, the boundary
energy H_f(t) = <f, Lambda_{V_t} f> is concave in t. This module samples the
curve, solves the linearization cascade u_0, v, r_t, rdot_t, rddot_t behind
the closed second-derivative formula

    H''(t) = -2 int (|grad v|^2 + V_1 v^2) + 6 t int q v^2
             + 12 t^2 int q v r_t + 8 t^3 int q v rdot_t + t^4 int q v rddot_t,

cross-checks it against Richardson-extrapolated finite differences, and
audits the operator-level inequality via the smallest eigenvalue of the gap
pencil (Lambda_t - (1-t) Lambda_{V_1} - t Lambda_{V_2}, B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .elliptic import Discretization
from .geometry import potential_values


@dataclass(frozen=True)
class LinearizationFields:
    u0: np.ndarray
    v: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    rddot: np.ndarray
    residuals: dict


class ConvexityWorkspace:
    """Shared solves and caches for one (V_1, V_2, f) experiment."""

    def __init__(self, mesh, metric, V1, V2, f, disc: Discretization | None = None):
        self.disc = disc or Discretization(mesh, metric)
        self.mesh = self.disc.mesh
        n = self.mesh.n_vertices
        self.v1 = potential_values(V1, n)
        self.v2 = potential_values(V2, n)
        self.q = self.v2 - self.v1
        self.f = np.asarray(f, dtype=float)
        delta = self.disc.smallness_threshold
        for name, vals in (("V1", self.v1), ("V2", self.v2)):
            if np.abs(vals).max(initial=0.0) > delta * (1 + 1e-12):
                raise ValueError(
                    f"{name} sup norm {np.abs(vals).max():.3g} exceeds the "
                    f"smallness threshold {delta:.3g}"
                )
        self.M_q = self.disc.potential_mass(self.q)
        self._lu_cache: dict = {}
        self._h_cache: dict = {}
        self._base_fields = None

    def potential_at(self, t: float) -> np.ndarray:
        return (1.0 - t) * self.v1 + t * self.v2

    def _factor(self, t: float):
        if t not in self._lu_cache:
            A = self.disc.operator(self.potential_at(t))
            self._lu_cache[t] = (A, self.disc.interior_factor(A))
        return self._lu_cache[t]

    def solve(self, t: float, f: np.ndarray) -> np.ndarray:
        A, lu = self._factor(t)
        iidx, bidx = self.disc.iidx, self.disc.bidx
        u = np.zeros(self.mesh.n_vertices)
        u[bidx] = f
        A_IB = A[iidx][:, bidx]
        u[iidx] = lu.solve(-(A_IB @ f))
        return u

    def h(self, t: float) -> float:
        """Boundary pairing <f, Lambda_t f> via one Dirichlet solve."""
        if t not in self._h_cache:
            u = self.solve(t, self.f)
            A, _ = self._factor(t)
            self._h_cache[t] = float(self.f @ (A @ u)[self.disc.bidx])
        return self._h_cache[t]

    def fields(self, t: float) -> LinearizationFields:
        """u_0, v (t-independent) and the remainder cascade at parameter t."""
        disc = self.disc
        iidx = disc.iidx
        if self._base_fields is None:
            A1, lu1 = self._factor(0.0)
            u0 = self.solve(0.0, self.f)
            v = np.zeros(self.mesh.n_vertices)
            v[iidx] = lu1.solve(-(self.M_q @ u0)[iidx])
            self._base_fields = (u0, v)
        u0, v = self._base_fields
        A_t, lu_t = self._factor(t)
        r = np.zeros(self.mesh.n_vertices)
        r[iidx] = lu_t.solve(-(self.M_q @ v)[iidx])
        rdot = np.zeros(self.mesh.n_vertices)
        rdot[iidx] = lu_t.solve(-(self.M_q @ r)[iidx])
        rddot = np.zeros(self.mesh.n_vertices)
        rddot[iidx] = lu_t.solve(-2.0 * (self.M_q @ rdot)[iidx])
        A1, _ = self._factor(0.0)
        scale = max(1.0, float(np.abs(self.M_q @ u0).max()))
        residuals = {
            "u0": disc.dirichlet_residual(self.v1, u0),
            "v": float(np.abs((A1 @ v + self.M_q @ u0)[iidx]).max() / scale),
            "r": float(np.abs((A_t @ r + self.M_q @ v)[iidx]).max() / scale),
            "rdot": float(np.abs((A_t @ rdot + self.M_q @ r)[iidx]).max() / scale),
            "rddot": float(np.abs((A_t @ rddot + 2.0 * self.M_q @ rdot)[iidx]).max() / scale),
        }
        return LinearizationFields(u0, v, r, rdot, rddot, residuals)

    def reconstruction_gap(self, t: float) -> float:
        """Max mismatch of u_0 + t v + t^2 r_t against the direct solve."""
        flds = self.fields(t)
        direct = self.solve(t, self.f)
        composite = flds.u0 + t * flds.v + t * t * flds.r
        return float(
            np.abs(composite - direct).max() / max(1.0, np.abs(direct).max())
        )

    def hessian_formula(self, t: float) -> float:
        flds = self.fields(t)
        disc = self.disc
        v = flds.v
        K = disc.stiffness
        M_v1 = disc.potential_mass(self.v1)
        qv = self.M_q @ v
        return float(
            -2.0 * (v @ (K @ v) + v @ (M_v1 @ v))
            + 6.0 * t * (v @ qv)
            + 12.0 * t**2 * (flds.r @ qv)
            + 8.0 * t**3 * (flds.rdot @ qv)
            + t**4 * (flds.rddot @ qv)
        )

    def hessian_fd(self, t: float, dt: float = 1e-2) -> float:
        """Centered second difference of H with one Richardson step."""

        def second(d):
            return (self.h(t + d) - 2.0 * self.h(t) + self.h(t - d)) / d**2

        coarse = second(dt)
        fine = second(dt / 2.0)
        return (4.0 * fine - coarse) / 3.0

    def gap_min_eigenvalue(self, t: float) -> float:
        """Smallest eigenvalue of (Lambda_t - (1-t) Lambda_1 - t Lambda_2, B)."""
        s_t = self.disc.dtn(self.potential_at(t)).form
        s_0 = self.disc.dtn(self.v1).form
        s_1 = self.disc.dtn(self.v2).form
        gap = s_t - (1.0 - t) * s_0 - t * s_1
        vals = eigh(gap, self.disc.boundary_mass.toarray(), eigvals_only=True)
        return float(vals[0])

    def est_chain_constant(self, t: float) -> float:
        """Measured C in ||r|| + d^{-1}||rdot|| + d^{-2}||rddot|| <= C d ||v||."""
        flds = self.fields(t)
        disc = self.disc
        d = disc.smallness_threshold
        chain = (
            disc.h1_norm(flds.r)
            + disc.h1_norm(flds.rdot) / d
            + disc.h1_norm(flds.rddot) / d**2
        )
        denom = d * disc.l2_norm(flds.v)
        return float(chain / denom) if denom > 1e-300 else 0.0


# ---------------------------------------------------------------------------
# Operation wrappers
# ---------------------------------------------------------------------------


def h_curve(mesh, metric, V1, V2, f, t_grid) -> np.ndarray:
    ws = ConvexityWorkspace(mesh, metric, V1, V2, f)
    return np.array([ws.h(float(t)) for t in t_grid])


def linearization_fields(mesh, metric, V1, q, f, t) -> LinearizationFields:
    n = mesh.n_vertices
    v1 = potential_values(V1, n)
    v2 = v1 + potential_values(q, n)
    return ConvexityWorkspace(mesh, metric, v1, v2, f).fields(float(t))


def hessian_formula(workspace: ConvexityWorkspace, t) -> float:
    return workspace.hessian_formula(float(t))


def operator_combination_gap(mesh, metric, V1, V2, t, f=None) -> float:
    nb = len(mesh.boundary_vertices)
    probe = np.zeros(nb) if f is None else f
    ws = ConvexityWorkspace(mesh, metric, V1, V2, probe)
    return ws.gap_min_eigenvalue(float(t))


def deformation_rigidity_scan(mesh, metric, V, t_list, disc=None) -> dict:
    """Norms of Lambda_{tV} - Lambda_0 over small t > 0 plus the exact slope.

    The slope operator at t = 0 is the quadratic form f -> int u_f^2 V dV_g,
    assembled as E^T M_V E with E the harmonic extension.
    """
    disc = disc or Discretization(mesh, metric)
    vvals = potential_values(V, mesh.n_vertices)
    delta = disc.smallness_threshold
    if np.abs(vvals).max(initial=0.0) > delta * (1 + 1e-12):
        raise ValueError("potential exceeds the smallness threshold")
    base, ext = disc.dtn(None, return_extension=True)
    b_dense = disc.boundary_mass.toarray()

    def pencil_norm(mat):
        vals = eigh(mat, b_dense, eigvals_only=True)
        return float(np.abs(vals).max())

    M_V = disc.potential_mass(vvals)
    slope_form = ext.T @ (M_V @ ext)
    slope_exact = pencil_norm(slope_form)

    diffs = {}
    for t in t_list:
        s_t = disc.dtn(t * vvals).form
        diffs[float(t)] = pencil_norm(s_t - base.form)
    t_small = min(float(t) for t in t_list)
    slope_fd = diffs[t_small] / t_small
    return {
        "norms": diffs,
        "slope_exact": slope_exact,
        "slope_fd": slope_fd,
        "slope_rel_mismatch": abs(slope_fd - slope_exact) / max(slope_exact, 1e-300),
    }
