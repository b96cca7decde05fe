"""Dirichlet solves, Dirichlet-to-Neumann matrices, and Dirichlet eigensystems.

Normal derivatives are always variational: the DtN pairing matrix is the Schur
complement of the full operator K + M_V onto the boundary degrees of freedom,
so every discrete Green identity downstream holds to roundoff rather than to
discretization accuracy. Factorizations are reused across the one-solve-per-
boundary-DOF loops, and eigen iterations start from fixed vectors so repeated
runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.linalg import cholesky, eigh, solve_triangular
from scipy.sparse.linalg import eigsh, splu

from .assembly import FemCache
from .geometry import MetricField, TriangleMesh, potential_label, potential_values

_SINGULARITY_TOL = 1e-11
_EIG_SEED = 20240901


class SingularOperatorError(RuntimeError):
    """The discrete operator has (numerically) a zero Dirichlet eigenvalue."""


def _guarded_factor(matrix: sparse.spmatrix):
    lu = splu(matrix.tocsc())
    du = np.abs(lu.U.diagonal())
    if du.min() <= _SINGULARITY_TOL * du.max():
        raise SingularOperatorError(
            "A2 violated (zero is a discrete Dirichlet eigenvalue)"
        )
    return lu


@dataclass(frozen=True)
class DtNMatrix:
    """Boundary pairing form of a Dirichlet-to-Neumann map.

    form[a, b] = int_dM phi_a Lambda(phi_b) dS_g, i.e. the Schur complement of
    K + M_V (or K + z M) onto the boundary DOFs; boundary_mass realizes the
    dS_g pairing, so operator statements live in the (form, B) pencil.
    """

    form: np.ndarray
    boundary_mass: sparse.csr_matrix
    boundary_vertices: np.ndarray
    metric_id: str
    coefficient_id: str

    @property
    def dimension(self) -> int:
        return self.form.shape[0]

    @cached_property
    def _b_lu(self):
        return splu(self.boundary_mass.tocsc())

    @cached_property
    def _b_dense(self) -> np.ndarray:
        return self.boundary_mass.toarray()

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Nodal boundary values of Lambda f (solves B x = form f)."""
        y = self.form @ f
        if np.iscomplexobj(y):
            return self._b_lu.solve(y.real) + 1j * self._b_lu.solve(y.imag)
        return self._b_lu.solve(y)

    def pairing(self, f: np.ndarray, h: np.ndarray):
        return f @ (self.form @ h)

    def b_norm(self, trace: np.ndarray) -> float:
        return float(np.sqrt(np.real(np.conj(trace) @ (self.boundary_mass @ trace))))

    def generalized_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of Lambda in the boundary-mass pairing, ascending."""
        return eigh(self.form, self._b_dense, eigvals_only=True)

    def operator_b_norm(self) -> float:
        """Norm of Lambda = B^{-1} form as an operator on the B inner product."""
        s = self.form
        t = np.conj(s.T) @ np.linalg.solve(self._b_dense, s)
        t = 0.5 * (t + np.conj(t.T))
        vals = eigh(t.real if not np.iscomplexobj(t) else t, self._b_dense, eigvals_only=True)
        return float(np.sqrt(max(vals.max(), 0.0)))

    def symmetry_gap(self) -> float:
        scale = max(np.abs(self.form).max(), 1e-300)
        return float(np.abs(self.form - self.form.T).max() / scale)


@dataclass(frozen=True)
class EigenSystem:
    """Dirichlet eigenpairs with variational boundary flux traces.

    modes holds interior nodal coefficients, M-orthonormal; flux_traces[:, k]
    is psi_k = B^{-1} (boundary rows of K + M_V applied to phi_k).
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    flux_traces: np.ndarray
    interior_vertices: np.ndarray
    boundary_vertices: np.ndarray
    metric_id: str
    potential_id: str

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def full_mode(self, k: int, n_vertices: int) -> np.ndarray:
        out = np.zeros(n_vertices)
        out[self.interior_vertices] = self.modes[:, k]
        return out


class Discretization:
    """Assembled operators and index partitions for one (mesh, metric) pair."""

    def __init__(self, mesh: TriangleMesh, metric: MetricField):
        self.mesh = mesh
        self.metric = metric
        self.fem = FemCache(mesh, metric)
        self.iidx = mesh.interior_vertices
        self.bidx = mesh.boundary_vertices

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        return self.fem.stiffness()

    @cached_property
    def mass(self) -> sparse.csr_matrix:
        return self.fem.mass()

    @cached_property
    def boundary_mass(self) -> sparse.csr_matrix:
        return self.fem.boundary_mass()

    @cached_property
    def _b_lu(self):
        return splu(self.boundary_mass.tocsc())

    def b_solve(self, y: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(y):
            return self._b_lu.solve(y.real) + 1j * self._b_lu.solve(y.imag)
        return self._b_lu.solve(y)

    def potential_mass(self, V) -> sparse.csr_matrix:
        vals = potential_values(V, self.mesh.n_vertices)
        return self.fem.mass(vals)

    def potential_load(self, V) -> np.ndarray:
        """Vector with entries int V phi_i dV_g (V interpolated at quadrature)."""
        vals = potential_values(V, self.mesh.n_vertices)
        return self.fem.load(self.fem.interpolate_at_quad(vals))

    def operator(self, V) -> sparse.csr_matrix:
        if V is None:
            return self.stiffness
        return self.stiffness + self.potential_mass(V)

    def partition(self, A: sparse.spmatrix):
        Ai = A[self.iidx]
        Ab = A[self.bidx]
        return (
            Ai[:, self.iidx].tocsc(),
            Ai[:, self.bidx].tocsr(),
            Ab[:, self.iidx].tocsr(),
            Ab[:, self.bidx].toarray(),
        )

    def interior_factor(self, A: sparse.spmatrix):
        return _guarded_factor(A[self.iidx][:, self.iidx])

    # -- solves ---------------------------------------------------------------

    def solve_dirichlet(self, V, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != (len(self.bidx),):
            raise ValueError(f"trace length {f.shape} != ({len(self.bidx)},)")
        A = self.operator(V)
        A_II, A_IB, _, _ = self.partition(A)
        lu = _guarded_factor(A_II)
        u = np.zeros(self.mesh.n_vertices, dtype=f.dtype)
        u[self.bidx] = f
        u[self.iidx] = lu.solve(-(A_IB @ f))
        return u

    def dirichlet_residual(self, V, u: np.ndarray) -> float:
        A = self.operator(V)
        r = (A @ u)[self.iidx]
        scale = max(float(np.abs(A @ u).max()), float(np.abs(u).max()), 1e-300)
        return float(np.abs(r).max() / scale)

    def dtn(self, V=None, *, return_extension: bool = False):
        A = self.operator(V)
        A_II, A_IB, A_BI, A_BB = self.partition(A)
        lu = _guarded_factor(A_II)
        X = lu.solve(A_IB.toarray())
        S = A_BB - A_BI @ X
        S = 0.5 * (S + S.T)
        dtn = DtNMatrix(
            form=S,
            boundary_mass=self.boundary_mass,
            boundary_vertices=self.bidx,
            metric_id=self.metric.spec_id,
            coefficient_id=f"V={potential_label(V)}",
        )
        if return_extension:
            ext = np.zeros((self.mesh.n_vertices, len(self.bidx)))
            ext[self.iidx] = -X
            ext[self.bidx] = np.eye(len(self.bidx))
            return dtn, ext
        return dtn

    def resolvent_dtn(self, z: complex) -> DtNMatrix:
        """DtN of K + z M; complex arithmetic throughout, Re z >= 0 contract."""
        z = complex(z)
        A = (self.stiffness + z * self.mass).astype(np.complex128)
        A_II, A_IB, A_BI, A_BB = self.partition(A)
        lu = _guarded_factor(A_II)
        X = lu.solve(A_IB.toarray())
        S = A_BB - A_BI @ X
        S = 0.5 * (S + S.T)
        return DtNMatrix(
            form=S,
            boundary_mass=self.boundary_mass,
            boundary_vertices=self.bidx,
            metric_id=self.metric.spec_id,
            coefficient_id=f"z={z}",
        )

    # -- eigensystems -----------------------------------------------------------

    def eigensystem(self, V, count: int) -> EigenSystem:
        n_int = len(self.iidx)
        if count > 0.2 * n_int:
            raise ValueError(
                f"requested {count} modes exceeds the spectral-accuracy cutoff "
                f"0.2 x {n_int} interior DOFs"
            )
        A = self.operator(V)
        A_II, _, A_BI, _ = self.partition(A)
        M_II = self.mass[self.iidx][:, self.iidx].tocsc()
        rng = np.random.default_rng(_EIG_SEED)
        v0 = rng.standard_normal(n_int)
        vals, vecs = eigsh(A_II, k=count, M=M_II, sigma=0.0, which="LM", v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # tighten M-orthonormality (clustered pairs) via a Cholesky correction
        gram = vecs.T @ (M_II @ vecs)
        L = cholesky(gram, lower=True)
        vecs = solve_triangular(L, vecs.T, lower=True).T
        flux = self.b_solve(A_BI @ vecs)
        return EigenSystem(
            eigenvalues=vals,
            modes=vecs,
            flux_traces=flux,
            interior_vertices=self.iidx,
            boundary_vertices=self.bidx,
            metric_id=self.metric.spec_id,
            potential_id=potential_label(V),
        )

    @cached_property
    def poincare_constant(self) -> float:
        """Smallest Dirichlet eigenvalue of -Delta_g (the Poincare constant)."""
        return float(self.eigensystem(None, 1).eigenvalues[0])

    @cached_property
    def smallness_threshold(self) -> float:
        """Potential smallness scale: min(lambda_1 / 10, 0.1)."""
        return min(self.poincare_constant / 10.0, 0.1)

    # -- norms ------------------------------------------------------------------

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.mass @ u), 0.0)))

    def h1_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.stiffness @ u) + u @ (self.mass @ u), 0.0)))

    def energy(self, u: np.ndarray) -> float:
        return float(u @ (self.stiffness @ u))


# ---------------------------------------------------------------------------
# Operation wrappers
# ---------------------------------------------------------------------------


def solve_dirichlet(mesh, metric, V, f) -> np.ndarray:
    return Discretization(mesh, metric).solve_dirichlet(V, np.asarray(f, dtype=float))


def dtn_matrix(mesh, metric, V=None) -> DtNMatrix:
    return Discretization(mesh, metric).dtn(V)


def dirichlet_eigensystem(mesh, metric, V, count) -> EigenSystem:
    return Discretization(mesh, metric).eigensystem(V, count)


def resolvent_dtn(mesh, metric, z) -> DtNMatrix:
    return Discretization(mesh, metric).resolvent_dtn(z)


def poincare_constant(mesh, metric) -> float:
    return Discretization(mesh, metric).poincare_constant
