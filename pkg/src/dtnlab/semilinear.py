"""Newton-Galerkin solves of -Delta_g u + F(x, u) = 0 and their linearizations.

Two nonlinearity families are supported: power type F(x, s) = V(x) s^m with
integer m >= 2, and separable type F(x, s) = s G(s) whose zero levels t_k give
the multi-branch Dirichlet problem u = t_k + f on the boundary. Solutions with
small boundary amplitude eps admit the expansion u_eps = eps + eps^m v_m + r,
and the module extracts v_m from symmetric eps grids by polynomial fitting,
checks the moment identities tied to the boundary flux pairing, and compares
the first linearization at t_k against the linear DtN with constant potential
t_k G'(t_k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic import Discretization, SingularOperatorError
from .geometry import PotentialField, potential_values


class NewtonError(RuntimeError):
    """Newton iteration left the well-posedness regime or failed to converge."""


@dataclass(frozen=True)
class PowerNonlinearity:
    """F(x, s) = V(x) s^m, single branch at t_1 = 0."""

    potential: PotentialField
    exponent: int

    def __post_init__(self):
        if self.exponent < 2:
            raise ValueError(f"power nonlinearity needs m >= 2, got {self.exponent}")

    @property
    def zeros(self):
        return (0.0,)

    def value(self, vq, uq):
        return vq * uq**self.exponent

    def derivative(self, vq, uq):
        return self.exponent * vq * uq ** (self.exponent - 1)

    label = property(lambda self: f"power(m={self.exponent})")


@dataclass(frozen=True)
class SeparableNonlinearity:
    """F(x, s) = s G(s) with listed zeros t_k of G.

    The admissibility sequence mu_k = t_k G'(t_k) must be strictly monotone
    with mu_k > 1 for the spectral machinery downstream.
    """

    g: Callable
    g_prime: Callable
    zeros: tuple

    def __post_init__(self):
        for t in self.zeros:
            if abs(t * self.g(t)) > 1e-12 * max(1.0, abs(t)):
                raise ValueError(f"listed zero t={t} has F(t) != 0")
        mus = self.mu_sequence()
        if np.any(mus <= 1.0):
            raise ValueError("admissibility requires t_k G'(t_k) > 1 for listed zeros")
        if len(mus) > 1 and not (
            np.all(np.diff(mus) > 0) or np.all(np.diff(mus) < 0)
        ):
            raise ValueError("t_k G'(t_k) sequence is not strictly monotone")

    def mu_sequence(self) -> np.ndarray:
        return np.array([t * self.g_prime(t) for t in self.zeros])

    def value(self, vq, uq):
        return uq * self.g(uq)

    def derivative(self, vq, uq):
        return self.g(uq) + uq * self.g_prime(uq)

    label = property(lambda self: f"separable(zeros={len(self.zeros)})")


def sine_nonlinearity(n_zeros: int = 4) -> SeparableNonlinearity:
    """F(s) = s sin(s) with zero levels t_k = 2 pi k, mu_k = 2 pi k."""
    return SeparableNonlinearity(
        g=np.sin, g_prime=np.cos, zeros=tuple(2.0 * np.pi * k for k in range(1, n_zeros + 1))
    )


@dataclass(frozen=True)
class ExpansionRecord:
    """Amplitude sweep of the small-data branch and its fitted expansion."""

    eps_grid: np.ndarray
    solutions: np.ndarray   # (n_vertices, n_eps)
    vm: np.ndarray          # extracted eps^m coefficient field
    vm_direct: np.ndarray
    vm_rel_l2: float
    low_order_rel: float    # largest relative norm among orders 2..m-1
    remainder_norms: np.ndarray
    fitted_exponent: float


class SemilinearSolver:
    """Newton iteration sharing one Discretization across amplitude sweeps."""

    def __init__(self, mesh, metric, spec, disc: Discretization | None = None):
        self.disc = disc or Discretization(mesh, metric)
        self.mesh = self.disc.mesh
        self.spec = spec
        if isinstance(spec, PowerNonlinearity):
            vq = self.disc.fem.interpolate_at_quad(spec.potential.values)
        else:
            vq = None
        self._vq = vq
        self._radii: dict = {}

    def _f_quad(self, u):
        uq = self.disc.fem.interpolate_at_quad(u)
        return self.spec.value(self._vq, uq)

    def _df_quad(self, u):
        uq = self.disc.fem.interpolate_at_quad(u)
        return self.spec.derivative(self._vq, uq)

    def residual(self, u):
        """Interior rows of K u + load(F(x, u))."""
        r = self.disc.stiffness @ u + self.disc.fem.load(self._f_quad(u))
        return r[self.disc.iidx]

    def flux_trace(self, u) -> np.ndarray:
        """Variational normal derivative of a semilinear solution."""
        r = self.disc.stiffness @ u + self.disc.fem.load(self._f_quad(u))
        return self.disc.b_solve(r[self.disc.bidx])

    def linearized_operator(self, u):
        return self.disc.stiffness + self.disc.fem.mass(quad_weight=self._df_quad(u))

    def well_posedness_radii(self, k: int):
        """(delta_0, delta_1): admissible boundary amplitude and solution ball.

        delta_0 = min(0.1, lambda_1 / (10 Lip)) with lambda_1 the smallest
        eigenvalue of the linearization at the branch level t_k and Lip a
        sampled Lipschitz bound of d_s F near t_k; delta_1 = 2 delta_0.
        """
        if k not in self._radii:
            t_k = self.spec.zeros[k]
            const = np.full(self.mesh.n_vertices, t_k)
            A = self.linearized_operator(const)
            # A2 check at the branch level
            self.disc.interior_factor(A)
            from scipy.sparse.linalg import eigsh

            iidx = self.disc.iidx
            M_II = self.disc.mass[iidx][:, iidx].tocsc()
            rng = np.random.default_rng(7)
            lam1 = float(
                eigsh(
                    A[iidx][:, iidx].tocsc(),
                    k=1,
                    M=M_II,
                    sigma=0.0,
                    which="LM",
                    v0=rng.standard_normal(len(iidx)),
                    return_eigenvectors=False,
                )[0]
            )
            s_grid = t_k + np.linspace(-0.5, 0.5, 21)
            samples = []
            for xq in (self._vq if self._vq is not None else np.ones((1, 1)),):
                for s in s_grid:
                    samples.append(self.spec.derivative(xq, np.full_like(xq, s)))
            samples = np.array([np.max(s) for s in samples])
            lip = float(np.abs(np.diff(samples)).max() / (s_grid[1] - s_grid[0]))
            d0 = min(0.1, abs(lam1) / (10.0 * max(lip, 1e-9)))
            self._radii[k] = (d0, 2.0 * d0)
        return self._radii[k]

    def solve(self, k: int, f, eps: float, *, tol: float = 1e-12, max_iter: int = 30):
        """Small solution with boundary data t_k + eps f, Newton from u = t_k."""
        t_k = self.spec.zeros[k]
        f = np.asarray(f, dtype=float)
        d0, d1 = self.well_posedness_radii(k)
        if np.abs(eps * f).max(initial=0.0) > d0 * (1 + 1e-12):
            raise NewtonError(
                f"outside well-posedness regime: boundary amplitude "
                f"{np.abs(eps * f).max():.3g} exceeds delta_0 = {d0:.3g}"
            )
        iidx, bidx = self.disc.iidx, self.disc.bidx
        u = np.full(self.mesh.n_vertices, float(t_k))
        u[bidx] = t_k + eps * f
        scale = max(1.0, abs(t_k))
        for _ in range(max_iter):
            res = self.residual(u)
            if np.linalg.norm(res) <= tol * scale:
                return u
            J = self.linearized_operator(u)
            try:
                lu = self.disc.interior_factor(J)
            except SingularOperatorError as exc:
                raise NewtonError(f"outside well-posedness regime: {exc}") from exc
            u[iidx] -= lu.solve(res)
            if np.abs(u - t_k).max() > d1:
                raise NewtonError(
                    "outside well-posedness regime: iterate left the "
                    f"delta_1 = {d1:.3g} ball around t_k"
                )
        raise NewtonError(f"Newton stalled above tol {tol} after {max_iter} steps")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def solve_semilinear(mesh, metric, spec, k, f, eps, disc=None) -> np.ndarray:
    return SemilinearSolver(mesh, metric, spec, disc).solve(k, f, eps)


def direct_vm(mesh, metric, V, disc: Discretization | None = None) -> np.ndarray:
    """Solution of -Delta_g v + V = 0 with zero boundary values (m-independent)."""
    disc = disc or Discretization(mesh, metric)
    b_V = disc.potential_load(V)
    lu = disc.interior_factor(disc.stiffness)
    out = np.zeros(mesh.n_vertices)
    out[disc.iidx] = lu.solve(-b_V[disc.iidx])
    return out


def default_eps_grid(m: int) -> np.ndarray:
    base = 0.02 if m == 2 else 0.02
    steps = np.arange(1, 5) * base
    return np.concatenate([-steps[::-1], steps])


def extract_vm(mesh, metric, V, m, eps_grid=None, disc=None) -> ExpansionRecord:
    """Fit u_eps - eps against powers of eps and isolate the eps^m coefficient.

    The fit uses a symmetric amplitude grid and scaled powers 0..m+2; the
    leading nontrivial coefficient is compared with the direct solve, and the
    remainder u_eps - eps - eps^m v_m is fitted for its decay exponent.
    """
    if isinstance(V, PotentialField):
        pot = V
    else:
        pot = PotentialField(potential_values(V, mesh.n_vertices), "array")
    spec = PowerNonlinearity(pot, int(m))
    solver = SemilinearSolver(mesh, metric, spec, disc)
    disc = solver.disc
    eps_grid = default_eps_grid(m) if eps_grid is None else np.asarray(eps_grid, float)
    if not np.allclose(np.sort(eps_grid), np.sort(-eps_grid)):
        raise ValueError("amplitude grid must be symmetric about zero")
    ones = np.ones(len(disc.bidx))
    sols = np.column_stack([solver.solve(0, ones, e) for e in eps_grid])

    # scaled Vandermonde least squares per nodal DOF
    scale = np.abs(eps_grid).max()
    tau = eps_grid / scale
    deg = m + 2
    design = np.vander(tau, deg + 1, increasing=True)
    target = sols - eps_grid[None, :]  # subtract the exact first-order term
    coeff_tau, *_ = np.linalg.lstsq(design, target.T, rcond=None)
    coeffs = coeff_tau / scale ** np.arange(deg + 1)[:, None]  # (deg+1, nv)

    vm = coeffs[m]
    vmd = direct_vm(mesh, metric, pot, disc=disc)
    ref = max(disc.l2_norm(vmd), 1e-300)
    vm_rel = disc.l2_norm(vm - vmd) / ref
    low = 0.0
    for j in range(2, m):
        low = max(low, disc.l2_norm(coeffs[j]) / ref)

    rem = target - np.outer(vmd, eps_grid**m)
    rem_norms = np.array([disc.l2_norm(rem[:, i]) for i in range(len(eps_grid))])
    keep = rem_norms > 1e-13
    if keep.sum() >= 3:
        slope = np.polyfit(np.log(np.abs(eps_grid[keep])), np.log(rem_norms[keep]), 1)[0]
    else:
        slope = float(m + 1)  # remainder at the noise floor
    return ExpansionRecord(
        eps_grid=eps_grid,
        solutions=sols,
        vm=vm,
        vm_direct=vmd,
        vm_rel_l2=float(vm_rel),
        low_order_rel=float(low),
        remainder_norms=rem_norms,
        fitted_exponent=float(slope),
    )


def moment_checks(mesh, metric, V, vm, m, eps_grid=None, disc=None) -> dict:
    """Moment integrals of v_m and the boundary flux pairing fit.

    Reports int |grad v_m|^2, int V v_m, their Galerkin-exact sum (which must
    vanish), and the coefficients of eps^{m+1} and eps^{2m} fitted to the flux
    pairing int_dM u_eps d_nu u_eps; the first recovers int V dV_g and the
    second (m+1) int V v_m + int |grad v_m|^2.
    """
    if isinstance(V, PotentialField):
        pot = V
    else:
        pot = PotentialField(potential_values(V, mesh.n_vertices), "array")
    spec = PowerNonlinearity(pot, int(m))
    solver = SemilinearSolver(mesh, metric, spec, disc)
    disc = solver.disc
    grad_sq = float(vm @ (disc.stiffness @ vm))
    b_V = disc.potential_load(pot)
    v_weighted = float(b_V @ vm)
    mean_v = float(b_V.sum())
    identity_gap = grad_sq + v_weighted

    eps_grid = default_eps_grid(m) if eps_grid is None else np.asarray(eps_grid, float)
    ones = np.ones(len(disc.bidx))
    pair = []
    for e in eps_grid:
        u = solver.solve(0, ones, e)
        r = disc.stiffness @ u + disc.fem.load(solver._f_quad(u))
        pair.append(float(u[disc.bidx] @ r[disc.bidx]))
    pair = np.array(pair)

    # flux pairing expands in eps^{m+1}, eps^{2m}, then +1 each; fit the
    # parity-matched power triples to keep the Vandermonde well conditioned
    if m % 2 == 0:
        odd = 0.5 * (pair - pair[::-1]) if np.allclose(eps_grid, -eps_grid[::-1]) else pair
        even = 0.5 * (pair + pair[::-1])
        pos = eps_grid > 0
        e = eps_grid[pos]
        a = np.linalg.lstsq(
            np.column_stack([e ** (m + 1), e ** (m + 3)]), odd[pos], rcond=None
        )[0][0]
        b = np.linalg.lstsq(
            np.column_stack([e ** (2 * m), e ** (2 * m + 2)]), even[pos], rcond=None
        )[0][0]
    else:
        pos = eps_grid > 0
        e = eps_grid[pos]
        sym = 0.5 * (pair + pair[::-1])[pos]
        coef = np.linalg.lstsq(
            np.column_stack([e ** (m + 1), e ** (2 * m), e ** (2 * m + 2)]),
            sym,
            rcond=None,
        )[0]
        a, b = coef[0], coef[1]

    expected_combo = (m + 1) * v_weighted + grad_sq
    return {
        "grad_sq": grad_sq,
        "v_weighted": v_weighted,
        "identity_gap": identity_gap,
        "potential_mean": mean_v,
        "fitted_mean": float(a),
        "fitted_combo": float(b),
        "expected_combo": expected_combo,
        "mean_rel_error": abs(a - mean_v) / max(abs(mean_v), 1e-300),
        "combo_rel_error": abs(b - expected_combo) / max(abs(expected_combo), 1e-300),
    }


def first_linearization(mesh, metric, spec, k, f, eps: float = 1e-3, disc=None) -> dict:
    """Directional derivative of the semilinear DtN at the branch level t_k.

    Centered finite differences of the nonlinear flux are compared with the
    linear DtN whose constant potential is t_k G'(t_k); both are boundary
    traces and the report carries their relative gap in the B norm.
    """
    solver = SemilinearSolver(mesh, metric, spec, disc)
    disc = solver.disc
    f = np.asarray(f, dtype=float)
    up = solver.solve(k, f, eps)
    dn = solver.solve(k, f, -eps)
    trace_fd = (solver.flux_trace(up) - solver.flux_trace(dn)) / (2.0 * eps)

    t_k = spec.zeros[k]
    if isinstance(spec, SeparableNonlinearity):
        mu = float(t_k * spec.g_prime(t_k))
    else:
        mu = 0.0  # d_s(V s^m) vanishes at the zero branch
    dtn = disc.dtn(None if mu == 0.0 else mu)
    trace_direct = dtn.apply(f)

    def bnorm(x):
        return float(np.sqrt(x @ (disc.boundary_mass @ x)))

    denom = max(bnorm(trace_direct), 1e-300)
    return {
        "trace": trace_direct,
        "trace_fd": trace_fd,
        "mu": mu,
        "rel_b_error": bnorm(trace_fd - trace_direct) / denom,
    }
