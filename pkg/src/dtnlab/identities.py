"""Computable identities behind the conformal reduction and small-potential rigidity.

Two kinds of checks live here. A finite-difference lab on structured grids
verifies, in dimensions 2 and 3, that the conformal rescaling of the
Laplace-Beltrami operator equals a Schrodinger operator with the induced
potential. On meshes, the rigidity machinery splits the f = 1 solution of
(-Delta_g + V) u = 0 into 1 + udot + r, re-derives the energy identity for
|grad udot|^2, and measures the elliptic-estimate constant on seeded random
potential ensembles. Mesh-side checks are exact at the Galerkin level because
fluxes are variational.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .elliptic import Discretization
from .geometry import PotentialField, TriangleMesh, potential_values


# ---------------------------------------------------------------------------
# Finite-difference lab (structured grids, n in {2, 3})
# ---------------------------------------------------------------------------

_STENCIL_HALF = 2  # 4th-order central first derivative


@dataclass(frozen=True)
class GridField:
    """Nodal samples of analytic fields on a uniform box grid."""

    dimension: int
    spacing: float
    values: dict
    margin: int

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.margin < 2 * _STENCIL_HALF:
            raise ValueError("interior margin smaller than two stencil half-widths")
        for name, arr in self.values.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"field '{name}' has non-finite samples")


def _axes(n: int, num: int, bounds=(-1.0, 1.0)):
    ax = np.linspace(bounds[0], bounds[1], num)
    grids = np.meshgrid(*([ax] * n), indexing="ij")
    return grids, ax[1] - ax[0]


def _d4(arr: np.ndarray, h: float, axis: int) -> np.ndarray:
    """4th-order central first derivative; edge bands become NaN."""
    out = np.full_like(arr, np.nan)
    sl = [slice(None)] * arr.ndim

    def shifted(k):
        s = list(sl)
        s[axis] = slice(2 + k, arr.shape[axis] - 2 + k)
        return arr[tuple(s)]

    core = (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * h)
    s = list(sl)
    s[axis] = slice(2, -2)
    out[tuple(s)] = core
    return out


def _laplace_beltrami_fd(u, g_diag, h):
    """Divergence-form Laplacian for a diagonal metric, two nested 4th-order FDs."""
    sq = np.sqrt(np.prod(np.stack(g_diag), axis=0))
    acc = np.zeros_like(u)
    for axis, gjj in enumerate(g_diag):
        flux = sq / gjj * _d4(u, h, axis)
        acc = acc + _d4(flux, h, axis)
    return acc / sq


def _crop(arr: np.ndarray, margin: int) -> np.ndarray:
    sl = tuple(slice(margin, -margin) for _ in range(arr.ndim))
    return arr[sl]


def conformal_potential_residual(
    n: int,
    c_fn: Callable,
    u_fn: Callable,
    g_fns: Sequence[Callable] | None = None,
    *,
    num: int = 33,
    bounds=(-1.0, 1.0),
) -> dict:
    """Residual of the conformal-to-Schrodinger operator identity on a grid.

    Checks -Delta_{c g} u = c^{-(n+2)/4} (-Delta_g + V)(c^{(n-2)/4} u) with
    V = c^{-(n-2)/4} Delta_g(c^{(n-2)/4}), all Laplacians evaluated by nested
    4th-order finite differences, max-residual over the margin-4 interior.
    """
    if n not in (2, 3):
        raise ValueError(f"dimension {n} outside the grid-lab contract {{2, 3}}")
    grids, h = _axes(n, num, bounds)
    c = c_fn(*grids)
    if np.any(c <= 0):
        raise ValueError("conformal factor must be positive on the grid")
    u = u_fn(*grids)
    ones = np.ones_like(c)
    g_diag = [fn(*grids) for fn in g_fns] if g_fns else [ones.copy() for _ in range(n)]

    expo = (n - 2) / 4.0
    w = c**expo
    v_pot = _laplace_beltrami_fd(w, g_diag, h) / w

    cg_diag = [c * gjj for gjj in g_diag]
    lhs = -_laplace_beltrami_fd(u, cg_diag, h)
    wu = w * u
    rhs = c ** (-(n + 2) / 4.0) * (-_laplace_beltrami_fd(wu, g_diag, h) + v_pot * wu)

    margin = 2 * _STENCIL_HALF
    res = np.abs(_crop(lhs - rhs, margin))
    v_crop = np.abs(_crop(v_pot, _STENCIL_HALF))
    GridField(n, h, {"c": c, "u": u}, margin)  # invariant audit of the lab inputs
    return {
        "residual": float(res.max()),
        "v_sup": float(v_crop.max()),
        "spacing": float(h),
    }


def conformal_residual_orders(n, c_fn, u_fn, g_fns=None, nums=(17, 25, 33)) -> dict:
    """Observed convergence orders of the residual over grid refinements."""
    reports = [
        conformal_potential_residual(n, c_fn, u_fn, g_fns, num=num) for num in nums
    ]
    res = np.array([r["residual"] for r in reports])
    hs = np.array([r["spacing"] for r in reports])
    orders = np.log(res[:-1] / res[1:]) / np.log(hs[:-1] / hs[1:])
    return {"residuals": res, "spacings": hs, "orders": orders}


# ---------------------------------------------------------------------------
# Integration-by-parts chain on the disk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """Radial profile w(r) > 0 with analytic derivatives; w'(1) = 0 entries
    realize the zero-Neumann-trace hypothesis exactly on the unit disk."""

    w: Callable
    dw: Callable
    ddw: Callable
    label: str


RADIAL_CATALOG = {
    "constant": RadialProfile(
        lambda r: np.ones_like(r), lambda r: np.zeros_like(r), lambda r: np.zeros_like(r), "constant"
    ),
    # w = 2 - r^2 + r^4/2, w'(r) = 2 r (r^2 - 1) vanishes at r = 1
    "neumann_quartic": RadialProfile(
        lambda r: 2.0 - r**2 + 0.5 * r**4,
        lambda r: -2.0 * r + 2.0 * r**3,
        lambda r: -2.0 + 6.0 * r**2,
        "neumann_quartic",
    ),
}


def ibp_chain_check(mesh: TriangleMesh, metric, profile: RadialProfile) -> dict:
    """Quadratures of the three integrals in the chain
    int Delta w / w = -int <grad w, grad w^{-1}> = int w^{-2} <grad w, grad w>.

    All three integrands are conformally invariant in 2D, so flat formulas
    cover the euclidean and conformal catalog entries. Pairwise gaps between
    the first and the others carry the polygonal-boundary O(h^2) error; the
    last two agree to roundoff.
    """
    if metric.kind not in ("euclidean", "conformal"):
        raise ValueError(
            f"ibp chain supports euclidean/conformal metrics, got '{metric.kind}'"
        )
    from .assembly import FemCache

    fem = FemCache(mesh, metric)
    pts = fem.qpoints.reshape(-1, 2)
    r = np.linalg.norm(pts, axis=1)
    w = profile.w(r)
    if np.any(w <= 0):
        raise ValueError(f"radial profile '{profile.label}' not positive on the mesh")
    dw = profile.dw(r)
    lap = profile.ddw(r) + np.divide(dw, r, out=np.zeros_like(r), where=r > 1e-14)

    weights = (fem.area[:, None] * fem.qweights[None, :]).ravel()  # flat element
    lhs_a = float(np.sum(weights * lap / w))
    # grad w = w'(r) rhat and grad(1/w) = -w^{-2} grad w, paired explicitly
    lhs_b = float(np.sum(weights * (-(dw) * (-dw / w**2))))
    lhs_c = float(np.sum(weights * (dw / w) ** 2))
    return {
        "lhs_a": lhs_a,
        "lhs_b": lhs_b,
        "lhs_c": lhs_c,
        "gap_ab": lhs_a - lhs_b,
        "gap_bc": lhs_b - lhs_c,
        "max_grad": float(np.abs(dw).max()),
    }


# ---------------------------------------------------------------------------
# Small-potential rigidity machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RigiditySplit:
    """Solution split u = 1 + udot + r for boundary data f = 1."""

    u: np.ndarray
    udot: np.ndarray
    remainder: np.ndarray
    residuals: dict

    def reconstruction_gap(self) -> float:
        comp = 1.0 + self.udot + self.remainder
        return float(np.abs(comp - self.u).max() / max(1.0, np.abs(self.u).max()))


def rigidity_split(mesh, metric, V, disc: Discretization | None = None) -> RigiditySplit:
    """Solve the defining problems of udot and r, and the direct problem, for
    a potential with sup norm below the smallness threshold."""
    disc = disc or Discretization(mesh, metric)
    vvals = potential_values(V, mesh.n_vertices)
    delta = disc.smallness_threshold
    if np.abs(vvals).max(initial=0.0) > delta * (1 + 1e-12):
        raise ValueError(
            f"potential sup norm {np.abs(vvals).max():.3g} exceeds the smallness "
            f"threshold {delta:.3g}"
        )
    iidx = disc.iidx
    K = disc.stiffness
    M_V = disc.potential_mass(vvals)
    b_V = disc.potential_load(vvals)

    K_lu = disc.interior_factor(K)
    udot = np.zeros(mesh.n_vertices)
    udot[iidx] = K_lu.solve(-b_V[iidx])

    A = K + M_V
    A_lu = disc.interior_factor(A)
    rem = np.zeros(mesh.n_vertices)
    rem[iidx] = A_lu.solve(-(M_V @ udot)[iidx])

    ones = np.ones(len(disc.bidx))
    u = disc.solve_dirichlet(vvals, ones)

    scale = max(1.0, float(np.abs(b_V).max()))
    residuals = {
        "udot": float(np.abs((K @ udot + b_V)[iidx]).max() / scale),
        "remainder": float(np.abs((A @ rem + M_V @ udot)[iidx]).max() / scale),
        "direct": disc.dirichlet_residual(vvals, u),
    }
    return RigiditySplit(u=u, udot=udot, remainder=rem, residuals=residuals)


def rigidity_identity_check(split: RigiditySplit, V, disc: Discretization) -> dict:
    """Energy identity report for the f = 1 boundary experiment.

    lhs = int |grad udot|^2, rhs = int V udot r + int V udot^2. At the
    Galerkin level lhs - rhs = int V dV_g - <1, Lambda_V 1>, and that chain
    residual is reported together with the Poincare/contraction bounds.
    """
    vvals = potential_values(V, disc.mesh.n_vertices)
    K = disc.stiffness
    M_V = disc.potential_mass(vvals)
    udot, rem = split.udot, split.remainder
    lhs = float(udot @ (K @ udot))
    cross = float(udot @ (M_V @ rem))
    square = float(udot @ (M_V @ udot))
    rhs = cross + square
    mean_v = mean_zero(disc.mesh, disc.metric, vvals, disc=disc)
    dtn = disc.dtn(vvals)
    ones = np.ones(dtn.dimension)
    boundary_term = float(dtn.pairing(ones, ones))
    gap = lhs - rhs
    udot_l2 = disc.l2_norm(udot)
    return {
        "identity": "rigidity_energy",
        "lhs": lhs,
        "rhs": rhs,
        "gap": gap,
        "boundary_term": boundary_term,
        "potential_mean": mean_v,
        "chain_residual": gap - (mean_v - boundary_term),
        "udot_l2": udot_l2,
        "square_term": square,
        "cross_term": cross,
        "poincare_lower": disc.poincare_constant * udot_l2**2,
        "delta": disc.smallness_threshold,
    }


def estimate_remainder_constant(
    mesh,
    metric,
    *,
    n_samples: int = 32,
    seed: int = 0,
    disc: Discretization | None = None,
) -> dict:
    """Measured constant C in ||r||_{H^1} <= C delta ||udot||_{L^2} over a
    seeded ensemble of smooth potentials at the smallness threshold."""
    disc = disc or Discretization(mesh, metric)
    delta = disc.smallness_threshold
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        V = random_smooth_potential(mesh, rng, sup=delta)
        split = rigidity_split(mesh, metric, V, disc=disc)
        denom = delta * disc.l2_norm(split.udot)
        if denom > 1e-14:
            ratios.append(disc.h1_norm(split.remainder) / denom)
    ratios = np.array(ratios)
    return {"constant": float(ratios.max()), "ratios": ratios, "delta": delta}


def mean_zero(mesh, metric, V, disc: Discretization | None = None) -> float:
    """Quadrature of int_M V dV_g with V interpolated in P1."""
    disc = disc or Discretization(mesh, metric)
    return float(disc.potential_load(V).sum())


def random_smooth_potential(mesh: TriangleMesh, rng, sup: float) -> PotentialField:
    """Random plane-wave combination scaled to the requested sup norm."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    vals = np.zeros(mesh.n_vertices)
    for _ in range(4):
        k = rng.uniform(0.5, 4.0, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.2, 1.0)
        vals += amp * np.cos(k[0] * x + k[1] * y + phase)
    peak = np.abs(vals).max()
    if peak < 1e-12:
        vals[:] = 1.0
        peak = 1.0
    return PotentialField(vals * (0.99 * sup / peak), "random_wave")
