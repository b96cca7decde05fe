"""Planar triangulations, the analytic metric catalog, and scalar fields.

The laboratory works on three domain shapes (unit square, disk, annulus)
triangulated with ordered boundary loops. Riemannian structure comes from an
analytic catalog of 2x2 SPD tensor fields, never from sampled data, so metric
derivatives (needed for geodesic tracing and SPD audits) are exact.

Conventions:
  * triangles are positively oriented (counterclockwise),
  * the outer boundary loop runs counterclockwise, hole loops clockwise,
  * boundary vertices are listed loop by loop, each vertex exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import Delaunay

from . import quadrature


class MeshError(ValueError):
    """Raised for malformed or out-of-contract mesh input."""


# ---------------------------------------------------------------------------
# Triangle meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable planar triangulation with ordered boundary loops.

    vertices: (nv, 2) float coordinates.
    triangles: (nt, 3) vertex indices, counterclockwise.
    boundary_loops: tuple of index arrays, one per closed boundary loop,
        outer loop first; the loop ordering follows the induced orientation.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        for loop in self.boundary_loops:
            loop.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.concatenate(self.boundary_loops)

    @property
    def boundary_edges(self) -> tuple:
        """Per loop, the (k, 2) array of consecutive vertex index pairs."""
        return tuple(
            np.column_stack([loop, np.roll(loop, -1)]) for loop in self.boundary_loops
        )

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.nonzero(mask)[0]

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def loop_signed_areas(self) -> np.ndarray:
        out = []
        for loop in self.boundary_loops:
            p = self.vertices[loop]
            q = np.roll(p, -1, axis=0)
            out.append(0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))
        return np.array(out)

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return np.linalg.norm(e, axis=-1).ravel()

    def validate(self) -> None:
        """Check the structural invariants; raise MeshError on violation."""
        areas = self.triangle_areas()
        if np.any(areas <= 0):
            raise MeshError("non-positive triangle orientation or degenerate triangle")
        counts = _edge_counts(self.triangles)
        if any(c > 2 for c in counts.values()):
            raise MeshError("non-manifold edge present")
        boundary = {e for e, c in counts.items() if c == 1}
        loop_edges = set()
        for loop in self.boundary_loops:
            for a, b in zip(loop, np.roll(loop, -1)):
                loop_edges.add((min(a, b), max(a, b)))
        if boundary != loop_edges:
            raise MeshError("boundary loops do not match edge incidence")
        bv = self.boundary_vertices
        if len(np.unique(bv)) != len(bv):
            raise MeshError("boundary vertex repeated across loops")
        # total signed loop area (outer CCW minus holes) equals the covered area
        if abs(self.loop_signed_areas().sum() - areas.sum()) > 1e-12 * max(
            1.0, areas.sum()
        ):
            raise MeshError("shoelace area does not match triangle area sum")


def _edge_counts(triangles: np.ndarray) -> dict:
    counts: dict = {}
    for a, b, c in triangles:
        for i, j in ((a, b), (b, c), (c, a)):
            key = (min(i, j), max(i, j))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _build_mesh(vertices: np.ndarray, triangles: np.ndarray, *, strict: bool) -> TriangleMesh:
    """Orient triangles, extract boundary loops and assemble the mesh.

    strict=True rejects mixed orientation (file input); strict=False flips
    negatively oriented triangles (generator output).
    """
    vertices = np.asarray(vertices, dtype=float)[:, :2].copy()
    triangles = np.asarray(triangles, dtype=np.int64).copy()
    p = vertices[triangles]
    areas = 0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    scale = max(1.0, float(np.abs(areas).max(initial=0.0)))
    if np.any(np.abs(areas) <= 1e-14 * scale):
        bad = int(np.argmin(np.abs(areas)))
        raise MeshError(f"degenerate (zero-area) triangle at index {bad}")
    if strict:
        if np.all(areas < 0):
            triangles = triangles[:, ::-1]
        elif np.any(areas < 0):
            bad = int(np.nonzero(areas < 0)[0][0])
            raise MeshError(f"inconsistent orientation (triangle {bad} is clockwise)")
    else:
        flip = areas < 0
        triangles[flip] = triangles[flip][:, ::-1]

    # Boundary edges keep the orientation induced by their unique triangle,
    # which makes the outer loop counterclockwise and holes clockwise.
    counts: dict = {}
    directed: dict = {}
    for t, (a, b, c) in enumerate(triangles):
        for i, j in ((a, b), (b, c), (c, a)):
            key = (min(i, j), max(i, j))
            counts[key] = counts.get(key, 0) + 1
            if counts[key] > 2:
                raise MeshError(f"non-manifold edge {key} shared by >2 faces")
            if counts[key] == 1:
                directed[key] = (int(i), int(j))
            else:
                if directed[key] == (int(i), int(j)):
                    raise MeshError(
                        f"inconsistent orientation at edge {key} (traversed twice the same way)"
                    )
    nxt: dict = {}
    for key, c in counts.items():
        if c == 1:
            i, j = directed[key]
            if i in nxt:
                raise MeshError(f"non-manifold boundary vertex {i}")
            nxt[i] = j
    loops = []
    seen: set = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen or cur not in nxt:
                raise MeshError("boundary walk failed to close a loop")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.array(loop, dtype=np.int64))
    if not loops:
        raise MeshError("mesh has empty boundary")

    def loop_area(loop):
        q = vertices[loop]
        r = np.roll(q, -1, axis=0)
        return 0.5 * np.sum(q[:, 0] * r[:, 1] - r[:, 0] * q[:, 1])

    loops.sort(key=lambda lp: (-abs(loop_area(lp)), int(lp.min())))
    mesh = TriangleMesh(vertices, triangles, tuple(loops))
    mesh.validate()
    return mesh


def generate_mesh(
    shape: str,
    h: float,
    *,
    side: float = 1.0,
    radius: float = 1.0,
    r_inner: float = 0.5,
    r_outer: float = 1.0,
) -> TriangleMesh:
    """Generate a triangulation of the named shape with target edge length h.

    Shapes: "square" (side x side, corner at origin), "disk" (centered at the
    origin) and "annulus". Produced meshes satisfy max edge length <= 1.5 h.
    """
    if shape == "square":
        diameter = side * np.sqrt(2.0)
    elif shape == "disk":
        diameter = 2.0 * radius
    elif shape == "annulus":
        diameter = 2.0 * r_outer
    else:
        raise MeshError(f"unknown shape '{shape}'")
    if not 0.0 < h < 0.5 * diameter:
        raise MeshError(f"resolution h={h} outside (0, {0.5 * diameter})")

    if shape == "square":
        n = int(np.ceil(side / h))
        ax = np.linspace(0.0, side, n + 1)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        verts = np.column_stack([X.ravel(), Y.ravel()])
        idx = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
        a = idx[:-1, :-1].ravel()
        b = idx[1:, :-1].ravel()
        c = idx[1:, 1:].ravel()
        d = idx[:-1, 1:].ravel()
        tris = np.concatenate(
            [np.column_stack([a, b, c]), np.column_stack([a, c, d])]
        )
        return _build_mesh(verts, tris, strict=False)

    if shape == "disk":
        points = _ring_points(0.0, radius, h)
        tri = Delaunay(points)
        return _build_mesh(points, tri.simplices, strict=False)

    # annulus
    if r_inner <= 0 or r_inner >= r_outer:
        raise MeshError(f"invalid annulus radii ({r_inner}, {r_outer})")
    m = int(np.ceil((r_outer - r_inner) / h))
    dr = (r_outer - r_inner) / m
    n_hole = int(round(2.0 * np.pi * r_inner / dr))
    if m < 2 or n_hole < 8:
        raise MeshError(
            f"resolution h={h} too coarse to resolve the annulus hole "
            f"(radii {r_inner}/{r_outer})"
        )
    points = _ring_points(r_inner, r_outer, h)
    n_inner = int(round(2.0 * np.pi * r_inner / dr))
    tri = Delaunay(points)
    # Triangles whose three vertices all sit on the inner circle fill the hole.
    inner = tri.simplices < n_inner
    keep = ~np.all(inner, axis=1)
    return _build_mesh(points, tri.simplices[keep], strict=False)


def _ring_points(r0: float, r1: float, h: float) -> np.ndarray:
    """Concentric rings of points from radius r0 to r1 at spacing <= h."""
    m = int(np.ceil((r1 - r0) / h))
    dr = (r1 - r0) / m
    rings = []
    for j in range(m + 1):
        r = r0 + j * dr
        if r < 0.5 * dr:
            rings.append(np.zeros((1, 2)))
            continue
        n = max(6, int(round(2.0 * np.pi * r / dr)))
        # stagger alternate rings half a step to avoid aligned slivers
        theta = 2.0 * np.pi * (np.arange(n) + 0.5 * (j % 2)) / n
        rings.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    return np.concatenate(rings)


# ---------------------------------------------------------------------------
# OFF input
# ---------------------------------------------------------------------------


def load_mesh(data) -> TriangleMesh:
    """Parse an ASCII OFF mesh (triangles only) and extract boundary loops.

    Accepts str or bytes. The optional z coordinate is ignored. Non-triangle
    faces, non-manifold edges and inconsistent orientation are rejected.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    tokens: list = []
    for line in data.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise MeshError("missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # vertex count, face count, edge count (ignored)
        verts = np.array(
            [[float(tokens[pos + 3 * i + k]) for k in range(3)] for i in range(nv)]
        )
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            arity = int(tokens[pos])
            if arity != 3:
                raise MeshError(f"non-triangular face (arity {arity})")
            faces.append([int(tokens[pos + 1]), int(tokens[pos + 2]), int(tokens[pos + 3])])
            pos += 4
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed OFF data: {exc}") from exc
    tris = np.array(faces, dtype=np.int64)
    if tris.min(initial=0) < 0 or tris.max(initial=0) >= nv:
        raise MeshError("face references a vertex out of range")
    return _build_mesh(verts[:, :2], tris, strict=True)


# ---------------------------------------------------------------------------
# Metric catalog
# ---------------------------------------------------------------------------


class MetricField:
    """Analytic 2x2 SPD tensor field g(x) with exact first derivatives.

    tensor(points) returns (n, 2, 2); tensor_derivative(points) returns
    (n, 2, 2, 2) indexed [point, l, i, j] = d g_ij / d x_l.
    """

    def __init__(self, kind: str, params: dict, tensor_fn, deriv_fn, spec_id: str):
        self.kind = kind
        self.params = dict(params)
        self._tensor = tensor_fn
        self._deriv = deriv_fn
        self.spec_id = spec_id

    def __repr__(self):
        return f"MetricField({self.spec_id})"

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean"

    def tensor(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._tensor(points)

    def tensor_derivative(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._deriv(points)

    def inverse(self, points: np.ndarray) -> np.ndarray:
        g = self.tensor(points)
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
        inv = np.empty_like(g)
        inv[:, 0, 0] = g[:, 1, 1]
        inv[:, 1, 1] = g[:, 0, 0]
        inv[:, 0, 1] = -g[:, 0, 1]
        inv[:, 1, 0] = -g[:, 1, 0]
        return inv / det[:, None, None]

    def sqrt_det(self, points: np.ndarray) -> np.ndarray:
        g = self.tensor(points)
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
        return np.sqrt(det)

    def min_eigenvalue(self, points: np.ndarray) -> np.ndarray:
        g = self.tensor(points)
        tr = g[:, 0, 0] + g[:, 1, 1]
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
        disc = np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
        return 0.5 * tr - disc


def _euclidean_metric() -> MetricField:
    def tensor(p):
        g = np.zeros((len(p), 2, 2))
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = 1.0
        return g

    def deriv(p):
        return np.zeros((len(p), 2, 2, 2))

    return MetricField("euclidean", {}, tensor, deriv, "euclidean")


def _diagonal_metric(d1: float, d2: float) -> MetricField:
    if d1 <= 0 or d2 <= 0:
        raise ValueError(f"diagonal metric entries must be positive, got ({d1}, {d2})")

    def tensor(p):
        g = np.zeros((len(p), 2, 2))
        g[:, 0, 0] = d1
        g[:, 1, 1] = d2
        return g

    def deriv(p):
        return np.zeros((len(p), 2, 2, 2))

    return MetricField("diagonal", {"d1": d1, "d2": d2}, tensor, deriv, f"diagonal(d1={d1},d2={d2})")


def _conformal_metric(amplitude: float, width: float, cx: float, cy: float) -> MetricField:
    # c(x) = 1 + amplitude * exp(-|x - center|^2 / width^2), positive for amplitude > -1
    if amplitude <= -0.95:
        raise ValueError(f"conformal amplitude {amplitude} not bounded below by a positive constant")
    if width <= 0.05:
        raise ValueError(f"conformal width {width} below documented range")

    def factor(p):
        dx = p[:, 0] - cx
        dy = p[:, 1] - cy
        return 1.0 + amplitude * np.exp(-(dx * dx + dy * dy) / width**2)

    def factor_grad(p):
        dx = p[:, 0] - cx
        dy = p[:, 1] - cy
        e = amplitude * np.exp(-(dx * dx + dy * dy) / width**2)
        return np.stack([-2.0 * dx * e / width**2, -2.0 * dy * e / width**2], axis=1)

    def tensor(p):
        c = factor(p)
        g = np.zeros((len(p), 2, 2))
        g[:, 0, 0] = c
        g[:, 1, 1] = c
        return g

    def deriv(p):
        gc = factor_grad(p)
        d = np.zeros((len(p), 2, 2, 2))
        d[:, 0, 0, 0] = gc[:, 0]
        d[:, 0, 1, 1] = gc[:, 0]
        d[:, 1, 0, 0] = gc[:, 1]
        d[:, 1, 1, 1] = gc[:, 1]
        return d

    m = MetricField(
        "conformal",
        {"amplitude": amplitude, "width": width, "cx": cx, "cy": cy},
        tensor,
        deriv,
        f"conformal(a={amplitude},w={width},c=({cx},{cy}))",
    )
    m.conformal_factor = factor  # scalar c(x), used by volume quadratures
    m.conformal_factor_gradient = factor_grad
    return m


def _revolution_metric(f0: float, r0: float, a: float) -> MetricField:
    """Surface-of-revolution metric dr^2 + f(r)^2 dtheta^2, f(r) = f0 + a (r - r0)^2.

    Expressed in the plane's Cartesian chart; undefined at the origin, used on
    annuli. Circles of radius r have metric length 2 pi f(r); r = r0 is a
    closed geodesic when f'(r0) = 0 (the waist).
    """
    if f0 <= 0:
        raise ValueError(f"revolution profile base {f0} must be positive")

    def prof(r):
        return f0 + a * (r - r0) ** 2

    def prof_d(r):
        return 2.0 * a * (r - r0)

    def tensor(p):
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        f = prof(r)
        big = f * f / (r2 * r2)  # coefficient of dtheta (x) dtheta in Cartesian form
        g = np.empty((len(p), 2, 2))
        g[:, 0, 0] = x * x / r2 + big * y * y
        g[:, 1, 1] = y * y / r2 + big * x * x
        g[:, 0, 1] = x * y / r2 - big * x * y
        g[:, 1, 0] = g[:, 0, 1]
        return g

    def deriv(p):
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        f = prof(r)
        fd = prof_d(r)
        big = f * f / (r2 * r2)
        # d(big)/dr and chain rule with dr/dx = x/r, dr/dy = y/r
        big_r = (2.0 * f * fd * r2 * r2 - f * f * 4.0 * r2 * r) / (r2**4)
        d = np.empty((len(p), 2, 2, 2))
        for axis, coord in ((0, x), (1, y)):
            dr = coord / r
            # partials of x/r^2-type rational terms
            if axis == 0:
                d_xx_base = 2.0 * x / r2 - 2.0 * x * x * x / r2**2   # d/dx (x^2/r^2)
                d_yy_base = -2.0 * x * y * y / r2**2                 # d/dx (y^2/r^2)
                d_xy_base = y / r2 - 2.0 * x * x * y / r2**2         # d/dx (xy/r^2)
                d_y2 = 0.0 * y                                       # d/dx (y^2) = 0
                d_x2 = 2.0 * x
                d_xy = y
            else:
                d_xx_base = -2.0 * y * x * x / r2**2                 # d/dy (x^2/r^2)
                d_yy_base = 2.0 * y / r2 - 2.0 * y * y * y / r2**2   # d/dy (y^2/r^2)
                d_xy_base = x / r2 - 2.0 * x * y * y / r2**2         # d/dy (xy/r^2)
                d_y2 = 2.0 * y
                d_x2 = 0.0 * x
                d_xy = x
            big_ax = big_r * dr
            d[:, axis, 0, 0] = d_xx_base + big_ax * y * y + big * d_y2
            d[:, axis, 1, 1] = d_yy_base + big_ax * x * x + big * d_x2
            d[:, axis, 0, 1] = d_xy_base - big_ax * x * y - big * d_xy
            d[:, axis, 1, 0] = d[:, axis, 0, 1]
        return d

    m = MetricField(
        "revolution",
        {"f0": f0, "r0": r0, "a": a},
        tensor,
        deriv,
        f"revolution(f0={f0},r0={r0},a={a})",
    )
    m.profile = prof
    m.profile_derivative = prof_d
    return m


METRIC_CATALOG: dict = {
    "euclidean": _euclidean_metric,
    "diagonal": _diagonal_metric,
    "conformal": _conformal_metric,
    "revolution": _revolution_metric,
}

_METRIC_DEFAULTS: dict = {
    "euclidean": {},
    "diagonal": {"d1": 1.0, "d2": 1.2},
    "conformal": {"amplitude": 0.1, "width": 1.0, "cx": 0.0, "cy": 0.0},
    "revolution": {"f0": 1.0, "r0": 0.75, "a": 1.0},
}


def make_metric(kind: str, **params) -> MetricField:
    """Instantiate a catalog metric by key, filling documented defaults."""
    if kind not in METRIC_CATALOG:
        raise KeyError(f"unknown metric catalog key '{kind}'")
    full = dict(_METRIC_DEFAULTS[kind])
    for k, v in params.items():
        if k not in full:
            raise KeyError(f"unknown parameter '{k}' for metric '{kind}'")
        full[k] = v
    return METRIC_CATALOG[kind](**full)


def evaluate_metric(kind: str, mesh: TriangleMesh, **params) -> MetricField:
    """Build a catalog metric and verify SPD on the mesh sample points.

    Sample points are all vertices plus the triangle quadrature points;
    the first SPD violation is reported with its coordinates.
    """
    metric = make_metric(kind, **params)
    qpts = quadrature.triangle_points(mesh.vertices, mesh.triangles).reshape(-1, 2)
    samples = np.concatenate([mesh.vertices, qpts])
    lam = metric.min_eigenvalue(samples)
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        bad = int(np.argmin(np.where(np.isfinite(lam), lam, -np.inf)))
        x, y = samples[bad]
        raise ValueError(
            f"metric '{metric.spec_id}' not SPD at point ({x:.6g}, {y:.6g})"
        )
    return metric


def metric_derivative_fd_error(metric: MetricField, points: np.ndarray, h: float = 1e-3) -> float:
    """Max mismatch between analytic metric derivatives and 4th-order central FD."""
    points = np.atleast_2d(points)
    worst = 0.0
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        fd = (
            -metric.tensor(points + 2 * step)
            + 8 * metric.tensor(points + step)
            - 8 * metric.tensor(points - step)
            + metric.tensor(points - 2 * step)
        ) / (12 * h)
        worst = max(worst, float(np.abs(fd - metric.tensor_derivative(points)[:, axis]).max()))
    return worst


# ---------------------------------------------------------------------------
# Scalar fields on meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialField:
    """Nodal (P1) real scalar field, the zeroth-order operator coefficient."""

    values: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("potential field contains non-finite entries")
        object.__setattr__(self, "values", values)
        self.values.setflags(write=False)

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    @staticmethod
    def zero(mesh: TriangleMesh) -> "PotentialField":
        return PotentialField(np.zeros(mesh.n_vertices), "zero")

    @staticmethod
    def constant(mesh: TriangleMesh, value: float) -> "PotentialField":
        return PotentialField(np.full(mesh.n_vertices, float(value)), f"const({value})")

    @staticmethod
    def from_function(mesh: TriangleMesh, fn: Callable, label: str = "custom") -> "PotentialField":
        return PotentialField(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]), label)


def potential_values(V, n_vertices: int) -> np.ndarray:
    """Normalize a potential argument (None, PotentialField, scalar, array)."""
    if V is None:
        return np.zeros(n_vertices)
    if isinstance(V, PotentialField):
        return V.values
    if np.isscalar(V):
        return np.full(n_vertices, float(V))
    arr = np.asarray(V, dtype=float)
    if arr.shape != (n_vertices,):
        raise ValueError(f"potential shape {arr.shape} != ({n_vertices},)")
    return arr


def potential_label(V) -> str:
    if V is None:
        return "zero"
    if isinstance(V, PotentialField):
        return V.label
    if np.isscalar(V):
        return f"const({V})"
    return "array"


def boundary_trace(mesh: TriangleMesh, fn_or_values) -> np.ndarray:
    """Boundary data ordered like mesh.boundary_vertices."""
    bidx = mesh.boundary_vertices
    if callable(fn_or_values):
        pts = mesh.vertices[bidx]
        return np.asarray(fn_or_values(pts[:, 0], pts[:, 1]), dtype=float)
    arr = np.asarray(fn_or_values)
    if np.isscalar(fn_or_values) or arr.ndim == 0:
        return np.full(len(bidx), float(fn_or_values))
    if arr.shape != (len(bidx),):
        raise ValueError(f"trace length {arr.shape} != ({len(bidx)},)")
    return arr.astype(float)
