"""Desk-scale laboratory for Dirichlet-to-Neumann maps on triangulated surfaces."""

__version__ = "0.1.0"

from .geometry import (
    MeshError,
    MetricField,
    PotentialField,
    TriangleMesh,
    boundary_trace,
    evaluate_metric,
    generate_mesh,
    load_mesh,
    make_metric,
)
from .assembly import (
    SparseOperator,
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
)
from .elliptic import (
    Discretization,
    DtNMatrix,
    EigenSystem,
    SingularOperatorError,
    dirichlet_eigensystem,
    dtn_matrix,
    poincare_constant,
    resolvent_dtn,
    solve_dirichlet,
)

__all__ = [
    "MeshError",
    "MetricField",
    "PotentialField",
    "TriangleMesh",
    "boundary_trace",
    "evaluate_metric",
    "generate_mesh",
    "load_mesh",
    "make_metric",
    "SparseOperator",
    "assemble_boundary_mass",
    "assemble_mass",
    "assemble_stiffness",
    "Discretization",
    "DtNMatrix",
    "EigenSystem",
    "SingularOperatorError",
    "dirichlet_eigensystem",
    "dtn_matrix",
    "poincare_constant",
    "resolvent_dtn",
    "solve_dirichlet",
]
