"""Steady two-dimensional grade-two fluid solver.

The model couples a generalized Stokes problem for the velocity/pressure
pair with a steady transport equation for the auxiliary vorticity
z = curl(u - alpha*lap u); the two are iterated to a fixed point.  Both
non-homogeneous inflow boundary-condition variants are supported: the flux
form (z u).n = h and the trace form z = h on the inflow portion of the
boundary.
"""

from .driver import (
    IterationReport,
    ProblemSpec,
    diagnostics,
    fixed_point_solve,
    navier_stokes_limit_study,
    uniqueness_probe,
)
from .errors import (
    BoundaryResolutionError,
    ContractionViolated,
    DegenerateInflow,
    FluxIncompatible,
    GradeTwoError,
    LinearSolveFailure,
    MaxIterations,
    MeshFormatError,
    MeshTopologyError,
    NotConverged,
)
from .manufactured import convergence_study, manufactured_case
from .meshes import (
    BoundaryPartition,
    Mesh,
    boundary_components,
    classify_boundary,
    flux_per_component,
    load_mesh,
    save_mesh,
    unit_square_mesh,
)
from .spaces import Field, SpaceDescriptor, Spaces, build_spaces, interpolate, norms
from .stokes import (
    SaddleSystem,
    assemble_generalized_stokes,
    solve_generalized_stokes,
    stokes_energy_report,
)
from .transport import (
    InflowDatum,
    build_inflow_datum,
    green_residual,
    sign_functional,
    sign_functional_report,
    solve_gradient_transport,
    solve_transport,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryPartition", "BoundaryResolutionError", "ContractionViolated",
    "DegenerateInflow", "Field", "FluxIncompatible", "GradeTwoError",
    "InflowDatum", "IterationReport", "LinearSolveFailure", "MaxIterations",
    "Mesh", "MeshFormatError", "MeshTopologyError", "NotConverged",
    "ProblemSpec", "SaddleSystem", "SpaceDescriptor", "Spaces",
    "assemble_generalized_stokes", "boundary_components", "build_inflow_datum",
    "build_spaces", "classify_boundary", "convergence_study", "diagnostics",
    "fixed_point_solve", "flux_per_component", "green_residual",
    "interpolate", "load_mesh", "manufactured_case",
    "navier_stokes_limit_study", "norms", "save_mesh", "sign_functional",
    "sign_functional_report", "solve_generalized_stokes",
    "solve_gradient_transport", "solve_transport", "stokes_energy_report",
    "uniqueness_probe", "unit_square_mesh",
]
