"""Exception types shared across the solver stack."""


class GradeTwoError(Exception):
    """Base class for all solver errors."""


class MeshFormatError(GradeTwoError):
    """Raised when a mesh file cannot be parsed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshTopologyError(GradeTwoError):
    """Raised when a parsed mesh violates a topological invariant."""


class BoundaryResolutionError(GradeTwoError):
    """Raised when the inflow/outflow partition cannot be resolved on the
    given mesh (the sign of the normal boundary data flips strictly inside
    a single boundary edge)."""


class FluxIncompatible(GradeTwoError):
    """Boundary velocity data carries nonzero net flux through a boundary
    component, so no divergence-free extension exists."""

    def __init__(self, component, flux, tol):
        self.component = component
        self.flux = flux
        self.tol = tol
        super().__init__(
            f"boundary component {component} has net flux {flux:.6e} "
            f"(tolerance {tol:.3e}); the prescribed velocity admits no "
            "divergence-free extension"
        )


class DegenerateInflow(GradeTwoError):
    """Flux-form inflow data cannot be converted to a trace value because
    the normal velocity degenerates somewhere strictly inside the inflow
    boundary."""


class LinearSolveFailure(GradeTwoError):
    """A sparse linear solve returned a non-finite or rank-deficient result."""


class NotConverged(GradeTwoError):
    """The coupling iteration stopped without meeting its tolerance."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ContractionViolated(GradeTwoError):
    """The gradient-transport iteration was asked to run outside its
    contraction regime (velocity gradient too large for the given weight)."""


class MaxIterations(GradeTwoError):
    """An inner fixed-point loop hit its iteration cap."""
