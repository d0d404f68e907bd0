"""Coupling loop between the generalized Stokes and transport solvers.

The constructive iteration alternates the two sub-solves starting from a
zero vorticity guess: given z_n, solve the generalized Stokes problem for
(u_n, p_n), feed the transport right-hand side  nu*curl(u_n) + alpha*curl(f)
and the inflow datum back into the transport solve, and under-relax.  On
convergence one more Stokes solve pairs the velocity and pressure with the
converged vorticity.

One solve pipeline is sequential; independent problem specs (continuation
points, probe starts) are safe to run concurrently since all shared
structures are read-only after setup.
"""

from __future__ import annotations

import dataclasses
import time
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import spaces as fes
from . import transport as trs
from .errors import DegenerateInflow, NotConverged
from .meshes import Mesh, classify_boundary, load_mesh
from .stokes import (
    check_flux_compatibility,
    default_flux_tol,
    solve_generalized_stokes,
    stokes_energy_report,
)

__all__ = [
    "ProblemSpec", "IterationReport", "DiagnosticsReport",
    "fixed_point_solve", "navier_stokes_limit_study", "uniqueness_probe",
    "diagnostics", "LimitStudyRow",
]

_ZERO_SCALAR = lambda x, y: 0.0  # noqa: E731
_ZERO_VECTOR = lambda x, y: (0.0, 0.0)  # noqa: E731


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one coupled solve.

    ``mesh`` may be a loaded :class:`Mesh` or a path to the native format.
    ``f`` and ``g`` are vector callables, ``h`` the scalar inflow datum.
    ``curl_f`` is optional; when absent, the curl of the quadratic
    interpolant of f is used (exact for quadratic f, O(h^2)-consistent
    otherwise).
    """

    mesh: Mesh
    nu: float
    alpha: float
    f: Callable = _ZERO_VECTOR
    g: Callable = _ZERO_VECTOR
    h: Callable = _ZERO_SCALAR
    curl_f: Optional[Callable] = None
    variant: str = "P_II"
    fp_tol: float = 1e-8
    max_iter: int = 200
    relaxation: float = 1.0
    flux_tol: Optional[float] = None
    eps_n: Optional[float] = None
    div_tol: Optional[float] = None
    strict: bool = True
    linear_solver: str = "direct"

    def __post_init__(self):
        if isinstance(self.mesh, str):
            object.__setattr__(self, "mesh", load_mesh(self.mesh))
        if not (self.nu > 0.0):
            raise ValueError("nu must be positive")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError("relaxation must lie in (0, 1]")
        if self.variant not in ("P_I", "P_II"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


@dataclass
class IterationReport:
    """Per-iteration history of the coupling loop."""

    dz_l2: list = dc_field(default_factory=list)
    z_l2: list = dc_field(default_factory=list)
    u_h1: list = dc_field(default_factory=list)
    p_l2: list = dc_field(default_factory=list)
    z_h1_broken: list = dc_field(default_factory=list)
    stopping_reason: str = "max_iter"
    wall_time: float = 0.0

    @property
    def iterations(self):
        return len(self.dz_l2)

    @property
    def converged(self):
        return self.stopping_reason == "converged"

    def contraction_ratios(self):
        d = self.dz_l2
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0.0]


class _Setup(NamedTuple):
    spaces: fes.Spaces
    part: object
    datum: trs.InflowDatum
    curlf: fes.Field
    flux_tol: float


def _prepare(spec):
    mesh = spec.mesh
    spaces_ = fes.build_spaces(mesh)
    part = classify_boundary(mesh, spec.g, spec.alpha, spec.eps_n)
    interior_bad = part.interior_degeneracies()
    if interior_bad:
        msg = ("normal boundary data vanishes strictly inside the inflow "
               f"boundary at vertices {list(interior_bad)}")
        if spec.variant == "P_II" and spec.strict:
            raise DegenerateInflow(msg + " (strict trace-variant mode)")
        warnings.warn(msg, stacklevel=3)
    flux_tol = spec.flux_tol
    if flux_tol is None:
        flux_tol = default_flux_tol(mesh, spec.g)
    check_flux_compatibility(mesh, spec.g, flux_tol)
    datum = trs.build_inflow_datum(
        mesh, spec.variant, spec.h, spec.g, part)
    if spec.curl_f is not None:
        curlf = fes.interpolate(spec.curl_f, spaces_.vorticity)
    else:
        f_interp = fes.interpolate(spec.f, spaces_.velocity)
        curlf = fes.curl_of_velocity(f_interp, spaces_.vorticity)
    return _Setup(spaces_, part, datum, curlf, flux_tol)


def fixed_point_solve(spec, initial_z=None, setup=None):
    """Run the coupled iteration; returns (u, p, z, report).

    The loop stops when ||z_{n+1} - z_n|| <= fp_tol * (||z_n|| + 1).  On
    failure (iteration cap, blow-up past 1e6 times the data scale, or a
    residual that stops contracting) the partial history is attached to the
    raised :class:`NotConverged`; data outside the smallness regime of the
    underlying fixed-point argument typically ends up there.
    """
    t0 = time.perf_counter()
    if setup is None:
        setup = _prepare(spec)
    spaces_, part, datum, curlf, flux_tol = setup
    vort = spaces_.vorticity
    if initial_z is None:
        z = vort.new_field()
    else:
        z = vort.new_field(np.asarray(initial_z.coefficients, dtype=float).copy())
    report = IterationReport()
    omega = spec.relaxation
    scale = None
    best_dz = np.inf
    u = p = None
    for _ in range(spec.max_iter):
        u, p = solve_generalized_stokes(
            spaces_, spec.nu, z, spec.f, spec.g,
            flux_tol=flux_tol, method=spec.linear_solver)
        curl_u = fes.curl_of_velocity(u, vort)
        rhs = vort.new_field(
            spec.nu * curl_u.coefficients + spec.alpha * curlf.coefficients)
        z_raw = trs.solve_transport(
            u, spec.nu, spec.alpha, rhs, datum, part, div_tol=spec.div_tol)
        z_new = vort.new_field(
            omega * z_raw.coefficients + (1.0 - omega) * z.coefficients)
        dz = fes.norms(vort.new_field(
            z_new.coefficients - z.coefficients)).l2
        zn = fes.norms(z_new)
        report.dz_l2.append(dz)
        report.z_l2.append(zn.l2)
        report.u_h1.append(fes.norms(u).h1_semi)
        report.p_l2.append(fes.norms(p).l2)
        report.z_h1_broken.append(zn.h1_semi)
        z_prev_norm = fes.norms(z).l2
        z = z_new
        if scale is None:
            scale = max(1.0, zn.l2, datum.max_abs())
        if dz <= spec.fp_tol * (z_prev_norm + 1.0):
            report.stopping_reason = "converged"
            break
        if zn.l2 > 1e6 * scale:
            report.stopping_reason = "diverged"
            break
        if (report.iterations > 3 and dz > 10.0 * best_dz
                and dz > 10.0 * spec.fp_tol * (z_prev_norm + 1.0)):
            report.stopping_reason = "diverged"
            break
        best_dz = min(best_dz, dz)
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        raise NotConverged(
            f"coupling loop stopped ({report.stopping_reason}) after "
            f"{report.iterations} iterations, last increment "
            f"{report.dz_l2[-1]:.3e}; the data may sit outside the "
            "small-data regime of the fixed-point argument",
            report=report)
    # pair (u, p) with the converged vorticity
    u, p = solve_generalized_stokes(
        spaces_, spec.nu, z, spec.f, spec.g,
        flux_tol=flux_tol, method=spec.linear_solver)
    report.wall_time = time.perf_counter() - t0
    return u, p, z, report


class LimitStudyRow(NamedTuple):
    alpha: float
    err_u_h1: float
    err_z_l2: float
    iterations: int
    failed: bool
    message: str


def navier_stokes_limit_study(spec, alphas):
    """Distance of the coupled solution to its alpha=0 limit.

    Solves the alpha=0 problem once as the reference (there z equals the
    curl of the velocity), then |u_a - u_0|_H1 and ||z_a - curl u_0||_L2
    for each alpha in the given (decreasing) list.  A failed alpha is
    marked and does not abort the remaining rows.
    """
    ref_spec = spec.replace(alpha=0.0)
    setup0 = _prepare(ref_spec)
    u0, _, z0, _ = fixed_point_solve(ref_spec, setup=setup0)
    vel = u0.space
    vort = z0.space
    rows = []
    for alpha in alphas:
        sub = spec.replace(alpha=float(alpha))
        try:
            if alpha == 0.0:
                ua, _, za, rep = fixed_point_solve(ref_spec, setup=setup0)
            else:
                ua, _, za, rep = fixed_point_solve(sub)
            du = vel.new_field(ua.coefficients - u0.coefficients)
            dz = vort.new_field(za.coefficients - z0.coefficients)
            rows.append(LimitStudyRow(
                alpha=float(alpha),
                err_u_h1=fes.norms(du).h1_semi,
                err_z_l2=fes.norms(dz).l2,
                iterations=rep.iterations,
                failed=False,
                message=""))
        except Exception as exc:  # failed rows are reported, not fatal
            rows.append(LimitStudyRow(
                alpha=float(alpha), err_u_h1=float("nan"),
                err_z_l2=float("nan"), iterations=0,
                failed=True, message=f"{type(exc).__name__}: {exc}"))
    return rows


def uniqueness_probe(spec, n_starts, seed, start_scale=1.0):
    """Empirical uniqueness check by multi-start iteration.

    Runs the coupling loop from ``n_starts`` random initial vorticity
    fields of magnitude ``start_scale`` and returns the maximum pairwise
    relative L2 distance between the converged solutions.  A genuinely
    unique fixed point in the contraction regime yields values at the
    stopping-tolerance level.
    """
    if n_starts < 2:
        raise ValueError("n_starts must be >= 2 to compare solutions")
    setup = _prepare(spec)
    vort = setup.spaces.vorticity
    rng = np.random.default_rng(seed)
    solutions = []
    for _ in range(n_starts):
        z0 = vort.new_field(
            start_scale * rng.standard_normal(vort.dof_count))
        _, _, z, _ = fixed_point_solve(spec, initial_z=z0, setup=setup)
        solutions.append(z)
    norm_scale = max(max(fes.norms(z).l2 for z in solutions), 1e-30)
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            d = vort.new_field(
                solutions[i].coefficients - solutions[j].coefficients)
            worst = max(worst, fes.norms(d).l2 / norm_scale)
    return worst


class DiagnosticsReport(NamedTuple):
    u_norms: fes.FieldNorms
    p_norms: fes.FieldNorms
    z_norms: fes.FieldNorms
    energy: object
    sign: trs.SignFunctionalReport
    green_residual: float
    beta: Optional[float]
    degenerate_points: tuple
    junctions: tuple


def diagnostics(u, p, z, spec, part):
    """Pure post-solve report: norms, energy balance, sign functional,
    Green-identity defect (with a fixed smooth test function), inflow
    speed reciprocal and degeneracy listing."""
    energy = stokes_energy_report(u, p, z, spec.f, spec.nu)
    sign = trs.sign_functional_report(z, u, spec.alpha)
    green = trs.green_residual(
        z, u, lambda x, y: x + y, part,
        phi_grad=lambda x, y: (1.0, 1.0), localized=False)
    return DiagnosticsReport(
        u_norms=fes.norms(u),
        p_norms=fes.norms(p),
        z_norms=fes.norms(z),
        energy=energy,
        sign=sign,
        green_residual=green,
        beta=part.beta,
        degenerate_points=part.degenerate_points,
        junctions=part.junctions,
    )
