"""Generalized Stokes solver: viscous block plus skew vorticity coupling.

The weak problem reads: find (u, p) with u = g on the boundary such that

    nu*(grad u, grad v) + (z x u, v) - (p, div v) = (f, v)
    -(q, div u) = 0

for all test functions (v, q), where z is a given scalar coefficient field
and ``z x u = (-z*u2, z*u1)``.  The zero-mean pressure constraint is carried
by a single scalar multiplier, which also absorbs the (quadrature-level)
net flux of the interpolated boundary data, so the bordered system is
square and uniquely solvable.  Dirichlet values are eliminated
symmetrically; the default linear solver is a sparse direct factorization.

Assembly and solves are pure functions of their inputs; distinct systems
may be built and solved concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import spaces as fes
from .errors import FluxIncompatible, LinearSolveFailure
from .meshes import flux_per_component

__all__ = [
    "SaddleSystem", "StokesEnergyReport",
    "assemble_generalized_stokes", "solve_generalized_stokes",
    "stokes_energy_report", "default_flux_tol",
]


@dataclass
class SaddleSystem:
    """Assembled blocks of the generalized Stokes problem.

    ``A`` is the (nu-scaled) vector Laplacian, ``C`` the skew coupling from
    the vorticity coefficient, ``B`` the pressure/divergence block with
    entries -(q, div v), and ``mean_vec`` the pressure integrals backing the
    zero-mean multiplier.  ``dirichlet_nodes`` lists constrained velocity
    dofs in ascending order.
    """

    A: sp.csr_matrix
    C: sp.csr_matrix
    B: sp.csr_matrix
    mean_vec: np.ndarray
    dirichlet_nodes: np.ndarray
    spaces: fes.Spaces

    def operator(self):
        return self.A + self.C


class StokesEnergyReport(NamedTuple):
    viscous: float        # nu * |u|_H1^2
    forcing: float        # (f, u)
    skew: float           # (z x u, u), zero up to round-off by structure
    balance_gap: float    # |viscous - forcing| (meaningful for g = 0)
    div_weak_l2: float    # L2 norm of the pressure-space projection of div u
    div_broken_l2: float  # pointwise L2 norm of div u (consistency level)


def _scalar_matrices(ctx, zvals=None):
    """Cell-wise P2 stiffness and (optionally z-weighted) P2 mass.

    Returns COO triplets over the scalar node layout.
    """
    nt = ctx.mesh.num_triangles
    w = ctx.cell_qweights  # (nt, nq)
    G = ctx.p2_grad_at_q   # (nt, 6, nq, 2)
    V = ctx.p2_at_q        # (6, nq)
    stiff = np.einsum("tq,taqd,tbqd->tab", w, G, G)
    if zvals is None:
        mass = np.einsum("tq,aq,bq->tab", w, V, V)
    else:
        mass = np.einsum("tq,tq,aq,bq->tab", w, zvals, V, V)
    nodes = ctx.cell_scalar_nodes  # (nt, 6)
    rows = np.repeat(nodes, 6, axis=1).ravel()
    cols = np.tile(nodes, (1, 6)).ravel()
    return rows, cols, stiff.ravel(), mass.ravel()


def _divergence_block(ctx):
    """COO triplets of B over (pressure rows, velocity columns)."""
    w = ctx.cell_qweights
    G = ctx.p2_grad_at_q
    P = ctx.p1_at_q  # (3, nq)
    # -(q, dv_c/dx_c) for each velocity component c
    bx = -np.einsum("tq,kq,taq->tka", w, P, G[:, :, :, 0])
    by = -np.einsum("tq,kq,taq->tka", w, P, G[:, :, :, 1])
    # entry bx[t, k, a] pairs pressure row triangles[t, k] with velocity
    # column nodes[t, a]
    nt = ctx.mesh.num_triangles
    rows = np.repeat(ctx.mesh.triangles, 6, axis=1).reshape(nt, 3, 6)
    cols = np.broadcast_to(ctx.cell_scalar_nodes[:, None, :], (nt, 3, 6))
    return rows.ravel(), cols.ravel(), bx.ravel(), by.ravel()


def assemble_generalized_stokes(spaces_, nu, z):
    """Assemble the saddle blocks for viscosity ``nu`` and coefficient ``z``.

    ``z`` is a vorticity-space field; the skew block satisfies v^T C v = 0
    exactly (the two off-diagonal component blocks are transposes of one
    z-weighted mass matrix with opposite signs).
    """
    if not (nu > 0.0):
        raise ValueError("nu must be positive")
    ctx = spaces_.context
    if not np.all(np.isfinite(z.coefficients)):
        raise ValueError("non-finite coefficient field z")
    n = ctx.num_scalar_nodes
    zvals = fes.scalar_cell_values(z)
    rows, cols, stiff, zmass = _scalar_matrices(ctx, zvals)
    K = sp.coo_matrix((nu * stiff, (rows, cols)), shape=(n, n)).tocsr()
    Mz = sp.coo_matrix((zmass, (rows, cols)), shape=(n, n)).tocsr()
    A = sp.bmat([[K, None], [None, K]], format="csr")
    # (z x w, v) = int z * (w1 v2 - w2 v1): rows v-component, cols w-component
    C = sp.bmat([[None, -Mz], [Mz, None]], format="csr")
    prow, vcol, bx, by = _divergence_block(ctx)
    np_ = spaces_.pressure.dof_count
    B = sp.hstack([
        sp.coo_matrix((bx, (prow, vcol)), shape=(np_, n)),
        sp.coo_matrix((by, (prow, vcol)), shape=(np_, n)),
    ]).tocsr()
    mesh = ctx.mesh
    mean_vec = np.zeros(np_)
    np.add.at(mean_vec, mesh.triangles.ravel(),
              np.repeat(mesh.areas / 3.0, 3))
    nodes = ctx.boundary_scalar_nodes
    dirichlet = np.sort(np.concatenate([nodes, n + nodes]))
    if not np.all(np.isfinite(A.data)) or not np.all(np.isfinite(C.data)):
        raise LinearSolveFailure("non-finite entries in assembled system")
    return SaddleSystem(A, C, B, mean_vec, dirichlet, spaces_)


def _load_vector(ctx, f):
    """(f, v) load over both velocity components."""
    pts = ctx.cell_qpoints
    fx = np.empty(pts.shape[:2])
    fy = np.empty(pts.shape[:2])
    for t in range(pts.shape[0]):
        for q in range(pts.shape[1]):
            vx, vy = f(pts[t, q, 0], pts[t, q, 1])
            fx[t, q] = vx
            fy[t, q] = vy
    w = ctx.cell_qweights
    V = ctx.p2_at_q
    lx = np.einsum("tq,tq,aq->ta", w, fx, V)
    ly = np.einsum("tq,tq,aq->ta", w, fy, V)
    n = ctx.num_scalar_nodes
    out = np.zeros(2 * n)
    np.add.at(out[:n], ctx.cell_scalar_nodes.ravel(), lx.ravel())
    out_y = np.zeros(n)
    np.add.at(out_y, ctx.cell_scalar_nodes.ravel(), ly.ravel())
    out[n:] = out_y
    return out


def default_flux_tol(mesh, g):
    """1e-8 times the boundary scale of the normal data (floor at 1e-8)."""
    pts = mesh.boundary_quad_points()
    w = mesh.boundary_quad_weights()
    n = mesh.boundary_normals
    total = 0.0
    for b in range(pts.shape[0]):
        for q in range(pts.shape[1]):
            gx, gy = g(pts[b, q, 0], pts[b, q, 1])
            total += w[b, q] * abs(gx * n[b, 0] + gy * n[b, 1])
    return 1e-8 * max(1.0, total)


def check_flux_compatibility(mesh, g, flux_tol=None):
    """Raise :class:`FluxIncompatible` when a component carries net flux."""
    if flux_tol is None:
        flux_tol = default_flux_tol(mesh, g)
    fluxes = flux_per_component(mesh, g)
    for comp, flux in enumerate(fluxes):
        if abs(flux) > flux_tol:
            raise FluxIncompatible(comp, flux, flux_tol)
    return fluxes


def _boundary_values(ctx, g):
    """Velocity Dirichlet values at constrained dofs (node interpolation)."""
    nodes = ctx.boundary_scalar_nodes
    pts = ctx.velocity_nodes[nodes]
    vals = np.array([g(x, y) for x, y in pts], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite boundary data")
    return vals  # (len(nodes), 2)


def _solve_reduced(K, rhs, method, n_free_u=None, pressure_diag=None):
    if method == "direct":
        try:
            x = spla.spsolve(K.tocsc(), rhs)
        except RuntimeError as exc:
            raise LinearSolveFailure(str(exc)) from exc
    elif method == "iterative":
        x = _gmres_block(K, rhs, n_free_u, pressure_diag)
    else:
        raise ValueError(f"unknown linear solver {method!r}")
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("linear solve produced non-finite values")
    resid = np.linalg.norm(K @ x - rhs)
    scale = np.linalg.norm(rhs) + 1.0
    if resid > 1e-7 * scale:
        raise LinearSolveFailure(
            f"linear solve residual {resid:.3e} exceeds 1e-7*scale")
    return x


def _gmres_block(K, rhs, n_free_u, pressure_diag):
    """GMRES with a block-diagonal preconditioner.

    Velocity block: ILU of the (elliptic-dominated) upper-left block.
    Pressure block: lumped pressure mass over nu, the classical Schur
    complement surrogate for Stokes-type saddle systems.  The single
    multiplier row is handled by the identity.
    """
    Kc = K.tocsc()
    A = Kc[:n_free_u, :n_free_u]
    try:
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20.0)
    except RuntimeError as exc:
        raise LinearSolveFailure(f"ILU factorization failed: {exc}") from exc
    pdiag = np.maximum(pressure_diag, 1e-300)

    def apply(v):
        out = np.empty_like(v)
        out[:n_free_u] = ilu.solve(v[:n_free_u])
        out[n_free_u:-1] = v[n_free_u:-1] / pdiag
        out[-1] = v[-1]
        return out

    M = spla.LinearOperator(K.shape, apply)
    x, info = spla.gmres(K.tocsr(), rhs, rtol=1e-12, atol=0.0,
                         restart=300, maxiter=600, M=M)
    if info != 0:
        raise LinearSolveFailure(f"GMRES did not converge (info={info})")
    return x


def solve_generalized_stokes(spaces_, nu, z, f, g, flux_tol=None,
                             method="direct", system=None):
    """Solve for (u, p) given coefficient field ``z``.

    ``f`` and ``g`` are callables ``(x, y) -> (vx, vy)``.  The boundary data
    must be flux-compatible on every boundary component (checked first,
    raising :class:`FluxIncompatible`).  Returns velocity and zero-mean
    pressure fields; the pressure mean is asserted below 1e-10.
    """
    ctx = spaces_.context
    check_flux_compatibility(ctx.mesh, g, flux_tol)
    if system is None:
        system = assemble_generalized_stokes(spaces_, nu, z)
    n_u = spaces_.velocity.dof_count
    n_p = spaces_.pressure.dof_count
    F = _load_vector(ctx, f)
    op = system.operator()
    m = sp.csr_matrix(system.mean_vec[:, None])
    K = sp.bmat([[op, system.B.T, None],
                 [system.B, None, m],
                 [None, m.T, None]], format="csr")
    rhs = np.concatenate([F, np.zeros(n_p + 1)])

    fixed = system.dirichlet_nodes
    bvals = _boundary_values(ctx, g)
    nodes = ctx.boundary_scalar_nodes
    gvec = np.zeros(n_u)
    gvec[nodes] = bvals[:, 0]
    gvec[ctx.num_scalar_nodes + nodes] = bvals[:, 1]

    keep = np.ones(K.shape[0], dtype=bool)
    keep[fixed] = False
    keep_idx = np.nonzero(keep)[0]
    Kred = K[keep_idx][:, keep_idx]
    lift = np.zeros(K.shape[0])
    lift[:n_u] = gvec
    rhs_red = rhs[keep_idx] - (K @ lift)[keep_idx]

    x = _solve_reduced(Kred.tocsc(), rhs_red, method,
                       n_free_u=n_u - fixed.size,
                       pressure_diag=system.mean_vec / nu)
    full = lift.copy()
    full[keep_idx] += x

    u = spaces_.velocity.new_field(full[:n_u])
    p = spaces_.pressure.new_field(full[n_u:n_u + n_p])
    mean = fes.pressure_mean(p)
    if abs(mean) > 1e-10:
        raise LinearSolveFailure(
            f"pressure mean {mean:.3e} violates the zero-mean constraint")
    return u, p


def stokes_energy_report(u, p, z, f, nu):
    """Evaluate both sides of the energy identity and divergence norms.

    For homogeneous boundary data the identity nu*|u|_H1^2 = (f, u) holds to
    solver precision; the skew term is reported but vanishes by structure.
    The weak divergence is the pressure-space projection of div u (the
    quantity the constraint actually controls); the broken norm is the
    pointwise one and sits at discretization level for interpolated data.
    """
    ctx = u.space.context
    w = ctx.cell_qweights
    grads = fes.velocity_cell_gradients(u)
    viscous = nu * float((w * (grads ** 2).sum(axis=(2, 3))).sum())
    vals = fes.velocity_cell_values(u)
    pts = ctx.cell_qpoints
    fx = np.empty(w.shape)
    fy = np.empty(w.shape)
    for t in range(w.shape[0]):
        for q in range(w.shape[1]):
            a, b = f(pts[t, q, 0], pts[t, q, 1])
            fx[t, q] = a
            fy[t, q] = b
    forcing = float((w * (fx * vals[:, :, 0] + fy * vals[:, :, 1])).sum())
    zvals = fes.scalar_cell_values(z)
    skew = float((w * zvals * (vals[:, :, 0] * vals[:, :, 1]
                               - vals[:, :, 1] * vals[:, :, 0])).sum())
    div = grads[:, :, 0, 0] + grads[:, :, 1, 1]
    div_broken = float(np.sqrt((w * div ** 2).sum()))
    div_weak = fes.velocity_weak_divergence_l2(u)
    return StokesEnergyReport(
        viscous=viscous,
        forcing=forcing,
        skew=skew,
        balance_gap=abs(viscous - forcing),
        div_weak_l2=div_weak,
        div_broken_l2=div_broken,
    )
