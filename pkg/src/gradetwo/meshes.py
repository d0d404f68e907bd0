"""Triangulations of polygonal domains and inflow/outflow boundary analysis.

A mesh is immutable after construction and safe to share between threads.
The native file format is line oriented ASCII::

    mesh2d 1
    nodes N
    <id> <x> <y>            (N lines, ids 0..N-1 in order)
    triangles M
    <id> <v0> <v1> <v2>     (M lines, counterclockwise)
    boundary_edges B
    <id> <v0> <v1> <marker> (B lines)

Boundary edges must tile the topological boundary of the triangulation and
close into loops; markers are free integers (typically one per polygon side).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryResolutionError,
    MeshFormatError,
    MeshTopologyError,
)

__all__ = [
    "Mesh", "BoundaryPartition",
    "load_mesh", "save_mesh", "unit_square_mesh",
    "boundary_components", "classify_boundary", "flux_per_component",
]

# 3-point Gauss rule on [0, 1]: exact through degree 5
_EDGE_QP = np.array([
    0.5 * (1.0 - np.sqrt(0.6)),
    0.5,
    0.5 * (1.0 + np.sqrt(0.6)),
])
_EDGE_QW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class Mesh:
    """Conforming triangulation with tagged boundary edges.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, positively oriented
    boundary_edges : (nb, 2) int array
    boundary_markers : (nb,) int array

    Construction validates the conformity invariants: every boundary edge
    belongs to exactly one triangle, every interior edge to exactly two,
    all triangles have positive signed area and the boundary edges close
    into loops.
    """

    def __init__(self, vertices, triangles, boundary_edges, boundary_markers):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
        self.boundary_markers = np.ascontiguousarray(boundary_markers, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshTopologyError("vertices must be an (nv, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshTopologyError("triangles must be an (nt, 3) array")
        self._validate_indices()
        self._build_geometry()
        self._build_edges()
        self._validate_boundary()
        # freeze all arrays; the mesh is shared read-only from here on
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.boundary_markers, self.edges, self.cell_edges,
                    self.edge_cells, self.areas, self.boundary_edge_ids,
                    self.boundary_edge_cell, self.boundary_normals,
                    self.boundary_lengths):
            arr.setflags(write=False)

    # -- derived quantities ------------------------------------------------

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def num_boundary_edges(self):
        return self.boundary_edges.shape[0]

    def _validate_indices(self):
        nv = self.num_vertices
        bad = np.nonzero((self.triangles < 0) | (self.triangles >= nv))[0]
        if bad.size:
            t = int(bad[0])
            raise MeshTopologyError(
                f"triangle {t} references vertex index out of range "
                f"(indices {self.triangles[t].tolist()}, nv={nv})"
            )
        bad = np.nonzero((self.boundary_edges < 0) | (self.boundary_edges >= nv))[0]
        if bad.size:
            e = int(bad[0])
            raise MeshTopologyError(
                f"boundary edge {e} references vertex index out of range"
            )

    def _build_geometry(self):
        v = self.vertices
        t = self.triangles
        d1 = v[t[:, 1]] - v[t[:, 0]]
        d2 = v[t[:, 2]] - v[t[:, 0]]
        signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        bad = np.nonzero(signed <= 0.0)[0]
        if bad.size:
            t0 = int(bad[0])
            raise MeshTopologyError(
                f"triangle {t0} is not positively oriented "
                f"(signed area {signed[t0]:.3e})"
            )
        self.areas = signed

    def _build_edges(self):
        t = self.triangles
        nt = t.shape[0]
        # local edge i sits opposite local vertex i
        raw = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        raw = raw.reshape(-1, 2)
        key = np.sort(raw, axis=1)
        self.edges, inverse = np.unique(key, axis=0, return_inverse=True)
        self.cell_edges = inverse.reshape(nt, 3)
        counts = np.bincount(inverse, minlength=self.edges.shape[0])
        if counts.max(initial=0) > 2:
            e = int(np.argmax(counts))
            raise MeshTopologyError(
                f"edge {self.edges[e].tolist()} is shared by {counts[e]} "
                "triangles; the triangulation is not conforming"
            )
        edge_cells = np.full((self.edges.shape[0], 2), -1, dtype=np.int64)
        cell_ids = np.repeat(np.arange(nt, dtype=np.int64), 3)
        # deterministic: later cells overwrite slot 1, first occupant keeps 0
        for cell, e in zip(cell_ids, inverse):
            if edge_cells[e, 0] < 0:
                edge_cells[e, 0] = cell
            else:
                edge_cells[e, 1] = cell
        self.edge_cells = edge_cells

    def _validate_boundary(self):
        key = np.sort(self.boundary_edges, axis=1)
        uniq = np.unique(key, axis=0)
        if uniq.shape[0] != key.shape[0]:
            raise MeshTopologyError("duplicate boundary edge in file")
        one_cell = self.edge_cells[:, 1] < 0
        # map each declared boundary edge to a global edge id
        edge_lookup = {tuple(e): i for i, e in enumerate(map(tuple, self.edges))}
        ids = np.empty(key.shape[0], dtype=np.int64)
        for b, pair in enumerate(map(tuple, key)):
            e = edge_lookup.get(pair)
            if e is None:
                raise MeshTopologyError(
                    f"boundary edge {b} {list(pair)} is not an edge of any triangle"
                )
            if not one_cell[e]:
                raise MeshTopologyError(
                    f"boundary edge {b} {list(pair)} is interior "
                    "(shared by two triangles)"
                )
            ids[b] = e
        self.boundary_edge_ids = ids
        declared = np.zeros(self.num_edges, dtype=bool)
        declared[ids] = True
        missing = np.nonzero(one_cell & ~declared)[0]
        if missing.size:
            e = int(missing[0])
            raise MeshTopologyError(
                f"edge {self.edges[e].tolist()} lies on the boundary but is "
                "not declared in boundary_edges; loops do not close"
            )
        # each boundary vertex must touch exactly two boundary edges
        counts = np.bincount(key.ravel(), minlength=self.num_vertices)
        bad = np.nonzero((counts != 0) & (counts != 2))[0]
        if bad.size:
            raise MeshTopologyError(
                f"boundary vertex {int(bad[0])} touches {int(counts[bad[0]])} "
                "boundary edges (loops do not close)"
            )
        self.boundary_edge_cell = self.edge_cells[ids, 0]
        # outward normals and lengths per boundary edge
        a = self.vertices[key[:, 0]]
        b = self.vertices[key[:, 1]]
        tangent = b - a
        lengths = np.hypot(tangent[:, 0], tangent[:, 1])
        if np.any(lengths <= 0.0):
            raise MeshTopologyError("zero-length boundary edge")
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / lengths[:, None]
        # orient away from the owning triangle's centroid
        centroid = self.vertices[self.triangles[self.boundary_edge_cell]].mean(axis=1)
        mid = 0.5 * (a + b)
        flip = np.einsum("ij,ij->i", normal, mid - centroid) < 0.0
        normal[flip] *= -1.0
        self.boundary_normals = normal
        self.boundary_lengths = lengths
        self._boundary_key = key
        self._boundary_key.setflags(write=False)

    # -- boundary quadrature -------------------------------------------------

    def boundary_quad_points(self):
        """Physical quadrature points per boundary edge, shape (nb, 3, 2)."""
        key = self._boundary_key
        a = self.vertices[key[:, 0]][:, None, :]
        b = self.vertices[key[:, 1]][:, None, :]
        t = _EDGE_QP[None, :, None]
        return a * (1.0 - t) + b * t

    def boundary_quad_weights(self):
        """Quadrature weights (arc length measure), shape (nb, 3)."""
        return self.boundary_lengths[:, None] * _EDGE_QW[None, :]


@dataclass(frozen=True)
class BoundaryPartition:
    """Inflow/outflow split of the boundary induced by the velocity data.

    ``gamma_minus`` and ``gamma_zero_plus`` hold boundary-edge ids (file
    order).  ``junctions`` are vertices where the two incident boundary
    edges fall in different sets.  ``degenerate_points`` are vertices of the
    closure of the inflow part where the normal data degenerates to zero;
    those that are not junctions flag an unresolvable interior degeneracy.
    ``beta`` is the reciprocal of the smallest inflow speed, or ``None``
    when the inflow set is empty or touches zero.
    """

    gamma_minus: tuple
    gamma_zero_plus: tuple
    junctions: tuple
    degenerate_points: tuple
    beta: float | None
    eps_n: float = field(default=0.0, compare=False)

    def interior_degeneracies(self):
        """Degenerate points strictly inside the closure of the inflow set."""
        junc = set(self.junctions)
        return tuple(v for v in self.degenerate_points if v not in junc)


def _eval_g_on_boundary(mesh, g):
    """Evaluate boundary velocity data at all edge quadrature points.

    Returns arrays gx, gy of shape (nb, 3).
    """
    pts = mesh.boundary_quad_points()
    flat = pts.reshape(-1, 2)
    gx = np.empty(flat.shape[0])
    gy = np.empty(flat.shape[0])
    for i, (x, y) in enumerate(flat):
        vx, vy = g(x, y)
        gx[i] = vx
        gy[i] = vy
    nb = mesh.num_boundary_edges
    return gx.reshape(nb, 3), gy.reshape(nb, 3)


def boundary_components(mesh):
    """Group boundary edges into closed loops.

    Returns a dict mapping boundary-edge id to component id.  Component ids
    are contiguous, starting from 0, ordered by the smallest edge id they
    contain.
    """
    nb = mesh.num_boundary_edges
    vertex_edges = {}
    for b, (p, q) in enumerate(mesh._boundary_key):
        vertex_edges.setdefault(int(p), []).append(b)
        vertex_edges.setdefault(int(q), []).append(b)
    comp = {}
    current = 0
    for start in range(nb):
        if start in comp:
            continue
        stack = [start]
        comp[start] = current
        while stack:
            b = stack.pop()
            for v in mesh._boundary_key[b]:
                for nb_edge in vertex_edges[int(v)]:
                    if nb_edge not in comp:
                        comp[nb_edge] = current
                        stack.append(nb_edge)
        current += 1
    return comp


def classify_boundary(mesh, g, alpha, eps_n=None):
    """Split the boundary into the inflow part and its complement.

    An edge joins the inflow set iff ``alpha * g.n < -eps_n`` at all of its
    quadrature points; ties go to the complement.  A strict sign change of
    ``alpha * g.n`` inside one edge means the mesh cannot resolve the
    partition and raises :class:`BoundaryResolutionError`.

    Parameters
    ----------
    g : callable (x, y) -> (gx, gy)
    alpha : float, stress modulus (sign matters, 0 gives an empty inflow set)
    eps_n : float, sign threshold; default ``1e-12 * max(1, max |g|)``
    """
    gx, gy = _eval_g_on_boundary(mesh, g)
    if eps_n is None:
        gscale = float(np.hypot(gx, gy).max(initial=0.0))
        eps_n = 1e-12 * max(1.0, gscale)
    eps_n = float(eps_n)
    if eps_n < 0.0:
        raise ValueError("eps_n must be nonnegative")
    n = mesh.boundary_normals
    gn = gx * n[:, None, 0] + gy * n[:, None, 1]  # (nb, 3)
    s = alpha * gn
    neg = s < -eps_n
    pos = s > eps_n
    minus = []
    zero_plus = []
    for b in range(mesh.num_boundary_edges):
        if neg[b].all():
            minus.append(b)
        elif alpha != 0.0 and neg[b].any() and pos[b].any():
            raise BoundaryResolutionError(
                f"boundary edge {b}: alpha*g.n changes sign strictly within "
                "the edge; refine the mesh to resolve the inflow partition"
            )
        else:
            zero_plus.append(b)
    minus_set = set(minus)
    # junction vertices: the two incident boundary edges disagree
    vertex_edges = {}
    for b, (p, q) in enumerate(mesh._boundary_key):
        vertex_edges.setdefault(int(p), []).append(b)
        vertex_edges.setdefault(int(q), []).append(b)
    junctions = []
    for v, edges in sorted(vertex_edges.items()):
        flags = {e in minus_set for e in edges}
        if len(flags) == 2:
            junctions.append(v)
    # degenerate points: vertices of closure(inflow) where |g.n_-| <= eps_n,
    # measured with the normal of the incident inflow edge
    degenerate = []
    for v, edges in sorted(vertex_edges.items()):
        for b in edges:
            if b not in minus_set:
                continue
            nx, ny = mesh.boundary_normals[b]
            gvx, gvy = g(*mesh.vertices[v])
            if abs(gvx * nx + gvy * ny) <= eps_n:
                degenerate.append(v)
                break
    beta = None
    if minus:
        m = float(np.abs(gn[minus]).min())
        if m > eps_n:
            beta = 1.0 / m
    return BoundaryPartition(
        gamma_minus=tuple(minus),
        gamma_zero_plus=tuple(zero_plus),
        junctions=tuple(junctions),
        degenerate_points=tuple(degenerate),
        beta=beta,
        eps_n=eps_n,
    )


def flux_per_component(mesh, g):
    """Net flux of g through each boundary component (edge quadrature)."""
    comp = boundary_components(mesh)
    k = max(comp.values()) + 1 if comp else 0
    gx, gy = _eval_g_on_boundary(mesh, g)
    n = mesh.boundary_normals
    gn = gx * n[:, None, 0] + gy * n[:, None, 1]
    w = mesh.boundary_quad_weights()
    per_edge = (gn * w).sum(axis=1)
    out = [0.0] * k
    for b, c in comp.items():
        out[c] += float(per_edge[b])
    return out


# -- file format ------------------------------------------------------------

def load_mesh(path):
    """Read a mesh in the native format; see the module docstring.

    Raises :class:`MeshFormatError` with a line number on malformed input
    and :class:`MeshTopologyError` on conformity violations.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise MeshFormatError(msg, line=lineno)

    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines):
            idx += 1
            text = lines[idx - 1].strip()
            if text and not text.startswith("#"):
                return idx, text
        return idx, None

    lineno, header = next_line()
    if header is None or header.split() != ["mesh2d", "1"]:
        fail(lineno if header is not None else 1,
             f"expected header 'mesh2d 1', got {header!r}")

    def section(name, width, kind):
        lineno, text = next_line()
        parts = text.split() if text else []
        if len(parts) != 2 or parts[0] != name:
            fail(lineno, f"expected section header '{name} <count>', got {text!r}")
        try:
            count = int(parts[1])
        except ValueError:
            fail(lineno, f"bad count in section header {text!r}")
        if count < 0:
            fail(lineno, f"negative count in section {name}")
        rows = np.empty((count, width), dtype=kind)
        for k in range(count):
            lineno, text = next_line()
            if text is None:
                fail(lineno, f"unexpected end of file inside section {name}")
            parts = text.split()
            if len(parts) != width + 1:
                fail(lineno, f"expected {width + 1} fields, got {len(parts)}")
            try:
                rid = int(parts[0])
                vals = [kind(p) for p in parts[1:]]
            except ValueError as exc:
                fail(lineno, f"bad field: {exc}")
            if rid != k:
                fail(lineno, f"ids must be contiguous from 0; expected {k}, got {rid}")
            rows[k] = vals
        return rows

    nodes = section("nodes", 2, float)
    tris = section("triangles", 3, int)
    bnd = section("boundary_edges", 3, int)
    lineno, trailing = next_line()
    if trailing is not None:
        fail(lineno, f"trailing content after boundary_edges: {trailing!r}")
    return Mesh(nodes, tris, bnd[:, :2], bnd[:, 2])


def save_mesh(mesh, path):
    """Write a mesh in the native format (floats use shortest round-trip)."""
    out = ["mesh2d 1", f"nodes {mesh.num_vertices}"]
    for i, (x, y) in enumerate(mesh.vertices):
        out.append(f"{i} {float(x)!r} {float(y)!r}")
    out.append(f"triangles {mesh.num_triangles}")
    for i, (a, b, c) in enumerate(mesh.triangles):
        out.append(f"{i} {a} {b} {c}")
    out.append(f"boundary_edges {mesh.num_boundary_edges}")
    for i, ((a, b), m) in enumerate(zip(mesh.boundary_edges, mesh.boundary_markers)):
        out.append(f"{i} {a} {b} {m}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def unit_square_mesh(n):
    """Structured n-by-n triangulation of the unit square (2n^2 cells).

    Boundary markers: 1 bottom, 2 right, 3 top, 4 left.  This is the mesh
    family used by the refinement studies; h = 1/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    vx, vy = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.stack([vx.ravel(), vy.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    bedges = []
    markers = []
    for i in range(n):
        bedges.append((vid(i, 0), vid(i + 1, 0)))
        markers.append(1)
    for j in range(n):
        bedges.append((vid(n, j), vid(n, j + 1)))
        markers.append(2)
    for i in range(n):
        bedges.append((vid(n - i, n), vid(n - i - 1, n)))
        markers.append(3)
    for j in range(n):
        bedges.append((vid(0, n - j), vid(0, n - j - 1)))
        markers.append(4)
    return Mesh(np.asarray(vertices), np.asarray(tris),
                np.asarray(bedges), np.asarray(markers))
