"""Legacy VTK (ASCII) export of solution fields.

One unstructured grid per file: the triangulation with the velocity as
point vectors (vertex values of the quadratic field), the pressure as
point scalars and the discontinuous vorticity as cell scalars (cell means,
the only faithful legacy representation of DG data).  Floats are written
with shortest round-trip formatting, so identical fields give identical
bytes.
"""

from __future__ import annotations

import numpy as np

from . import spaces as fes

__all__ = ["write_vtk"]


def _fmt(x):
    return repr(float(x))


def write_vtk(path, mesh, velocity=None, pressure=None, vorticity=None,
              title="gradetwo fields"):
    lines = ["# vtk DataFile Version 2.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    nv = mesh.num_vertices
    lines.append(f"POINTS {nv} double")
    for x, y in mesh.vertices:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    nt = mesh.num_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)

    if velocity is not None or pressure is not None:
        lines.append(f"POINT_DATA {nv}")
    if velocity is not None:
        n = velocity.space.context.num_scalar_nodes
        vx = velocity.coefficients[:n][:nv]
        vy = velocity.coefficients[n:][:nv]
        lines.append("VECTORS velocity double")
        for a, b in zip(vx, vy):
            lines.append(f"{_fmt(a)} {_fmt(b)} 0.0")
    if pressure is not None:
        lines.append("SCALARS pressure double 1")
        lines.append("LOOKUP_TABLE default")
        for v in pressure.coefficients:
            lines.append(_fmt(v))
    if vorticity is not None:
        lines.append(f"CELL_DATA {nt}")
        lines.append("SCALARS vorticity double 1")
        lines.append("LOOKUP_TABLE default")
        means = vorticity.coefficients.reshape(-1, 3).mean(axis=1)
        for v in means:
            lines.append(_fmt(v))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
