"""Legacy ASCII VTK unstructured-grid output (visualization grade).

Only mesh vertices are written, as linear tetrahedra (cell type 10); the P2
velocity is sampled at the vertex nodes, which come first in the node
numbering, and the P1 pressure is written as is.
"""

from __future__ import annotations

import numpy as np

VTK_TETRA = 10


def _num(v):
    return repr(float(v))


def vtk_text(spaces, field=None, title="nscert"):
    mesh = spaces.mesh
    nv = len(mesh.vertices)
    nt = len(mesh.tets)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {nv} double")
    lines.extend(" ".join(_num(c) for c in p) for p in mesh.vertices)
    lines.append(f"CELLS {nt} {5 * nt}")
    lines.extend("4 " + " ".join(str(int(i)) for i in tet) for tet in mesh.tets)
    lines.append(f"CELL_TYPES {nt}")
    lines.extend([str(VTK_TETRA)] * nt)
    if field is not None:
        n = spaces.num_nodes
        u = np.asarray(field.velocity).reshape(3, n)[:, :nv]
        lines.append(f"POINT_DATA {nv}")
        lines.append("VECTORS velocity double")
        lines.extend(" ".join(_num(c) for c in u[:, i]) for i in range(nv))
        lines.append("SCALARS pressure double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_num(p) for p in field.pressure)
    return "\n".join(lines) + "\n"


def write_vtk(path, spaces, field=None, title="nscert"):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(vtk_text(spaces, field, title))
