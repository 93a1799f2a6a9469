"""Plain-text mesh serialisation.

Format (IMESH v1), line oriented, whitespace separated, ``%.17g`` floats so
a write/read round trip is bit exact:

.. code-block:: text

    IMESH 1
    <n_vertices> <n_edges> <n_tris>
    chart <plane|sphere|torus|none> [period]
    v <x> <y> [z]            (n_vertices lines)
    t <v0> <v1> <v2> <region> <tri_scale>   (n_tris lines)
    e <a> <b> <length>       (n_edges lines, (a, b) sorted, lex order)
"""

from __future__ import annotations

import numpy as np

from .intrinsic import IntrinsicMesh

__all__ = ["write_mesh", "read_mesh"]

_F = "%.17g"


def write_mesh(mesh: IntrinsicMesh, path) -> None:
    """Serialise a mesh to IMESH v1 text."""
    lines = ["IMESH 1",
             f"{mesh.n_vertices} {mesh.n_edges} {mesh.n_tris}"]
    if mesh.chart is None:
        lines.append("chart none")
    elif mesh.chart == "torus":
        lines.append("chart torus " + _F % mesh.period)
    else:
        lines.append(f"chart {mesh.chart}")
    for c in mesh.coords:
        lines.append("v " + " ".join(_F % x for x in c))
    for t, r, s in zip(mesh.tris, mesh.region, mesh.tri_scale):
        lines.append(f"t {t[0]} {t[1]} {t[2]} {int(r)} " + _F % s)
    for (a, b), l in zip(mesh.edges, mesh.lengths):
        lines.append(f"e {a} {b} " + _F % l)
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_mesh(path) -> IntrinsicMesh:
    """Read an IMESH v1 file written by :func:`write_mesh`."""
    with open(path, "r", encoding="ascii") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0].split() != ["IMESH", "1"]:
        raise ValueError("not an IMESH 1 file")
    nv, ne, nt = (int(x) for x in lines[1].split())
    chart_parts = lines[2].split()
    if chart_parts[0] != "chart":
        raise ValueError("missing chart line")
    chart = None if chart_parts[1] == "none" else chart_parts[1]
    period = float(chart_parts[2]) if len(chart_parts) > 2 else None
    body = lines[3:]
    if len(body) != nv + nt + ne:
        raise ValueError("line count does not match header")
    coords = np.array([[float(x) for x in ln.split()[1:]] for ln in body[:nv]])
    tri_rows = [ln.split() for ln in body[nv:nv + nt]]
    tris = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in tri_rows],
                    dtype=np.int64)
    region = np.array([int(r[4]) for r in tri_rows], dtype=np.int64)
    scale = np.array([float(r[5]) for r in tri_rows])
    edge_rows = [ln.split() for ln in body[nv + nt:]]
    mesh = IntrinsicMesh(coords, tris, region=region, chart=chart,
                         period=period, tri_scale=scale)
    ldict = {(int(r[1]), int(r[2])): float(r[3]) for r in edge_rows}
    mesh.lengths = np.array([ldict[(int(a), int(b))] for a, b in mesh.edges])
    return mesh
