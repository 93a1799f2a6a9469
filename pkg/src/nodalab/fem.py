"""P1 finite elements on intrinsic triangle meshes.

Stiffness uses the cotangent weights, which depend only on edge lengths and
are invariant under uniform scaling; the consistent mass matrix scales like
area.  Both are assembled from the intrinsic lengths, never from vertex
coordinates, so meshes glued out of differently scaled pieces are handled
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .mesh.intrinsic import IntrinsicMesh

__all__ = ["DiscreteOperator", "assemble", "dump_operator"]


@dataclass
class DiscreteOperator:
    """Assembled stiffness/mass pair with boundary conditions applied.

    Attributes
    ----------
    mesh : IntrinsicMesh
    bc : str
        ``"closed"`` or ``"neumann"`` (no constraint) or ``"dirichlet"``
        (boundary vertices eliminated).
    K, M : csr_matrix
        Full stiffness and mass matrices over all vertices.
    free : ndarray
        Indices of unconstrained vertices.
    Kff, Mff : csr_matrix
        Restriction of K, M to the free vertices; this is the pencil the
        eigensolver works with.
    """

    mesh: IntrinsicMesh
    bc: str
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    free: np.ndarray
    Kff: sparse.csr_matrix = field(repr=False, default=None)
    Mff: sparse.csr_matrix = field(repr=False, default=None)

    @property
    def n_free(self) -> int:
        return len(self.free)

    def prolong(self, u_free: np.ndarray) -> np.ndarray:
        """Extend free-vertex values to all vertices (zeros on boundary)."""
        u_free = np.asarray(u_free)
        if u_free.ndim == 1:
            full = np.zeros(self.mesh.n_vertices)
            full[self.free] = u_free
        else:
            full = np.zeros((self.mesh.n_vertices, u_free.shape[1]))
            full[self.free, :] = u_free
        return full

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return np.asarray(u_full)[self.free]

    def rayleigh(self, u_full: np.ndarray) -> float:
        """Rayleigh quotient u'Ku / u'Mu of a full vertex vector."""
        u = np.asarray(u_full, dtype=np.float64)
        num = u @ (self.K @ u)
        den = u @ (self.M @ u)
        if den <= 0:
            raise ValueError("vector has no mass")
        return float(num / den)


def assemble(mesh: IntrinsicMesh, bc: str = "closed",
             lumped: bool = False) -> DiscreteOperator:
    """Assemble the P1 stiffness and mass matrices from intrinsic lengths.

    Parameters
    ----------
    mesh : IntrinsicMesh
    bc : str
        ``"closed"`` for closed surfaces (requires empty boundary),
        ``"dirichlet"`` to clamp all boundary vertices, ``"neumann"``
        for the natural (free) boundary condition (both require a
        boundary).
    lumped : bool
        Use the diagonal (row-sum) mass matrix instead of the consistent
        one.

    Raises
    ------
    ValueError
        If the boundary condition does not match the mesh topology.
    """
    if bc not in ("closed", "dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if bc == "closed" and not mesh.is_closed:
        raise ValueError("bc='closed' needs a closed mesh")
    if bc in ("dirichlet", "neumann") and mesh.is_closed:
        raise ValueError(f"bc={bc!r} needs a mesh with boundary")

    tl = mesh.tri_lengths  # (T, 3), entry k = length of edge opposite vertex k
    area = mesh.areas
    a2 = tl ** 2
    nv = mesh.n_vertices
    tris = mesh.tris

    # Cotangent of the angle at local vertex k, from the law of cosines.
    cot = np.empty_like(tl)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        cot[:, k] = (a2[:, i] + a2[:, j] - a2[:, k]) / (4.0 * area)

    rows, cols, vals = [], [], []
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        w = 0.5 * cot[:, k]
        rows += [tris[:, i], tris[:, j], tris[:, i], tris[:, j]]
        cols += [tris[:, i], tris[:, j], tris[:, j], tris[:, i]]
        vals += [w, w, -w, -w]
    K = sparse.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nv, nv)).tocsr()

    rows, cols, vals = [], [], []
    if lumped:
        for k in range(3):
            rows.append(tris[:, k])
            cols.append(tris[:, k])
            vals.append(area / 3.0)
    else:
        for i in range(3):
            for j in range(3):
                rows.append(tris[:, i])
                cols.append(tris[:, j])
                vals.append(area * (2.0 if i == j else 1.0) / 12.0)
    M = sparse.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nv, nv)).tocsr()

    if bc == "dirichlet":
        fixed = np.zeros(nv, dtype=bool)
        fixed[mesh.boundary_vertices] = True
        free = np.nonzero(~fixed)[0]
    else:
        free = np.arange(nv)
    Kff = K[free][:, free].tocsr()
    Mff = M[free][:, free].tocsr()
    return DiscreteOperator(mesh=mesh, bc=bc, K=K, M=M, free=free,
                            Kff=Kff, Mff=Mff)


def dump_operator(op: DiscreteOperator, path) -> None:
    """Write both matrices as deterministic ``matrix row col value`` lines
    (lexicographic order, %.17g) for diffing across runs."""
    lines = [f"OPERATOR {op.bc} {op.n_free}"]
    for name, mat in (("K", op.K), ("M", op.M)):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{name} {r} {c} %.17g" % v)
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")
