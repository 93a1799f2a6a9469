"""Generalised eigensolvers for the P1 pencil (K, M).

The workhorse is ARPACK shift-invert through a sparse LU of ``K - sigma M``;
a dense path (scipy.linalg.eigh) covers small systems and doubles as an
independent oracle in the tests.  Everything is seeded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh as dense_eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .fem import DiscreteOperator

__all__ = ["Spectrum", "SolverError", "solve_lowest", "dense_oracle",
           "align_subspaces", "cluster_eigenvalues", "balance_clusters",
           "weyl_estimate", "dump_spectrum"]

DENSE_LIMIT = 3000


class SolverError(RuntimeError):
    """Eigensolver failed to converge or factorise."""


@dataclass
class Spectrum:
    """Ordered lowest eigenpairs of a discrete operator.

    Attributes
    ----------
    lam : ndarray, shape (m,)
        Eigenvalues in increasing order, clamped at zero (the discrete
        pencil is positive semidefinite; tiny negative round-off is
        flattened).
    vecs : ndarray, shape (n_vertices, m)
        Full-length eigenvectors, M-orthonormal, zeros on any clamped
        boundary.
    residuals : ndarray, shape (m,)
        Relative residuals ||K v - lam M v|| / ((1 + lam) ||M v||).
    method : str
        "arpack" or "dense".
    """

    lam: np.ndarray
    vecs: np.ndarray
    residuals: np.ndarray
    method: str
    operator: DiscreteOperator = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return len(self.lam)

    def clusters(self, tol: float = 1e-6) -> list[range]:
        return cluster_eigenvalues(self.lam, tol)


def cluster_eigenvalues(lam: np.ndarray, tol: float = 1e-6) -> list[range]:
    """Group consecutive eigenvalues whose relative gap is below ``tol``.

    The gap between lam[i] and lam[i+1] is measured relative to
    ``max(lam[i+1], 1)`` so clusters near zero are handled sensibly.
    """
    lam = np.asarray(lam)
    groups = []
    start = 0
    for i in range(len(lam) - 1):
        gap = (lam[i + 1] - lam[i]) / max(abs(lam[i + 1]), 1.0)
        if gap > tol:
            groups.append(range(start, i + 1))
            start = i + 1
    groups.append(range(start, len(lam)))
    return groups


def balance_clusters(vecs: np.ndarray, clusters, row: int) -> np.ndarray:
    """Rotate each eigenvector cluster so all members share one value at
    a marked vertex.

    Within a (near-)degenerate cluster the solver's basis is arbitrary,
    and some rotations of it vanish at any given point.  This picks the
    deterministic rotation under which every member of the cluster takes
    the same positive value at ``row``, namely ``r / sqrt(d)`` where ``r``
    is the rotation-invariant amplitude ``||vecs[row, cluster]||`` and
    ``d`` the cluster dimension.  That pins the basis to the vertex in
    the most balanced way possible: no member is left vanishing there,
    so nodal-set statements made per basis member have a chance to hold
    for all of them at once.  Simple eigenvalues and clusters with no
    amplitude at the vertex are returned unchanged, as is the overall
    M-orthonormality (the mixing is orthogonal).

    Parameters
    ----------
    vecs : ndarray, shape (n, m)
        Eigenvector columns, consistently ordered with ``clusters``.
    clusters : list of range
        Index groups from ``cluster_eigenvalues``; groups reaching past
        the available columns are left untouched.
    row : int
        Vertex id at which the cluster values are balanced.

    Returns
    -------
    ndarray
        A copy of ``vecs`` with rotated cluster blocks.
    """
    out = np.array(vecs, copy=True)
    n_cols = out.shape[1]
    for grp in clusters:
        idx = list(grp)
        d = len(idx)
        if d < 2 or (idx and idx[-1] >= n_cols):
            continue
        a = out[row, idx].astype(np.float64)
        rho = float(np.linalg.norm(a))
        if rho <= 0.0 or not np.isfinite(rho):
            continue
        target = np.full(d, rho / np.sqrt(d))
        u = a - target
        nu2 = float(u @ u)
        if nu2 <= (1e-14 * rho) ** 2:
            continue
        # Householder reflection taking the value vector to the balanced
        # one; symmetric and orthogonal, hence deterministic and norm
        # preserving in the M inner product.
        H = np.eye(d) - 2.0 * np.outer(u, u) / nu2
        out[:, idx] = out[:, idx] @ H
    return out


def _m_orthonormalize(V: np.ndarray, M: sparse.csr_matrix) -> np.ndarray:
    G = V.T @ (M @ V)
    L = np.linalg.cholesky(G)
    return V @ np.linalg.inv(L).T


def _finalize(op: DiscreteOperator, lam, V, method: str) -> Spectrum:
    order = np.argsort(lam, kind="stable")
    lam = np.asarray(lam)[order]
    V = np.asarray(V)[:, order]
    V = _m_orthonormalize(V, op.Mff)
    lam = np.where(lam < 0, 0.0, lam)
    res = np.empty(len(lam))
    for k in range(len(lam)):
        v = V[:, k]
        r = op.Kff @ v - lam[k] * (op.Mff @ v)
        res[k] = np.linalg.norm(r) / ((1.0 + lam[k]) * np.linalg.norm(op.Mff @ v))
    full = op.prolong(V)
    # Deterministic sign: the first entry of largest magnitude is positive.
    for k in range(full.shape[1]):
        col = full[:, k]
        idx = np.nonzero(np.abs(col) > 0.1 * np.abs(col).max())[0]
        if len(idx) and col[idx[0]] < 0:
            full[:, k] = -col
            V[:, k] = -V[:, k]
    return Spectrum(lam=lam, vecs=full, residuals=res, method=method,
                    operator=op)


def dense_oracle(op: DiscreteOperator, m: int) -> Spectrum:
    """Dense generalised eigensolve; independent check for small systems."""
    n = op.n_free
    if n > DENSE_LIMIT:
        raise SolverError(f"dense path refused for {n} unknowns")
    if m > n:
        raise SolverError(f"asked for {m} pairs from an {n}-dim space")
    lam, V = dense_eigh(op.Kff.toarray(), op.Mff.toarray(),
                        subset_by_index=(0, m - 1))
    return _finalize(op, lam, V, "dense")


def solve_lowest(op: DiscreteOperator, m: int, seed: int = 0,
                 tol: float = 0.0) -> Spectrum:
    """Lowest ``m`` eigenpairs of the pencil (Kff, Mff).

    Uses ARPACK shift-invert with a seeded start vector; small systems go
    through the dense path.  The shift starts slightly below zero (the
    pencil is positive semidefinite) and backs off if the factorisation
    hits a singular matrix.

    Raises
    ------
    SolverError
        If ARPACK fails to converge after restarts.
    """
    n = op.n_free
    if m < 1:
        raise ValueError("m must be >= 1")
    if n <= max(400, 2 * m + 2) and n <= DENSE_LIMIT:
        return dense_oracle(op, m)
    if m >= n - 1:
        raise SolverError("too many pairs requested for ARPACK")
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    # Scale of the low spectrum, a Weyl-style guess from the total mass.
    area = op.Mff.sum()
    lam_scale = 4.0 * np.pi / max(area, 1e-30)
    sigma = -0.05 * lam_scale
    last_err = None
    for attempt in range(4):
        try:
            lam, V = eigsh(op.Kff, k=m, M=op.Mff, sigma=sigma, which="LM",
                           v0=v0, tol=tol, maxiter=5000)
            return _finalize(op, lam, V, "arpack")
        except ArpackNoConvergence as err:
            last_err = err
            sigma *= 0.3
        except RuntimeError as err:  # singular factorisation
            last_err = err
            sigma *= 4.0
    raise SolverError(f"eigensolver failed after retries: {last_err}")


def align_subspaces(ref: np.ndarray, tgt: np.ndarray,
                    M: sparse.csr_matrix):
    """Rotate the columns of ``tgt`` to best match ``ref`` in the M inner
    product (orthogonal Procrustes over the spanned subspace).

    Both blocks must be M-orthonormal and of equal width.  Returns
    ``(aligned, angles)`` where ``angles`` are the principal angles between
    the two subspaces (radians); ``aligned`` spans the same space as
    ``tgt``.
    """
    ref = np.atleast_2d(ref.T).T
    tgt = np.atleast_2d(tgt.T).T
    if ref.shape != tgt.shape:
        raise ValueError("subspace blocks must have equal shape")
    B = tgt.T @ (M @ ref)
    U, s, Vt = np.linalg.svd(B)
    R = U @ Vt
    angles = np.arccos(np.clip(s, -1.0, 1.0))
    return tgt @ R, angles


def weyl_estimate(area: float, lam: float) -> float:
    """Two-dimensional Weyl prediction for the counting function,
    ``N(lam) ~ area * lam / (4 pi)``."""
    return area * lam / (4.0 * np.pi)


def dump_spectrum(spec: Spectrum, path, cluster_tol: float = 1e-6) -> None:
    """Deterministic CSV dump: index, eigenvalue, residual, cluster id."""
    groups = spec.clusters(cluster_tol)
    cluster_of = np.empty(spec.m, dtype=int)
    for ci, g in enumerate(groups):
        cluster_of[list(g)] = ci
    lines = ["k,lambda,residual,cluster"]
    for k in range(spec.m):
        lines.append("%d,%.17g,%.17g,%d"
                     % (k, spec.lam[k], spec.residuals[k], cluster_of[k]))
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")
