"""Surgery on meshes: connected sums, domain attachments, perforations.

The three constructions share a pattern: carve a geodesic ball, prepare a
second piece whose boundary matches the fresh ring exactly (same vertex
count, same chord lengths after scaling), and identify the rings vertex by
vertex.  The second piece carries edge lengths multiplied by epsilon, the
intrinsic realization of scaling its metric by epsilon squared; stiffness
is scale invariant and mass scales by epsilon squared, so spectral
quantities of the attached part rescale exactly at the discrete level.

All operations are pure functions from meshes to meshes.  The output mesh
keeps the first factor's vertex ids for its surviving vertices (maps are
returned in the info dictionary), region tags record which piece every
triangle came from, and coordinates of the attached piece are moved by a
best-fit orthogonal transform onto the ring so renderings stay readable;
coordinates are advisory on glued meshes, the metric lives in the edge
lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon

from .mesh.intrinsic import IntrinsicMesh, RegionTag, concatenate, identify_vertices
from .mesh.geodesic import distance_field, injectivity_cap
from .mesh.carve import chart_distances, remove_geodesic_ball
from .mesh.refine import refine_near

__all__ = [
    "GluedSpec",
    "PerforationSpec",
    "connected_sum",
    "attach_domain",
    "perforate",
    "choose_epsilon0",
    "select_surgery_vertex",
]


@dataclass
class GluedSpec:
    """Parameters of a connected sum.

    Attributes
    ----------
    epsilon : float
        Neck radius; the second factor is scaled by this.
    epsilon0 : float
        Collar radius on the first factor (> epsilon); triangles of the
        first factor within this distance of the gluing vertex are tagged
        M1_COLLAR instead of M1_BULK.
    x1 : int
        Gluing vertex on the first factor.
    x2 : int
        Gluing vertex on the second factor (default 0; the construction
        is insensitive to the choice).
    n_loop : int, optional
        Ring vertex count override; default max(16, ceil(2 pi / h)) with
        h the second factor's edge length near its unit cut circle.
    D : float, optional
        Graph diameter of the second factor minus its unit ball; filled
        in by connected_sum when absent.
    D_tilde : float, optional
        Graph diameter of the cut circle on the second factor, measured
        through the remaining piece; filled in by connected_sum.
    """

    epsilon: float
    epsilon0: float
    x1: int
    x2: int = 0
    n_loop: int | None = None
    D: float | None = None
    D_tilde: float | None = None

    def validate(self):
        if not 0 < self.epsilon < self.epsilon0:
            raise ValueError("need 0 < epsilon < epsilon0")


@dataclass
class PerforationSpec:
    """Parameters of a perforation.

    Attributes
    ----------
    centers : ndarray of shape (l, 2)
        Hole centres (chart points, not vertex ids).
    radius : float
        Hole radius; every triangle with a vertex within this distance of
        a centre is removed, so holes nest monotonically in the radius on
        a fixed mesh.
    clearance : float, optional
        Distance from the centres to the reference nodal set, recorded by
        the caller; must be positive when given.
    """

    centers: np.ndarray
    radius: float
    clearance: float | None = None

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        if self.centers.size and self.centers.shape[1] != 2:
            raise ValueError("centers must be (l, 2)")

    def validate(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.clearance is not None and not self.clearance > 0:
            raise ValueError("clearance must be positive")
        l = len(self.centers)
        for i in range(l):
            for j in range(i + 1, l):
                d = np.linalg.norm(self.centers[i] - self.centers[j])
                if d <= 2 * self.radius:
                    raise ValueError("perforation balls overlap")


def _double_sweep_diameter(mesh: IntrinsicMesh, start: int = 0) -> float:
    """Graph diameter estimate by two Dijkstra sweeps."""
    d0 = distance_field(mesh, [start])
    a = int(np.argmax(d0))
    da = distance_field(mesh, [a])
    return float(da.max())


def _ring_diameter(mesh: IntrinsicMesh, ring) -> float:
    """Largest graph distance between two ring vertices (double sweep)."""
    ring = np.asarray(ring, dtype=np.int64)
    d0 = distance_field(mesh, [int(ring[0])])
    a = int(ring[np.argmax(d0[ring])])
    da = distance_field(mesh, [a])
    return float(da[ring].max())


def _rigid_align(src: np.ndarray, dst: np.ndarray):
    """Best-fit orthogonal map Q, t with Q @ src[i] + t ~ dst[i].

    Reflections are allowed; the identification of the rings is
    orientation reversing, so the best map frequently has determinant -1.
    """
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    Q = Vt.T @ U.T
    t = cd - Q @ cs
    return Q, t


def _lift(coords: np.ndarray, dim: int) -> np.ndarray:
    if coords.shape[1] == dim:
        return coords
    out = np.zeros((len(coords), dim))
    out[:, :coords.shape[1]] = coords
    return out


def _ring_direction(mesh: IntrinsicMesh, ring) -> int:
    """+1 if ring[0] -> ring[1] follows the boundary traversal, else -1."""
    dedges = set(map(tuple, mesh.directed_boundary_edges()))
    if (int(ring[0]), int(ring[1])) in dedges:
        return 1
    if (int(ring[1]), int(ring[0])) in dedges:
        return -1
    raise RuntimeError("ring vertices are not consecutive on the boundary")


def connected_sum(m1: IntrinsicMesh, m2: IntrinsicMesh,
                  spec: GluedSpec) -> IntrinsicMesh:
    """Glue an epsilon-scaled copy of ``m2`` into a ball removed from ``m1``.

    A unit geodesic ball around ``spec.x2`` is removed from ``m2`` and an
    epsilon ball around ``spec.x1`` from ``m1`` (after local refinement so
    the cut is resolved); both rings get the same vertex count, so after
    scaling ``m2`` by epsilon the ring chords agree exactly and the rings
    are identified vertex by vertex with reversed orientation.

    Region tags on the output: triangles from ``m1`` at distance at least
    ``epsilon0`` from the gluing vertex are M1_BULK, nearer ones
    M1_COLLAR; triangles from ``m2`` are M2 except the stitching band at
    its cut, which is NECK.

    Parameters
    ----------
    m1, m2 : IntrinsicMesh
        Closed oriented surfaces; ``m2`` must resolve a unit ball around
        ``spec.x2`` (edge length below 0.45 near the cut circle).
    spec : GluedSpec
        ``spec.D`` and ``spec.D_tilde`` are filled in.

    Returns
    -------
    IntrinsicMesh
        Closed mesh with Euler characteristic chi(m1) + chi(m2) - 2 and a
        ``glue_info`` attribute: vertex maps of both factors, triangle
        ranges, the welded ring, the first factor's per-triangle distance
        to the gluing vertex (for retagging the collar at a different
        radius), and the spec.

    Raises
    ------
    ValueError
        If a factor is not closed, the diameters violate D > D_tilde, or
        the ring counts cannot match.
    """
    spec.validate()
    for name, m in (("first", m1), ("second", m2)):
        if not m.is_closed:
            raise ValueError(f"{name} factor must be closed")
        if not m.is_oriented:
            raise ValueError(f"{name} factor must be oriented")
    eps = spec.epsilon

    # Second factor: cut the unit ball, fix the ring count.
    cut2 = remove_geodesic_ball(m2, spec.x2, 1.0, n_loop=spec.n_loop)
    info2 = cut2.carve_info
    ring2 = np.asarray(info2["ring"], dtype=np.int64)
    N = len(ring2)

    spec.D = _double_sweep_diameter(cut2)
    spec.D_tilde = _ring_diameter(cut2, ring2)
    if not spec.D > spec.D_tilde:
        raise ValueError(
            "second factor too shallow: diameter %.4g not above cut-circle "
            "diameter %.4g (rescale the factor)" % (spec.D, spec.D_tilde))

    # First factor: refine so the epsilon ring is resolved, then cut.
    chord = 2.0 * eps * np.sin(np.pi / N)
    m1r = refine_near(m1, spec.x1, eps + 6.0 * chord, chord)
    cut1 = remove_geodesic_ball(m1r, spec.x1, eps, n_loop=N)
    info1 = cut1.carve_info
    ring1 = np.asarray(info1["ring"], dtype=np.int64)
    if len(ring1) != N:
        raise ValueError("ring vertex counts differ: %d vs %d" % (len(ring1), N))

    # Region tags (on the pieces, before gluing).
    x1_coord = m1r.coords[spec.x1]
    d1 = chart_distances(cut1, x1_coord)
    tri_min = d1[cut1.tris].min(axis=1)
    cut1.region[:] = np.where(tri_min >= spec.epsilon0,
                              int(RegionTag.M1_BULK), int(RegionTag.M1_COLLAR))
    cut2.region[:] = int(RegionTag.M2)
    cut2.region[info2["zipper_tris"]] = int(RegionTag.NECK)

    # Scale the second factor and move it onto the ring for rendering.
    cut2s = cut2.scaled(eps)
    d1dir = _ring_direction(cut1, ring1)
    d2dir = _ring_direction(cut2, ring2)
    sigma = (-d1dir * d2dir * np.arange(N)) % N
    pair2 = ring2[sigma]

    dim = max(cut1.coords.shape[1], cut2s.coords.shape[1])
    src = _lift(cut2s.coords[pair2], dim)
    dst = _lift(cut1.coords[ring1], dim)
    Q, t = _rigid_align(src, dst)
    cut2s.coords = _lift(cut2s.coords, dim) @ Q.T + t

    glued, offset = concatenate(cut1, cut2s)
    keep = ring1
    drop = pair2 + offset
    glued, old_to_new = identify_vertices(glued, keep, drop)

    if not glued.is_closed:
        raise RuntimeError("glued mesh is not closed")
    if not glued.is_oriented:
        raise RuntimeError("ring identification is not orientation reversing")
    chi_expect = m1.euler_characteristic + m2.euler_characteristic - 2
    if glued.euler_characteristic != chi_expect:
        raise RuntimeError("Euler characteristic %d, expected %d"
                           % (glued.euler_characteristic, chi_expect))

    # Vertex maps: original factor vertex -> glued vertex.
    vmap1_cut = info1["vmap"]
    m1_map = np.full(m1r.n_vertices, -1, dtype=np.int64)
    ok = vmap1_cut >= 0
    m1_map[ok] = old_to_new[vmap1_cut[ok]]
    vmap2_cut = info2["vmap"]
    m2_map = np.full(m2.n_vertices, -1, dtype=np.int64)
    ok = vmap2_cut >= 0
    m2_map[ok] = old_to_new[vmap2_cut[ok] + offset]

    glued.glue_info = {
        "spec": spec,
        "m1_refined": m1r,
        "m2_cut": cut2,
        "m1_map": m1_map,
        "m2_map": m2_map,
        "ring": old_to_new[keep],
        "m1_tris": slice(0, cut1.n_tris),
        "m2_tris": slice(cut1.n_tris, glued.n_tris),
        "m1_tri_dist": tri_min,
        "n_loop": N,
    }
    return glued


def _detect_socket_arc(socket: IntrinsicMesh, tol: float = 1e-9):
    """Boundary vertices of a socket on the unit circle, ordered by angle."""
    bv = socket.boundary_vertices
    p = socket.coords[bv]
    on_circle = np.abs(np.sqrt((p * p).sum(axis=1)) - 1.0) <= tol
    arc = bv[on_circle]
    if len(arc) < 9:
        raise ValueError("socket has no resolved unit-circle arc "
                         "(need at least 9 arc vertices)")
    ang = np.arctan2(socket.coords[arc, 1], socket.coords[arc, 0])
    order = np.argsort(ang)
    arc = arc[order]
    ang = ang[order]
    n = len(arc) - 1
    want = np.pi * np.arange(n + 1) / n
    if np.abs(ang - want).max() > 1e-6:
        raise ValueError("socket arc vertices are not evenly spaced on the "
                         "upper unit half circle")
    return arc


def attach_domain(omega: IntrinsicMesh, omega2: IntrinsicMesh, x1: int,
                  epsilon: float) -> IntrinsicMesh:
    """Replace a boundary half ball of ``omega`` by an epsilon-scaled socket.

    The half ball of radius epsilon around boundary vertex ``x1`` is
    removed (the boundary must be straight there) and ``omega2``, a planar
    piece whose boundary contains the upper unit half circle, is scaled by
    epsilon, moved so its arc lands exactly on the fresh arc, and welded
    vertex by vertex.  The arc vertex count of the socket dictates the
    ring count of the cut.

    Parameters
    ----------
    omega : IntrinsicMesh
        Planar domain (chart "plane") with ``x1`` on its boundary.
    omega2 : IntrinsicMesh
        Socket piece at unit scale; region tags are kept (build_socket
        tags it OMEGA2).
    x1 : int
        Boundary vertex of ``omega``.
    epsilon : float
        Scale of the attached piece.

    Returns
    -------
    IntrinsicMesh
        Planar mesh with one boundary loop, regions OMEGA1/OMEGA2, and an
        ``attach_info`` attribute (vertex maps, ring, triangle ranges).

    Raises
    ------
    ValueError
        If the scaled socket overlaps the remaining domain (the union
        would not be a planar domain), or the socket arc is missing.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if omega.chart != "plane":
        raise ValueError("domain attachment needs a planar domain")
    arc = _detect_socket_arc(omega2)
    n_arc = len(arc) - 1

    chord = 2.0 * epsilon * np.sin(np.pi / (2 * n_arc))
    omr = refine_near(omega, x1, epsilon + 6.0 * chord, chord)
    cut = remove_geodesic_ball(omr, x1, epsilon, n_loop=n_arc)
    info = cut.carve_info
    ring = np.asarray(info["ring"], dtype=np.int64)
    if len(ring) != n_arc + 1:
        raise RuntimeError("cut ring count %d does not match socket arc %d"
                           % (len(ring), n_arc + 1))

    # Scale the socket and place it on the arc: p -> c + eps * (x t + y n).
    _, e1, e2 = info["frame"]
    c = info["center_coord"]
    sock = omega2.scaled(epsilon)
    xy = omega2.coords
    sock.coords = (c[None, :]
                   + epsilon * (xy[:, 0, None] * e1[None, :]
                                + xy[:, 1, None] * e2[None, :]))
    sock.chart = "plane"

    # The union must stay a planar domain: the socket may touch the cut
    # only along the arc.
    loop_cut = cut.boundary_loops()[0]
    loop_sock = sock.boundary_loops()[0]
    poly_cut = Polygon(cut.coords[loop_cut])
    poly_sock = Polygon(sock.coords[loop_sock])
    inter = poly_cut.intersection(poly_sock).area
    if inter > 1e-9 * poly_sock.area:
        raise ValueError("scaled socket overlaps the domain "
                         "(overlap area %.3g)" % inter)

    glued, offset = concatenate(cut, sock)
    glued, old_to_new = identify_vertices(glued, ring, arc + offset)

    loops = glued.boundary_loops()
    if len(loops) != 1:
        raise RuntimeError("attached domain has %d boundary loops" % len(loops))
    if not glued.is_oriented:
        raise RuntimeError("attachment flipped orientation")
    if glued.euler_characteristic != 1:
        raise RuntimeError("attached domain is not a disk")
    glued.chart = "plane"

    vmap_cut = info["vmap"]
    om_map = np.full(omr.n_vertices, -1, dtype=np.int64)
    ok = vmap_cut >= 0
    om_map[ok] = old_to_new[vmap_cut[ok]]
    sock_map = old_to_new[np.arange(omega2.n_vertices) + offset]

    glued.attach_info = {
        "x1": int(x1),
        "epsilon": float(epsilon),
        "omega_refined": omr,
        "omega_map": om_map,
        "socket_map": sock_map,
        "ring": old_to_new[ring],
        "omega_tris": slice(0, cut.n_tris),
        "socket_tris": slice(cut.n_tris, glued.n_tris),
        "n_arc": n_arc,
    }
    return glued


def perforate(omega: IntrinsicMesh, spec: PerforationSpec) -> IntrinsicMesh:
    """Remove small balls around interior points of a planar domain.

    Every triangle with a vertex within ``spec.radius`` of a centre is
    removed, so for a fixed mesh the removed sets nest monotonically in
    the radius, and the surviving P1 space (all boundary clamped) is a
    subspace of the original one: discrete Dirichlet eigenvalues never
    decrease under perforation.  The mesh is never refined here; refine
    near the centres first so the radius is resolved.

    Parameters
    ----------
    omega : IntrinsicMesh
        Planar domain.
    spec : PerforationSpec
        With no centres the copy is returned unchanged (identity).

    Returns
    -------
    IntrinsicMesh
        Domain with one boundary loop per hole plus the outer one, and a
        ``perforation_info`` attribute (vertex map, kept triangles,
        removed area).

    Raises
    ------
    ValueError
        If a ball reaches the outer boundary, balls merge, or a ball is
        below the local mesh resolution (removes no vertex).
    """
    spec.validate()
    if omega.chart != "plane":
        raise ValueError("perforation needs a planar domain")
    l = len(spec.centers)
    if l == 0:
        out = omega.copy()
        out.perforation_info = {
            "vmap": np.arange(omega.n_vertices, dtype=np.int64),
            "tri_ids": np.arange(omega.n_tris, dtype=np.int64),
            "removed_area": 0.0,
            "n_holes": 0,
        }
        return out

    n_outer = len(omega.boundary_loops())
    inside = np.zeros(omega.n_vertices, dtype=bool)
    for c in spec.centers:
        d = np.sqrt(((omega.coords - c[None, :]) ** 2).sum(axis=1))
        hit = d <= spec.radius
        if not np.any(hit):
            raise ValueError("a perforation ball contains no vertex "
                             "(radius below mesh resolution)")
        binside = np.zeros(omega.n_vertices, dtype=bool)
        binside[omega.boundary_vertices] = True
        if np.any(hit & binside):
            raise ValueError("a perforation ball touches the outer boundary")
        inside |= hit

    tri_keep = ~np.any(inside[omega.tris], axis=1)
    sub, vmap, tri_ids = omega.submesh(tri_keep)
    loops = sub.boundary_loops()
    if len(loops) != n_outer + l:
        raise ValueError("expected %d boundary loops, found %d "
                         "(balls merged or out of place)"
                         % (n_outer + l, len(loops)))
    sub.perforation_info = {
        "vmap": vmap,
        "tri_ids": tri_ids,
        "removed_area": float(omega.total_area - sub.total_area),
        "n_holes": l,
    }
    return sub


def select_surgery_vertex(spectrum, m: int, on_boundary: bool = False,
                          cluster_tol: float = 5e-3) -> int:
    """Vertex with the most room from every low nodal set.

    The perturbation theorems presume the surgery site stays clear of the
    nodal sets of the first m eigenfunctions (the collar around the site
    must not meet them), so the natural default is the vertex maximising
    the smallest distance to any of them.  Simple eigenvalues contribute
    the geodesic distance to their nodal set.  A degenerate cluster has
    no preferred member (some rotation of its basis vanishes along a
    curve through almost every point), so it contributes a rotation
    invariant proxy instead: the pointwise cluster amplitude over its
    peak, divided by the frequency scale sqrt(lambda).  That is the
    clearance the balanced basis at the chosen point can bank on.

    Parameters
    ----------
    spectrum : Spectrum
        Solved eigenpairs of the unperturbed mesh.
    m : int
        Largest eigenfunction index whose nodal set is kept clear.
    on_boundary : bool
        Restrict the choice to boundary vertices (for boundary
        attachments) instead of interior ones.
    cluster_tol : float
        Relative gap below which consecutive eigenvalues count as one
        cluster.

    Returns
    -------
    int
        Vertex index; ties resolve to the lowest index.
    """
    from .eigen import cluster_eigenvalues
    from .nodal import extract_level_set, nodal_distance_field

    mesh = spectrum.operator.mesh
    if m >= spectrum.m:
        raise ValueError("spectrum has only %d eigenpairs, need index %d"
                         % (spectrum.m, m))
    ring = None
    if on_boundary:
        # Cluster amplitudes vanish along a clamped boundary, so they are
        # probed over the one-ring of each candidate instead.
        ring = [[] for _ in range(mesh.n_vertices)]
        for tri in mesh.tris:
            for a in range(3):
                ring[tri[a]].append(tri[(a + 1) % 3])
                ring[tri[a]].append(tri[(a + 2) % 3])
    score = np.full(mesh.n_vertices, np.inf)
    for grp in cluster_eigenvalues(spectrum.lam, cluster_tol):
        idx = [l for l in grp]
        if idx[0] > m:
            break
        if len(idx) == 1:
            l = idx[0]
            ns = extract_level_set(mesh, spectrum.vecs[:, l])
            if ns.is_empty:
                continue
            d = nodal_distance_field(mesh, ns, include_boundary=False)
            score = np.minimum(score, d)
            continue
        amp = np.linalg.norm(spectrum.vecs[:, idx], axis=1)
        if ring is not None:
            amp = np.array([max(amp[v], max((amp[w] for w in ring[v]),
                                            default=0.0))
                            for v in range(mesh.n_vertices)])
        peak = float(amp.max())
        lam_c = float(np.mean(spectrum.lam[idx]))
        if peak <= 0 or lam_c <= 0:
            continue
        proxy = amp / (peak * np.sqrt(lam_c))
        score = np.minimum(score, proxy)
    allowed = np.ones(mesh.n_vertices, dtype=bool)
    if not mesh.is_closed:
        on_bd = np.zeros(mesh.n_vertices, dtype=bool)
        for loop in mesh.boundary_loops():
            on_bd[loop] = True
        allowed = on_bd if on_boundary else ~on_bd
    elif on_boundary:
        raise ValueError("closed mesh has no boundary to attach to")
    if not np.isfinite(score[allowed].max()):
        # No nodal set at all below m; any allowed vertex works.
        return int(np.flatnonzero(allowed)[0])
    score = np.where(allowed, score, -np.inf)
    return int(np.argmax(score))


def choose_epsilon0(spectrum, m: int, x1: int) -> float:
    """Collar radius from measured nodal clearance.

    One third of the smallest geodesic distance from ``x1`` to the nodal
    set of any eigenfunction up to index ``m`` (0-based within the given
    spectrum), capped by the injectivity scale at ``x1``; with no
    nonempty nodal set below ``m`` the cap alone decides.  Rejects ``x1``
    on (or at mesh distance zero from) a nodal set.

    Parameters
    ----------
    spectrum : Spectrum
        Solved eigenpairs of the unperturbed mesh.
    m : int
        Largest eigenfunction index that must keep its nodal set clear of
        the ball ``B(x1, 3 eps0)``.
    x1 : int
        Candidate gluing vertex.

    Returns
    -------
    float
    """
    from .nodal import extract_level_set, nodal_distance_field

    op = spectrum.operator
    mesh = op.mesh
    if m >= spectrum.m:
        raise ValueError("spectrum has only %d eigenpairs, need index %d"
                         % (spectrum.m, m))
    cap = injectivity_cap(mesh, int(x1))
    best = np.inf
    for l in range(m + 1):
        ns = extract_level_set(mesh, spectrum.vecs[:, l])
        if ns.is_empty:
            continue
        d = nodal_distance_field(mesh, ns, include_boundary=False)
        dl = float(d[int(x1)])
        if dl <= 0:
            raise ValueError("vertex %d lies on the nodal set of "
                             "eigenfunction %d" % (x1, l))
        best = min(best, dl)
    if not np.isfinite(best):
        return float(cap)
    return float(min(best / 3.0, cap))
