"""Nodal sets and nodal domains of piecewise linear functions.

A P1 function on an intrinsic mesh crosses a level along straight segments,
one per straddling triangle, with endpoints on the triangle's edges.  This
module extracts those segments, counts the sign components they bound,
classifies where the zero set sits relative to the region tags of a glued
mesh, and measures the distances the experiments are built on (Hausdorff
distance between zero sets, distance fields to the zero set, inner radii,
boundary contact).

Vertices where the function is exactly at the level are shifted by a tiny
positive amount before extraction so the zero set misses vertices
generically.  The one exception is structural zeros: on meshes with
boundary, boundary vertices at the level (Dirichlet eigenvectors vanish
there exactly) are kept at the level and treated as unsigned, otherwise the
spurious signed film along the wall would merge sign components that are
genuinely separated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .mesh.intrinsic import IntrinsicMesh, RegionTag
from .mesh.geodesic import distance_field

__all__ = [
    "NodalSet",
    "NodalDomains",
    "ContainmentVerdict",
    "PayneReport",
    "extract_level_set",
    "count_domains",
    "hausdorff",
    "classify_containment",
    "wavelength_density",
    "inner_radius",
    "nodal_distance_field",
    "payne_check",
    "dump_nodal_csv",
]

TIEBREAK = 1e-14

_INSIDE_TAGS = (int(RegionTag.M1_BULK), int(RegionTag.OMEGA1))
_OUTSIDE_TAGS = (int(RegionTag.M1_COLLAR), int(RegionTag.NECK),
                 int(RegionTag.M2), int(RegionTag.OMEGA2))


def _signed_values(mesh, u, alpha):
    """Shifted values and integer signs of ``u - alpha``.

    Interior vertices exactly at the level are shifted by
    ``+1e-14 * max|u - alpha|``; boundary vertices exactly at the level
    keep sign 0 (structural Dirichlet zeros).  Returns
    ``(work, sign, n_tiebreaks)``.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("u must have one value per vertex")
    work = u - alpha
    if not np.any(work != 0.0):
        raise ValueError("function is identically at the level")
    eta = TIEBREAK * np.abs(work).max()
    zero = work == 0.0
    interior_zero = zero.copy()
    bv = mesh.boundary_vertices
    if len(bv):
        bmask = np.zeros(mesh.n_vertices, dtype=bool)
        bmask[bv] = True
        interior_zero &= ~bmask
    if np.any(interior_zero):
        work = work.copy()
        work[interior_zero] = eta
    sign = np.sign(work).astype(np.int8)
    return work, sign, int(interior_zero.sum())


def _chart_delta(mesh, pa, pb):
    """Displacement ``pb - pa``, minimal image on the torus."""
    d = np.asarray(pb, dtype=np.float64) - np.asarray(pa, dtype=np.float64)
    if mesh.chart == "torus":
        d -= mesh.period * np.round(d / mesh.period)
    return d


@dataclass
class NodalSet:
    """Level set of a P1 function, as segments inside straddling triangles.

    Crossing points are computed once per mesh edge (parameter measured
    from the smaller vertex index), so the point on a shared edge is
    bitwise identical from both adjacent triangles.  Points come in two
    kinds: edge crossings (strict sign change) and at-level boundary
    vertices.

    Attributes
    ----------
    mesh : IntrinsicMesh
    alpha : float
        The level.
    pt_kind : ndarray of shape (P,)
        0 for an edge crossing, 1 for an at-level vertex.
    pt_ref : ndarray of shape (P,)
        Edge index for kind 0, vertex index for kind 1.
    pt_t : ndarray of shape (P,)
        Parameter along the edge from its smaller vertex (0 for kind 1).
    pt_coords : ndarray of shape (P, dim)
        Chart coordinates of the points (linear interpolation).
    segments : ndarray of shape (S, 2)
        Point indices of each segment.
    seg_tri : ndarray of shape (S,)
        Host triangle of each segment.
    seg_region : ndarray of shape (S,)
        Region tag of the host triangle.
    seg_component : ndarray of shape (S,)
        Connected component id of each segment (shared points connect).
    n_components : int
    n_tiebreaks : int
        Interior vertices that sat exactly at the level and were shifted.
    degenerate_tris : ndarray
        Triangles whose three vertices all sit at the level (the function
        vanishes on them identically); they carry no segment.
    """

    mesh: IntrinsicMesh
    alpha: float
    pt_kind: np.ndarray
    pt_ref: np.ndarray
    pt_t: np.ndarray
    pt_coords: np.ndarray
    segments: np.ndarray
    seg_tri: np.ndarray
    seg_region: np.ndarray
    seg_component: np.ndarray
    n_components: int
    n_tiebreaks: int
    degenerate_tris: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.segments) == 0

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def seg_lengths(self):
        """Length of every segment (chart-aware on the torus)."""
        if self.is_empty:
            return np.empty(0)
        a = self.pt_coords[self.segments[:, 0]]
        b = self.pt_coords[self.segments[:, 1]]
        d = b - a
        if self.mesh.chart == "torus":
            d -= self.mesh.period * np.round(d / self.mesh.period)
        return np.sqrt((d * d).sum(axis=1))

    @property
    def total_length(self) -> float:
        return float(self.seg_lengths().sum())

    def sample(self, pitch: float):
        """Dense point sample of all segments at the given pitch.

        Every segment contributes both endpoints plus interior points so
        that consecutive samples are at most ``pitch`` apart.
        """
        if self.is_empty:
            return np.empty((0, self.pt_coords.shape[1]))
        if pitch <= 0:
            raise ValueError("pitch must be positive")
        a = self.pt_coords[self.segments[:, 0]]
        b = self.pt_coords[self.segments[:, 1]]
        d = b - a
        if self.mesh.chart == "torus":
            d -= self.mesh.period * np.round(d / self.mesh.period)
        lens = np.sqrt((d * d).sum(axis=1))
        out = []
        for i in range(len(lens)):
            n = max(1, int(np.ceil(lens[i] / pitch)))
            ts = np.linspace(0.0, 1.0, n + 1)
            out.append(a[i] + ts[:, None] * d[i])
        return np.concatenate(out, axis=0)

    def component_tags(self):
        """Sorted unique region tags of each component, as a list of tuples."""
        out = []
        for c in range(self.n_components):
            tags = np.unique(self.seg_region[self.seg_component == c])
            out.append(tuple(int(t) for t in tags))
        return out


def extract_level_set(mesh: IntrinsicMesh, u, alpha: float = 0.0) -> NodalSet:
    """Extract the level set ``{u = alpha}`` of a P1 vertex function.

    Marching triangles: each edge whose endpoint signs differ strictly
    gets one crossing point by linear interpolation; each triangle with
    two level points gets one straight segment.  Boundary vertices
    exactly at the level count as level points, so Dirichlet nodal lines
    reach the wall; segments that would lie along a boundary edge (the
    wall itself) are not emitted.

    Parameters
    ----------
    mesh : IntrinsicMesh
    u : array_like of shape (V,)
    alpha : float
        The level (default 0).

    Returns
    -------
    NodalSet
    """
    work, sign, n_tiebreaks = _signed_values(mesh, u, alpha)
    nv = mesh.n_vertices
    edges = mesh.edges

    sa = sign[edges[:, 0]]
    sb = sign[edges[:, 1]]
    crossing = sa * sb < 0

    # Canonical crossing parameter, measured from the smaller vertex.
    pt_edge_ids = np.nonzero(crossing)[0]
    wa = work[edges[pt_edge_ids, 0]]
    wb = work[edges[pt_edge_ids, 1]]
    t = wa / (wa - wb)

    dim = mesh.coords.shape[1]
    ca = mesh.coords[edges[pt_edge_ids, 0]]
    cb = mesh.coords[edges[pt_edge_ids, 1]]
    delta = cb - ca
    if mesh.chart == "torus":
        delta -= mesh.period * np.round(delta / mesh.period)
    cross_coords = ca + t[:, None] * delta

    point_of_edge = np.full(mesh.n_edges, -1, dtype=np.int64)
    point_of_edge[pt_edge_ids] = np.arange(len(pt_edge_ids))

    # At-level vertices (sign 0, only structural boundary zeros survive
    # _signed_values) become points of their own.
    zero_verts = np.nonzero(sign == 0)[0]
    point_of_vert = np.full(nv, -1, dtype=np.int64)
    point_of_vert[zero_verts] = len(pt_edge_ids) + np.arange(len(zero_verts))

    pt_kind = np.concatenate([
        np.zeros(len(pt_edge_ids), dtype=np.int8),
        np.ones(len(zero_verts), dtype=np.int8)])
    pt_ref = np.concatenate([pt_edge_ids, zero_verts])
    pt_t = np.concatenate([t, np.zeros(len(zero_verts))])
    pt_coords = np.concatenate([cross_coords, mesh.coords[zero_verts]], axis=0) \
        if len(pt_edge_ids) + len(zero_verts) else np.empty((0, dim))

    bnd_edge = mesh.boundary_edge_mask

    seg_pts, seg_tri = [], []
    tris = mesh.tris
    tsign = sign[tris]
    # Only triangles that can host a point are visited.
    active = np.nonzero(np.any(tsign <= 0, axis=1) & np.any(tsign >= 0, axis=1))[0]
    degenerate = []
    for ti in active:
        vs = tris[ti]
        pts = []
        for k in range(3):
            e = mesh.tri_edges[ti, k]
            p = point_of_edge[e]
            if p >= 0:
                pts.append(p)
        nz = [point_of_vert[v] for v in vs if point_of_vert[v] >= 0]
        pts.extend(nz)
        if len(pts) < 2:
            continue
        if len(pts) == 3:
            degenerate.append(ti)
            continue
        p0, p1 = pts
        if pt_kind[p0] == 1 and pt_kind[p1] == 1:
            # Both endpoints are at-level vertices; the segment runs along
            # an edge of the triangle.  Emit it only if that edge is
            # interior (a genuine nodal edge), not the wall itself.
            va, vb = pt_ref[p0], pt_ref[p1]
            lo, hi = (va, vb) if va < vb else (vb, va)
            eid = np.searchsorted(edges[:, 0], lo)
            while eid < len(edges) and edges[eid, 0] == lo and edges[eid, 1] != hi:
                eid += 1
            if eid < len(edges) and edges[eid, 0] == lo and edges[eid, 1] == hi \
                    and bnd_edge[eid]:
                continue
        seg_pts.append((p0, p1))
        seg_tri.append(ti)

    segments = np.asarray(seg_pts, dtype=np.int64).reshape(-1, 2)
    seg_tri = np.asarray(seg_tri, dtype=np.int64)
    seg_region = mesh.region[seg_tri] if len(seg_tri) else np.empty(0, dtype=mesh.region.dtype)

    # Keep only points a segment actually uses (at-level boundary
    # vertices away from the zero set would otherwise linger as orphans
    # and pollute the distance seeds).
    used = np.zeros(len(pt_kind), dtype=bool)
    if len(segments):
        used[segments.ravel()] = True
    new_id = np.cumsum(used) - 1
    pt_kind = pt_kind[used]
    pt_ref = pt_ref[used]
    pt_t = pt_t[used]
    pt_coords = pt_coords[used]
    if len(segments):
        segments = new_id[segments]

    # Components of the segment adjacency graph (shared points connect).
    ns = len(segments)
    if ns:
        first_seg = {}
        rows, cols = [], []
        for si in range(ns):
            for p in segments[si]:
                if p in first_seg:
                    rows.append(first_seg[p])
                    cols.append(si)
                else:
                    first_seg[p] = si
        g = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(ns, ns))
        n_comp, labels = connected_components(g, directed=False)
    else:
        n_comp, labels = 0, np.empty(0, dtype=np.int64)

    return NodalSet(mesh=mesh, alpha=float(alpha),
                    pt_kind=pt_kind, pt_ref=pt_ref, pt_t=pt_t,
                    pt_coords=pt_coords,
                    segments=segments, seg_tri=seg_tri,
                    seg_region=np.asarray(seg_region, dtype=np.int64),
                    seg_component=labels, n_components=int(n_comp),
                    n_tiebreaks=n_tiebreaks,
                    degenerate_tris=np.asarray(degenerate, dtype=np.int64))


@dataclass
class NodalDomains:
    """Sign components of a P1 function.

    Straddling triangles are split into their positive and negative
    fragments by the (implicit) nodal segments; fragments connect across
    an edge when the edge has an endpoint of their sign.  Unsigned
    (at-level) vertices belong to no domain.

    Attributes
    ----------
    mesh : IntrinsicMesh
    sign : ndarray of shape (V,)
        Vertex signs in {-1, 0, +1} after the tiebreak.
    count : int
        Number of nodal domains.
    vertex_domain : ndarray of shape (V,)
        Domain id of each signed vertex, -1 for unsigned vertices.
    tri_domain : ndarray of shape (T, 2)
        Domain ids of the (positive, negative) fragment of each triangle,
        -1 where absent.  Uniform triangles fill only their sign's slot.
    domain_sign : ndarray of shape (count,)
    domain_area : ndarray of shape (count,)
        Fragment areas; straddling triangles contribute the exact P1
        split fractions.
    n_straddling : int
    """

    mesh: IntrinsicMesh
    u: np.ndarray
    alpha: float
    sign: np.ndarray
    count: int
    vertex_domain: np.ndarray
    tri_domain: np.ndarray
    domain_sign: np.ndarray
    domain_area: np.ndarray
    n_straddling: int


def count_domains(mesh: IntrinsicMesh, u, alpha: float = 0.0) -> NodalDomains:
    """Count the connected sign components of ``u - alpha``.

    Parameters
    ----------
    mesh : IntrinsicMesh
    u : array_like of shape (V,)
    alpha : float

    Returns
    -------
    NodalDomains

    Raises
    ------
    ValueError
        If the level set passes through every triangle (no uniformly
        signed triangle exists, the function is indistinguishable from
        the level everywhere at mesh resolution).
    """
    work, sign, _ = _signed_values(mesh, u, alpha)
    tris = mesh.tris
    nt = mesh.n_tris
    tsign = sign[tris]

    has_plus = np.any(tsign > 0, axis=1)
    has_minus = np.any(tsign < 0, axis=1)
    uniform = has_plus ^ has_minus
    straddling = has_plus & has_minus
    if not np.any(uniform):
        raise ValueError("level set passes through every triangle; "
                         "function is at the level everywhere at mesh scale")

    frag_plus = np.full(nt, -1, dtype=np.int64)
    frag_minus = np.full(nt, -1, dtype=np.int64)
    ids_p = np.nonzero(has_plus)[0]
    frag_plus[ids_p] = np.arange(len(ids_p))
    ids_m = np.nonzero(has_minus)[0]
    frag_minus[ids_m] = len(ids_p) + np.arange(len(ids_m))
    n_frag = len(ids_p) + len(ids_m)

    # Fragments connect across an interior edge when the edge has an
    # endpoint of their sign (the open sign region crosses the edge there).
    interior = ~mesh.boundary_edge_mask
    e = mesh.edges[interior]
    t1 = mesh.edge_tri[interior, 0]
    t2 = mesh.edge_tri[interior, 1]
    es = sign[e]
    rows, cols = [], []
    link_p = np.any(es > 0, axis=1)
    rows.append(frag_plus[t1[link_p]])
    cols.append(frag_plus[t2[link_p]])
    link_m = np.any(es < 0, axis=1)
    rows.append(frag_minus[t1[link_m]])
    cols.append(frag_minus[t2[link_m]])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                          shape=(n_frag, n_frag))
    count, frag_label = connected_components(g, directed=False)

    # Exact P1 area split of straddling triangles.
    area = mesh.areas
    frag_area = np.zeros(n_frag)
    uni_p = uniform & has_plus
    uni_m = uniform & has_minus
    frag_area[frag_plus[uni_p]] = area[uni_p]
    frag_area[frag_minus[uni_m]] = area[uni_m]
    for ti in np.nonzero(straddling)[0]:
        s = tsign[ti]
        w = work[tris[ti]]
        n_z = int((s == 0).sum())
        if n_z == 0:
            # Lone sign at local vertex k, fractions from the two
            # crossing parameters measured from k.
            if s[0] == s[1]:
                k = 2
            elif s[0] == s[2]:
                k = 1
            else:
                k = 0
            i, j = (k + 1) % 3, (k + 2) % 3
            ti_frac = w[k] / (w[k] - w[i])
            tj_frac = w[k] / (w[k] - w[j])
            lone = ti_frac * tj_frac * area[ti]
            if s[k] > 0:
                frag_area[frag_plus[ti]] += lone
                frag_area[frag_minus[ti]] += area[ti] - lone
            else:
                frag_area[frag_minus[ti]] += lone
                frag_area[frag_plus[ti]] += area[ti] - lone
        elif n_z == 1:
            k = int(np.nonzero(s == 0)[0][0])
            i, j = (k + 1) % 3, (k + 2) % 3
            # Crossing on edge (i, j); fraction from the positive side.
            tp = w[i] / (w[i] - w[j])  # parameter from i
            if s[i] > 0:
                frag_area[frag_plus[ti]] += tp * area[ti]
                frag_area[frag_minus[ti]] += (1.0 - tp) * area[ti]
            else:
                frag_area[frag_minus[ti]] += tp * area[ti]
                frag_area[frag_plus[ti]] += (1.0 - tp) * area[ti]
        else:
            # Two at-level vertices: the signed fragment is the whole
            # open triangle.
            k = int(np.nonzero(s != 0)[0][0])
            if s[k] > 0:
                frag_area[frag_plus[ti]] += area[ti]
            else:
                frag_area[frag_minus[ti]] += area[ti]

    domain_area = np.bincount(frag_label, weights=frag_area, minlength=count)
    domain_sign = np.zeros(count, dtype=np.int8)
    domain_sign[frag_label[frag_plus[ids_p]]] = 1
    domain_sign[frag_label[frag_minus[ids_m]]] = -1

    tri_domain = np.full((nt, 2), -1, dtype=np.int64)
    tri_domain[ids_p, 0] = frag_label[frag_plus[ids_p]]
    tri_domain[ids_m, 1] = frag_label[frag_minus[ids_m]]

    # A signed vertex inherits the domain of any incident fragment of its
    # sign; all incident fragments of that sign share one domain.
    vertex_domain = np.full(mesh.n_vertices, -1, dtype=np.int64)
    for k in range(3):
        vs = tris[:, k]
        sp = sign[vs] > 0
        sel = sp & (tri_domain[:, 0] >= 0)
        vertex_domain[vs[sel]] = tri_domain[sel, 0]
        sm = sign[vs] < 0
        sel = sm & (tri_domain[:, 1] >= 0)
        vertex_domain[vs[sel]] = tri_domain[sel, 1]

    return NodalDomains(mesh=mesh, u=np.asarray(u, dtype=np.float64),
                        alpha=float(alpha), sign=sign, count=int(count),
                        vertex_domain=vertex_domain, tri_domain=tri_domain,
                        domain_sign=domain_sign, domain_area=domain_area,
                        n_straddling=int(straddling.sum()))


def hausdorff(a: NodalSet, b: NodalSet) -> float:
    """Symmetric Hausdorff distance between two level sets.

    Segments are densely sampled at pitch ``h / 4`` (h the smaller of the
    two median edge lengths); on the torus the clouds are compared up to
    the period.

    Raises
    ------
    ValueError
        If either set is empty.
    """
    if a.is_empty or b.is_empty:
        raise ValueError("Hausdorff distance needs nonempty sets")
    pitch = 0.25 * min(a.mesh.median_edge, b.mesh.median_edge)
    pa = a.sample(pitch)
    pb = b.sample(pitch)
    if pa.shape[1] != pb.shape[1]:
        raise ValueError("sets live in different coordinate dimensions")

    def replicate(pts, mesh):
        if mesh.chart != "torus":
            return pts
        P = mesh.period
        shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)],
                          dtype=np.float64) * P
        return (pts[None, :, :] + shifts[:, None, :]).reshape(-1, 2)

    d_ab = cKDTree(replicate(pb, b.mesh)).query(pa)[0].max()
    d_ba = cKDTree(replicate(pa, a.mesh)).query(pb)[0].max()
    return float(max(d_ab, d_ba))


@dataclass
class ContainmentVerdict:
    """Where a nodal set sits relative to the tagged regions of a glued mesh.

    ``classification`` is one of ``CONTAINED_IN_M1_EPS0`` (every segment
    in the untouched bulk), ``CASE_C`` (some component crosses from the
    bulk into the modified region, and no component lies wholly in the
    modified region), ``CASE_D1`` (a crossing component and additionally
    a component wholly in the modified region), ``CASE_D2`` (no crossing
    component, but a component wholly in the modified region), or
    ``EMPTY_IN_M1`` (no segment in the bulk at all).

    Witnesses: for crossing components the recorded points sit where the
    component changes region (on the bulk interface, within a mesh cell);
    for wholly separated components a representative point each.
    """

    classification: str
    witnesses: list
    component_tags: list
    n_components: int


def classify_containment(mesh: IntrinsicMesh, nodal: NodalSet) -> ContainmentVerdict:
    """Classify a nodal set against the region tags of its (glued) mesh.

    The bulk is region ``M1_BULK`` (``OMEGA1`` for planar attachments);
    everything else (collar, neck, second factor, socket) counts as the
    modified region.  An empty nodal set is vacuously contained.

    Parameters
    ----------
    mesh : IntrinsicMesh
        The mesh the nodal set was extracted on (tags must be present).
    nodal : NodalSet
    """
    if nodal.mesh is not mesh:
        raise ValueError("nodal set was extracted on a different mesh")
    tags = nodal.component_tags()
    if nodal.is_empty:
        return ContainmentVerdict("CONTAINED_IN_M1_EPS0", [], tags, 0)

    inside = set(_INSIDE_TAGS)
    comp_in, comp_out, comp_cross = [], [], []
    for c, tg in enumerate(tags):
        tset = set(tg)
        if tset <= inside:
            comp_in.append(c)
        elif tset & inside:
            comp_cross.append(c)
        else:
            comp_out.append(c)

    if not comp_in and not comp_cross:
        wit = [_component_point(nodal, c) for c in comp_out]
        return ContainmentVerdict("EMPTY_IN_M1", wit, tags, nodal.n_components)
    if not comp_cross and not comp_out:
        return ContainmentVerdict("CONTAINED_IN_M1_EPS0", [], tags,
                                  nodal.n_components)
    if comp_cross and not comp_out:
        wit = [_interface_point(nodal, c) for c in comp_cross]
        return ContainmentVerdict("CASE_C", wit, tags, nodal.n_components)
    if comp_cross and comp_out:
        wit = ([_interface_point(nodal, c) for c in comp_cross]
               + [_component_point(nodal, c) for c in comp_out])
        return ContainmentVerdict("CASE_D1", wit, tags, nodal.n_components)
    wit = [_component_point(nodal, c) for c in comp_out]
    return ContainmentVerdict("CASE_D2", wit, tags, nodal.n_components)


def _component_point(nodal, c):
    """A representative point of component c (first segment midpoint)."""
    si = int(np.nonzero(nodal.seg_component == c)[0][0])
    a = nodal.pt_coords[nodal.segments[si, 0]]
    b = nodal.pt_coords[nodal.segments[si, 1]]
    return a + 0.5 * _chart_delta(nodal.mesh, a, b)


def _interface_point(nodal, c):
    """A point where component c changes between bulk and modified tags."""
    segs = np.nonzero(nodal.seg_component == c)[0]
    in_bulk = np.isin(nodal.seg_region[segs], _INSIDE_TAGS)
    tag_of_point = {}
    for si, b in zip(segs, in_bulk):
        for p in nodal.segments[si]:
            prev = tag_of_point.get(p)
            if prev is None:
                tag_of_point[p] = bool(b)
            elif prev != bool(b):
                return nodal.pt_coords[p].copy()
    # Fall back to any point of the component (should not happen for a
    # genuinely crossing component).
    return _component_point(nodal, c)


def nodal_distance_field(mesh: IntrinsicMesh, nodal: NodalSet,
                         include_boundary: bool = True):
    """Geodesic distance from every vertex to the zero set.

    Crossing points seed their edge's endpoints with the partial edge
    lengths; at-level vertices seed directly.  When the mesh has a
    boundary and ``include_boundary`` is set, boundary vertices seed at
    distance zero (the zero set of a Dirichlet eigenfunction contains
    the wall); without it the wall does not count as zero set, so
    at-level vertices sitting on the boundary are skipped and only the
    interior nodal lines seed.

    Returns
    -------
    ndarray of shape (V,)
    """
    seeds, offs = [], []
    edge_pts = nodal.pt_kind == 0
    eids = nodal.pt_ref[edge_pts]
    ts = nodal.pt_t[edge_pts]
    if len(eids):
        L = mesh.lengths[eids]
        seeds.append(mesh.edges[eids, 0])
        offs.append(ts * L)
        seeds.append(mesh.edges[eids, 1])
        offs.append((1.0 - ts) * L)
    vids = nodal.pt_ref[nodal.pt_kind == 1]
    if len(vids) and not include_boundary and not mesh.is_closed:
        on_bd = np.zeros(mesh.n_vertices, dtype=bool)
        on_bd[mesh.boundary_vertices] = True
        vids = vids[~on_bd[vids]]
    if len(vids):
        seeds.append(vids)
        offs.append(np.zeros(len(vids)))
    if include_boundary and not mesh.is_closed:
        bv = mesh.boundary_vertices
        seeds.append(bv)
        offs.append(np.zeros(len(bv)))
    if not seeds:
        raise ValueError("empty zero set and no boundary: no seeds")
    return distance_field(mesh, np.concatenate(seeds), np.concatenate(offs))


def wavelength_density(mesh: IntrinsicMesh, nodal: NodalSet, lam: float) -> float:
    """Scaled fill distance ``sqrt(lam) * max_x dist(x, zero set)``.

    Measures how densely the zero set fills the surface on the scale of
    the wavelength; for separable square modes the limit is pi/sqrt(2).
    On meshes with boundary, the boundary counts as part of the zero set
    (Dirichlet convention).

    Raises
    ------
    ValueError
        If the zero set is empty on a closed surface (constant mode) or
        lam is not positive.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if nodal.is_empty and mesh.is_closed:
        raise ValueError("empty zero set: fill distance undefined")
    d = nodal_distance_field(mesh, nodal)
    return float(np.sqrt(lam) * d.max())


def inner_radius(domains: NodalDomains):
    """Inner radius estimate of every nodal domain.

    For each domain, the maximum over its vertices of the geodesic
    distance to the domain boundary (zero set, plus the wall on meshes
    with boundary).

    Returns
    -------
    ndarray of shape (count,)
    """
    nodal = extract_level_set(domains.mesh, domains.u, domains.alpha)
    if nodal.is_empty and domains.mesh.is_closed:
        # Constant sign on a closed surface: single domain covering
        # everything, no boundary to measure from.
        return np.array([np.inf] * domains.count)
    d = nodal_distance_field(domains.mesh, nodal)
    out = np.zeros(domains.count)
    for dom in range(domains.count):
        mask = domains.vertex_domain == dom
        if np.any(mask):
            out[dom] = d[mask].max()
    return out


@dataclass
class PayneReport:
    """Boundary contact of a nodal set.

    ``touches`` is true when the minimum distance from the nodal segments
    to the outer boundary is at most ``touch_tol`` (default twice the
    median edge length; a P1 nodal line cannot resolve contact below mesh
    scale).
    """

    touches: bool
    min_dist: float
    touch_tol: float
    witness: np.ndarray


def payne_check(mesh: IntrinsicMesh, u, touch_tol: float | None = None) -> PayneReport:
    """Does the nodal set of ``u`` touch the boundary?

    Parameters
    ----------
    mesh : IntrinsicMesh
        Must have a boundary.
    u : array_like of shape (V,)
        Eigenvector (typically the second Dirichlet eigenfunction).
    touch_tol : float, optional
        Contact tolerance; default ``2 * median edge length``.

    Returns
    -------
    PayneReport
    """
    if mesh.is_closed:
        raise ValueError("boundary contact needs a mesh with boundary")
    if touch_tol is None:
        touch_tol = 2.0 * mesh.median_edge
    nodal = extract_level_set(mesh, u, 0.0)
    if nodal.is_empty:
        raise ValueError("empty nodal set")
    bv = mesh.boundary_vertices
    fb = distance_field(mesh, bv)

    # Distance of each nodal point to the wall, bounded through the edge
    # endpoints (exact for at-level boundary vertices).
    edge_pts = nodal.pt_kind == 0
    eids = nodal.pt_ref[edge_pts]
    ts = nodal.pt_t[edge_pts]
    best = np.inf
    witness = None
    if len(eids):
        L = mesh.lengths[eids]
        da = fb[mesh.edges[eids, 0]] + ts * L
        db = fb[mesh.edges[eids, 1]] + (1.0 - ts) * L
        d = np.minimum(da, db)
        i = int(np.argmin(d))
        best = float(d[i])
        witness = nodal.pt_coords[np.nonzero(edge_pts)[0][i]].copy()
    vids = nodal.pt_ref[nodal.pt_kind == 1]
    if len(vids):
        dv = fb[vids]
        i = int(np.argmin(dv))
        if dv[i] < best:
            best = float(dv[i])
            witness = mesh.coords[vids[i]].copy()
    return PayneReport(touches=bool(best <= touch_tol), min_dist=best,
                       touch_tol=float(touch_tol), witness=witness)


def dump_nodal_csv(nodal: NodalSet, path) -> None:
    """Write segments as CSV: tri_id, endpoint coordinates, region tag."""
    dim = nodal.pt_coords.shape[1]
    cols = ["x0", "y0", "z0"][:dim] + ["x1", "y1", "z1"][:dim]
    lines = ["tri_id," + ",".join(cols) + ",region"]
    for si in range(nodal.n_segments):
        a = nodal.pt_coords[nodal.segments[si, 0]]
        b = nodal.pt_coords[nodal.segments[si, 1]]
        vals = ",".join("%.17g" % x for x in np.concatenate([a, b]))
        lines.append("%d,%s,%d" % (nodal.seg_tri[si], vals, nodal.seg_region[si]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
