"""Intrinsic triangle meshes.

A mesh here is a 2-manifold simplicial complex whose geometry is carried by
per-edge lengths rather than by an embedding.  Vertex coordinates are kept as
advisory data (rendering, chart-based constructions); every metric quantity
(areas, angles, stiffness weights, distances) is derived from the edge lengths
alone, so multiplying the lengths of a submesh by a factor eps realises the
conformal metric scaling eps^2 g exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "RegionTag",
    "MeshQuality",
    "IntrinsicMesh",
    "heron_area",
    "concatenate",
    "identify_vertices",
]


class RegionTag(IntEnum):
    """Provenance tag of a triangle inside a perturbed geometry.

    ``M1_BULK``
        Part of the base closed surface at distance >= eps0 from the
        surgery site (the region nodal sets are expected to stay in).
    ``M1_COLLAR``
        The annulus of the base surface between the excised ball and the
        eps0 ring.
    ``M2``
        The attached summand, carrying lengths scaled by eps.
    ``NECK``
        The ring of attached-side triangles welded onto the seam.
    ``OMEGA1`` / ``OMEGA2``
        Planar analogues: the base domain and the attached socket piece.
    """

    M1_BULK = 0
    M1_COLLAR = 1
    M2 = 2
    NECK = 3
    OMEGA1 = 4
    OMEGA2 = 5


@dataclass(frozen=True)
class MeshQuality:
    """Summary of mesh quality.

    Attributes
    ----------
    min_angle : float
        Smallest interior angle over all triangles, in radians.
    max_edge : float
        Longest edge length.
    h_max : dict
        Longest edge length per region tag name (only tags present).
    """

    min_angle: float
    max_edge: float
    h_max: dict


def heron_area(a, b, c):
    """Triangle areas from side lengths (numerically stable Heron form).

    Uses Kahan's ordering-corrected product; inputs may be arrays.

    Parameters
    ----------
    a, b, c : array_like
        Side lengths.

    Returns
    -------
    ndarray or float
        Areas; negative radicands (violated triangle inequality) raise.
    """
    sides = np.sort(np.stack(np.broadcast_arrays(a, b, c), axis=-1), axis=-1)
    x, y, z = sides[..., 2], sides[..., 1], sides[..., 0]  # x >= y >= z
    rad = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    if np.any(rad <= 0):
        raise ValueError("degenerate triangle: side lengths violate the triangle inequality")
    return 0.25 * np.sqrt(rad)


class IntrinsicMesh:
    """Oriented triangle mesh with metric given by edge lengths.

    Parameters
    ----------
    coords : array_like of shape (V, 2) or (V, 3)
        Advisory vertex positions.  Used for rendering and for chart-based
        constructions; not consulted by metric computations.
    tris : array_like of shape (T, 3)
        Vertex indices, consistently oriented.
    lengths : array_like of shape (E,), optional
        Edge lengths aligned with :attr:`edges`.  If omitted, Euclidean
        distances between coordinates are used.
    region : array_like of shape (T,), optional
        Per-triangle :class:`RegionTag` codes.  Defaults to ``M1_BULK`` for
        closed meshes and ``OMEGA1`` for meshes with boundary.
    chart : str, optional
        Name of a global chart the coordinates live in: ``"plane"``,
        ``"sphere"`` (unit sphere, 3D coords), ``"torus"`` (flat periodic
        square; ``period`` attribute applies), or None for no chart.
    period : float, optional
        Fundamental period for the ``"torus"`` chart.
    tri_scale : array_like of shape (T,), optional
        Metric scale factor recorded per triangle (1.0 = unscaled).

    Notes
    -----
    Edges are stored as sorted vertex pairs in lexicographic order;
    ``tri_edges[t, k]`` is the edge opposite local vertex ``k`` of triangle
    ``t``, so ``lengths[tri_edges[t]]`` gives the classical ``(a, b, c)``
    with ``a`` opposite the first vertex.
    """

    def __init__(self, coords, tris, lengths=None, region=None, chart=None,
                 period=None, tri_scale=None):
        coords = np.asarray(coords, dtype=np.float64)
        tris = np.asarray(tris, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] not in (2, 3):
            raise ValueError("coords must be (V, 2) or (V, 3)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("tris must be (T, 3)")
        if tris.size and (tris.min() < 0 or tris.max() >= len(coords)):
            raise ValueError("triangle indices out of range")
        if np.any(tris[:, 0] == tris[:, 1]) or np.any(tris[:, 1] == tris[:, 2]) \
                or np.any(tris[:, 0] == tris[:, 2]):
            raise ValueError("triangle with repeated vertex")
        self.coords = coords
        self.tris = tris

        # Edge table: sorted pairs, lexicographic order, with per-triangle map.
        raw = np.stack([tris[:, [1, 2]], tris[:, [0, 2]], tris[:, [0, 1]]], axis=1)
        raw = raw.reshape(-1, 2)
        raw_sorted = np.sort(raw, axis=1)
        edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
        self.edges = edges
        self.tri_edges = inv.reshape(-1, 3)

        counts = np.bincount(inv, minlength=len(edges))
        if np.any(counts > 2):
            raise ValueError("non-manifold edge (more than two incident triangles)")

        # Incident triangles per edge (-1 when absent), deterministic order.
        tri_ids = np.repeat(np.arange(len(tris), dtype=np.int64), 3)
        order = np.lexsort((tri_ids, inv))
        edge_tri = np.full((len(edges), 2), -1, dtype=np.int64)
        sorted_edges = inv[order]
        sorted_tris = tri_ids[order]
        first = np.r_[True, sorted_edges[1:] != sorted_edges[:-1]]
        slot = np.where(first, 0, 1)
        edge_tri[sorted_edges, slot] = sorted_tris
        self.edge_tri = edge_tri

        if lengths is None:
            d = coords[edges[:, 0]] - coords[edges[:, 1]]
            lengths = np.sqrt(np.einsum("ij,ij->i", d, d))
        else:
            lengths = np.asarray(lengths, dtype=np.float64)
            if lengths.shape != (len(edges),):
                raise ValueError(f"lengths must have shape ({len(edges)},)")
        if np.any(~np.isfinite(lengths)) or np.any(lengths <= 0):
            raise ValueError("edge lengths must be finite and positive")
        self.lengths = lengths

        if region is None:
            default = RegionTag.M1_BULK if counts.min(initial=2) == 2 else RegionTag.OMEGA1
            region = np.full(len(tris), int(default), dtype=np.int64)
        else:
            region = np.asarray(region, dtype=np.int64)
            if region.shape != (len(tris),):
                raise ValueError("region must be per-triangle")
        self.region = region

        if tri_scale is None:
            tri_scale = np.ones(len(tris), dtype=np.float64)
        else:
            tri_scale = np.asarray(tri_scale, dtype=np.float64)
            if tri_scale.shape != (len(tris),):
                raise ValueError("tri_scale must be per-triangle")
        self.tri_scale = tri_scale

        self.chart = chart
        self.period = period

    # ------------------------------------------------------------------ sizes

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_tris(self) -> int:
        return len(self.tris)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_tris

    # ------------------------------------------------------------- metric data

    @property
    def tri_lengths(self):
        """(T, 3) side lengths ``(a, b, c)``, ``a`` opposite local vertex 0."""
        return self.lengths[self.tri_edges]

    @property
    def areas(self):
        """(T,) Heron areas."""
        tl = self.tri_lengths
        return heron_area(tl[:, 0], tl[:, 1], tl[:, 2])

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))

    @property
    def angles(self):
        """(T, 3) interior angles in radians (law of cosines)."""
        tl = self.tri_lengths
        a, b, c = tl[:, 0], tl[:, 1], tl[:, 2]
        cos_a = (b * b + c * c - a * a) / (2.0 * b * c)
        cos_b = (a * a + c * c - b * b) / (2.0 * a * c)
        cos_c = (a * a + b * b - c * c) / (2.0 * a * b)
        cos_all = np.clip(np.stack([cos_a, cos_b, cos_c], axis=1), -1.0, 1.0)
        return np.arccos(cos_all)

    def quality(self) -> MeshQuality:
        """Quality summary: global minimum angle, maximum edge, per-region h."""
        h_max = {}
        tl = self.tri_lengths
        for tag in np.unique(self.region):
            name = RegionTag(int(tag)).name
            h_max[name] = float(tl[self.region == tag].max())
        return MeshQuality(min_angle=float(self.angles.min()),
                           max_edge=float(self.lengths.max()),
                           h_max=h_max)

    @property
    def median_edge(self) -> float:
        return float(np.median(self.lengths))

    # ------------------------------------------------------------- boundaries

    @property
    def boundary_edge_mask(self):
        return self.edge_tri[:, 1] == -1

    @property
    def is_closed(self) -> bool:
        return not bool(self.boundary_edge_mask.any())

    @property
    def boundary_vertices(self):
        """Sorted array of vertices on the boundary."""
        be = self.edges[self.boundary_edge_mask]
        return np.unique(be)

    def directed_boundary_edges(self):
        """Boundary edges directed as traversed by their triangle.

        For counterclockwise planar meshes the outer loop comes out
        counterclockwise and hole loops clockwise.
        """
        tris = self.tris
        out = []
        for k, (i, j) in enumerate([(1, 2), (0, 2), (0, 1)]):
            eids = self.tri_edges[:, k]
            mask = self.boundary_edge_mask[eids]
            s, t = tris[mask, i], tris[mask, j]
            if k == 1:  # cycle order for edge opposite vertex 1 is v2 -> v0
                s, t = t, s
            out.append(np.stack([s, t], axis=1))
        return np.concatenate(out, axis=0)

    def boundary_loops(self):
        """List of boundary loops, each an ordered array of vertex indices.

        Loops are traversed with the surface on the left; deterministic
        (each loop starts at its smallest vertex, loops sorted by that).
        """
        dedges = self.directed_boundary_edges()
        if len(dedges) == 0:
            return []
        nxt = dict(map(tuple, dedges))
        if len(nxt) != len(dedges):
            raise ValueError("boundary is not a disjoint union of simple loops")
        loops = []
        remaining = set(nxt)
        while remaining:
            start = min(remaining)
            loop = [start]
            remaining.discard(start)
            v = nxt[start]
            while v != start:
                loop.append(v)
                remaining.discard(v)
                v = nxt[v]
            loops.append(np.asarray(loop, dtype=np.int64))
        loops.sort(key=lambda l: int(l[0]))
        return loops

    # ------------------------------------------------------------ connectivity

    @property
    def is_oriented(self) -> bool:
        """True when every interior edge is traversed once in each direction."""
        tris = self.tris
        asc = np.stack([tris[:, 1] < tris[:, 2],
                        tris[:, 2] < tris[:, 0],
                        tris[:, 0] < tris[:, 1]], axis=1).astype(np.int64)
        # Edge opposite vertex 1 is traversed v2 -> v0 in cycle order.
        total = np.zeros(self.n_edges, dtype=np.int64)
        np.add.at(total, self.tri_edges.ravel(), asc.ravel())
        interior = ~self.boundary_edge_mask
        return bool(np.all(total[interior] == 1)) and bool(
            np.all((total[~interior] >= 0) & (total[~interior] <= 1)))

    def vertex_tri_lists(self):
        """List of incident-triangle arrays per vertex (deterministic order)."""
        flat = self.tris.ravel()
        tri_ids = np.repeat(np.arange(self.n_tris, dtype=np.int64), 3)
        order = np.lexsort((tri_ids, flat))
        flat_s, tri_s = flat[order], tri_ids[order]
        cuts = np.searchsorted(flat_s, np.arange(self.n_vertices + 1))
        return [tri_s[cuts[v]:cuts[v + 1]] for v in range(self.n_vertices)]

    def _vertex_links_ok(self) -> bool:
        """Check each vertex's incident triangles form one fan (manifold)."""
        stars = self.vertex_tri_lists()
        boundary = np.zeros(self.n_vertices, dtype=bool)
        boundary[self.boundary_vertices] = True
        for v in range(self.n_vertices):
            star = stars[v]
            if len(star) == 0:
                return False  # isolated vertex
            # Walk the fan via shared edges incident to v.
            edge_pair = {}
            for t in star:
                for e in self.tri_edges[t]:
                    i, j = self.edges[e]
                    if i == v or j == v:
                        edge_pair.setdefault(int(e), []).append(int(t))
            # Count fan components by union-find over star triangles.
            parent = {int(t): int(t) for t in star}

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for ts in edge_pair.values():
                if len(ts) == 2:
                    ra, rb = find(ts[0]), find(ts[1])
                    if ra != rb:
                        parent[ra] = rb
            roots = {find(int(t)) for t in star}
            if len(roots) != 1:
                return False
            open_edges = sum(1 for ts in edge_pair.values() if len(ts) == 1)
            if boundary[v]:
                if open_edges != 2:
                    return False
            elif open_edges != 0:
                return False
        return True

    def validate(self, min_angle_deg=None, check_links=False):
        """Assert metric and combinatorial soundness; raise ValueError if not.

        Checks strict triangle inequalities / positive areas, consistent
        orientation, and optionally a minimum-angle floor and manifold
        vertex links.
        """
        tl = self.tri_lengths
        a, b, c = tl[:, 0], tl[:, 1], tl[:, 2]
        slack = 1e-12 * tl.max()
        if not (np.all(a + b > c + slack) and np.all(b + c > a + slack)
                and np.all(a + c > b + slack)):
            raise ValueError("triangle inequality violated")
        heron_area(a, b, c)  # raises on degenerate radicand
        if not self.is_oriented:
            raise ValueError("mesh is not consistently oriented")
        if min_angle_deg is not None:
            floor = np.deg2rad(min_angle_deg)
            got = float(self.angles.min())
            if got < floor:
                raise ValueError(
                    f"min angle {np.rad2deg(got):.2f} deg below floor {min_angle_deg} deg")
        if check_links and not self._vertex_links_ok():
            raise ValueError("non-manifold vertex link")
        return self

    # --------------------------------------------------------------- editing

    def copy(self) -> "IntrinsicMesh":
        return IntrinsicMesh(self.coords.copy(), self.tris.copy(),
                             lengths=self.lengths.copy(), region=self.region.copy(),
                             chart=self.chart, period=self.period,
                             tri_scale=self.tri_scale.copy())

    def scaled(self, factor: float) -> "IntrinsicMesh":
        """Mesh with every edge length (and coordinate) multiplied by factor.

        Realises the conformal scaling ``factor**2 * g`` exactly: Heron areas
        scale by ``factor**2`` and cotangent weights are unchanged.
        """
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return IntrinsicMesh(self.coords * factor, self.tris.copy(),
                             lengths=self.lengths * factor, region=self.region.copy(),
                             chart=None, period=None,
                             tri_scale=self.tri_scale * factor)

    def submesh(self, tri_mask):
        """Restrict to the triangles where ``tri_mask`` is True.

        Returns
        -------
        mesh : IntrinsicMesh
            The restricted mesh (chart metadata preserved).
        vertex_map : ndarray
            Old-to-new vertex indices (-1 where dropped).
        tri_ids : ndarray
            Original indices of the kept triangles.
        """
        tri_mask = np.asarray(tri_mask, dtype=bool)
        tri_ids = np.nonzero(tri_mask)[0]
        used = np.unique(self.tris[tri_ids])
        vertex_map = np.full(self.n_vertices, -1, dtype=np.int64)
        vertex_map[used] = np.arange(len(used))
        new_tris = vertex_map[self.tris[tri_ids]]
        sub = IntrinsicMesh(self.coords[used], new_tris,
                            region=self.region[tri_ids],
                            chart=self.chart, period=self.period,
                            tri_scale=self.tri_scale[tri_ids])
        # Carry lengths over exactly (sub constructor recomputed from coords).
        old_edge = {}
        for e, (i, j) in enumerate(self.edges):
            old_edge[(int(i), int(j))] = e
        for e, (i, j) in enumerate(sub.edges):
            oi, oj = int(used[i]), int(used[j])
            key = (oi, oj) if oi < oj else (oj, oi)
            sub.lengths[e] = self.lengths[old_edge[key]]
        return sub, vertex_map, tri_ids


def concatenate(m1: IntrinsicMesh, m2: IntrinsicMesh):
    """Disjoint union of two meshes.

    Returns
    -------
    mesh : IntrinsicMesh
    offset : int
        Index offset applied to the second mesh's vertices.
    """
    dim = max(m1.coords.shape[1], m2.coords.shape[1])

    def lift(c):
        if c.shape[1] == dim:
            return c
        out = np.zeros((len(c), dim))
        out[:, :c.shape[1]] = c
        return out

    coords = np.vstack([lift(m1.coords), lift(m2.coords)])
    offset = m1.n_vertices
    tris = np.vstack([m1.tris, m2.tris + offset])
    region = np.concatenate([m1.region, m2.region])
    tri_scale = np.concatenate([m1.tri_scale, m2.tri_scale])
    out = IntrinsicMesh(coords, tris, region=region, tri_scale=tri_scale)
    # Restore intrinsic lengths (constructor used coordinates).
    lut = {}
    for e, (i, j) in enumerate(out.edges):
        lut[(int(i), int(j))] = e
    for src, off in ((m1, 0), (m2, offset)):
        for e, (i, j) in enumerate(src.edges):
            out.lengths[lut[(int(i) + off, int(j) + off)]] = src.lengths[e]
    return out, offset


def identify_vertices(mesh: IntrinsicMesh, keep, drop, length_tol=1e-9):
    """Glue a mesh to itself by identifying vertex ``drop[i]`` with ``keep[i]``.

    The pairs generate an equivalence relation (a vertex may appear in
    several pairs, as happens at polygon corners); each class is collapsed
    onto its smallest member.  Duplicate edges created by the
    identification must agree in length to ``length_tol`` (relative); the
    copy with the lowest edge id wins.  Dropped vertices are removed and
    indices compacted.

    Returns
    -------
    mesh : IntrinsicMesh
    old_to_new : ndarray
        Vertex index map from the input mesh to the output.
    """
    keep = np.asarray(keep, dtype=np.int64)
    drop = np.asarray(drop, dtype=np.int64)
    if keep.shape != drop.shape:
        raise ValueError("keep and drop must have equal length")
    parent = np.arange(mesh.n_vertices, dtype=np.int64)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(keep, drop):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            lo, hi = (ra, rb) if ra < rb else (rb, ra)
            parent[hi] = lo
    relabel = np.array([find(i) for i in range(mesh.n_vertices)],
                       dtype=np.int64)
    new_tris = relabel[mesh.tris]
    if np.any(new_tris[:, 0] == new_tris[:, 1]) or np.any(new_tris[:, 1] == new_tris[:, 2]) \
            or np.any(new_tris[:, 0] == new_tris[:, 2]):
        raise ValueError("identification collapses a triangle")
    used = np.unique(new_tris)
    compact = np.full(mesh.n_vertices, -1, dtype=np.int64)
    compact[used] = np.arange(len(used))
    out_tris = compact[new_tris]
    out = IntrinsicMesh(mesh.coords[used], out_tris, region=mesh.region.copy(),
                        tri_scale=mesh.tri_scale.copy())
    # Intrinsic lengths: first writer (lowest old edge id) wins; later copies
    # must agree within tolerance.
    lut = {}
    for e, (i, j) in enumerate(out.edges):
        lut[(int(i), int(j))] = e
    written = np.zeros(out.n_edges, dtype=bool)
    scale = float(mesh.lengths.max())
    for e, (i, j) in enumerate(mesh.edges):
        ni, nj = compact[relabel[int(i)]], compact[relabel[int(j)]]
        key = (int(ni), int(nj)) if ni < nj else (int(nj), int(ni))
        ne = lut[key]
        if written[ne]:
            if abs(out.lengths[ne] - mesh.lengths[e]) > length_tol * scale:
                raise ValueError("identified edges disagree in length")
        else:
            out.lengths[ne] = mesh.lengths[e]
            written[ne] = True
    old_to_new = compact[relabel]
    return out, old_to_new
