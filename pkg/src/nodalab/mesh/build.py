"""Mesh builders for the reference geometries.

All builders return :class:`~nodalab.mesh.intrinsic.IntrinsicMesh` instances
whose edge lengths are consistent with their coordinates (chordal distances
for the sphere, exact Euclidean lengths in the plane, minimal-image lengths
on the flat periodic torus).
"""

from __future__ import annotations

import numpy as np
import shapely
from scipy.spatial import Delaunay
from shapely.geometry import Polygon

from .intrinsic import IntrinsicMesh, RegionTag

__all__ = [
    "build_rectangle",
    "build_sphere",
    "build_polygon",
    "build_disk",
    "build_genus_surface",
    "build_socket",
]

TORUS_PERIOD = 2.0 * np.pi


def build_rectangle(width: float, height: float, h: float) -> IntrinsicMesh:
    """Structured criss-cross triangulation of ``[0, width] x [0, height]``.

    Parameters
    ----------
    width, height : float
        Side lengths.
    h : float
        Target edge length; the grid pitch is ``<= h`` and the longest edge
        (the cell diagonal) is ``<= 1.5 h``.

    Raises
    ------
    ValueError
        If ``h >= min(width, height)`` (mesh would be degenerate).
    """
    if not (width > 0 and height > 0):
        raise ValueError("width and height must be positive")
    if h >= min(width, height):
        raise ValueError("h must be smaller than the shortest side")
    nx = int(np.ceil(width / h))
    ny = int(np.ceil(height / h))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    coords = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
            else:
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
    mesh = IntrinsicMesh(coords, np.asarray(tris, dtype=np.int64),
                         region=np.full(2 * nx * ny, int(RegionTag.OMEGA1)),
                         chart="plane")
    return mesh.validate(min_angle_deg=20)


# --------------------------------------------------------------------- sphere

def _icosahedron():
    r = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, r, 0], [1, r, 0], [-1, -r, 0], [1, -r, 0],
        [0, -1, r], [0, 1, r], [0, -1, -r], [0, 1, -r],
        [r, 0, -1], [r, 0, 1], [-r, 0, -1], [-r, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    # Orient every face outward (positive triple product).
    det = np.einsum("ij,ij->i", verts[faces[:, 0]],
                    np.cross(verts[faces[:, 1]], verts[faces[:, 2]]))
    flip = det < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return verts, faces


def build_sphere(subdivisions: int) -> IntrinsicMesh:
    """Icosphere: recursively subdivided icosahedron projected to the unit
    sphere, edge lengths equal to chordal distances.

    Subdivision 0 is the icosahedron (12 vertices, 20 faces, 30 edges);
    each level quadruples the face count.
    """
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    verts, faces = _icosahedron()
    verts = list(map(np.asarray, verts))
    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            m = midpoint.get(key)
            if m is None:
                p = verts[a] + verts[b]
                p = p / np.linalg.norm(p)
                verts.append(p)
                m = len(verts) - 1
                midpoint[key] = m
            return m

        new_faces = []
        for (a, b, c) in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.asarray(new_faces, dtype=np.int64)
    coords = np.asarray(verts)
    mesh = IntrinsicMesh(coords, faces, chart="sphere")
    return mesh.validate(min_angle_deg=20)


# -------------------------------------------------------------------- polygon

def _resample_boundary(boundary, h):
    pts = []
    n = len(boundary)
    for i in range(n):
        p = np.asarray(boundary[i], dtype=np.float64)
        q = np.asarray(boundary[(i + 1) % n], dtype=np.float64)
        seg = np.linalg.norm(q - p)
        k = max(1, int(np.ceil(seg / h)))
        for j in range(k):
            pts.append(p + (q - p) * (j / k))
    return np.asarray(pts)


def _hex_interior(poly: Polygon, h: float):
    minx, miny, maxx, maxy = poly.bounds
    dy = h * np.sqrt(3.0) / 2.0
    rows = int(np.floor((maxy - miny) / dy)) + 1
    pts = []
    for k in range(rows + 1):
        y = miny + k * dy
        x0 = minx + (h / 2.0 if k % 2 else 0.0)
        cols = int(np.floor((maxx - x0) / h)) + 1
        for c in range(cols + 1):
            pts.append((x0 + c * h, y))
    pts = np.asarray(pts)
    if len(pts) == 0:
        return pts.reshape(0, 2)
    shrunk = poly.buffer(-0.62 * h)
    if shrunk.is_empty:
        return np.empty((0, 2))
    keep = shapely.contains_xy(shrunk, pts[:, 0], pts[:, 1])
    return pts[keep]


def build_polygon(boundary, h: float, resample: bool = True) -> IntrinsicMesh:
    """Triangulate a simple polygon at target edge length ``h``.

    Parameters
    ----------
    boundary : sequence of (x, y)
        Polygon vertices in order (closed implicitly).  Counterclockwise
        preferred; clockwise input is reversed.
    h : float
        Target edge length.
    resample : bool
        Subdivide boundary edges to spacing ``<= h`` (default).  Pass False
        when the boundary is already discretised and its vertices must be
        preserved verbatim (e.g. socket arcs).

    Raises
    ------
    ValueError
        For self-intersecting boundaries.
    RuntimeError
        If the Delaunay triangulation fails to conform to a boundary edge.
    """
    boundary = np.asarray(boundary, dtype=np.float64)
    if len(boundary) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    poly = Polygon(boundary)
    if not poly.is_valid:
        raise ValueError("polygon boundary is self-intersecting or degenerate")
    # Counterclockwise convention (positive signed area).
    x, y = boundary[:, 0], boundary[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if signed < 0:
        boundary = boundary[::-1]
        poly = Polygon(boundary)

    bpts = _resample_boundary(boundary, h) if resample else boundary.copy()
    ipts = _hex_interior(poly, h)
    pts = np.vstack([bpts, ipts]) if len(ipts) else bpts
    tri = Delaunay(pts)
    simplices = tri.simplices
    # Keep triangles whose centroid lies in the polygon.
    cent = pts[simplices].mean(axis=1)
    keep = shapely.contains_xy(poly, cent[:, 0], cent[:, 1])
    simplices = simplices[keep]
    # Enforce counterclockwise orientation.
    p0, p1, p2 = pts[simplices[:, 0]], pts[simplices[:, 1]], pts[simplices[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) \
        - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    flip = cross < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]

    mesh = IntrinsicMesh(pts, simplices,
                         region=np.full(len(simplices), int(RegionTag.OMEGA1)),
                         chart="plane")
    # Every boundary segment must be a mesh edge (conforming triangulation).
    nb = len(bpts)
    edge_set = {(int(i), int(j)) for i, j in mesh.edges}
    for i in range(nb):
        a, b = i, (i + 1) % nb
        key = (a, b) if a < b else (b, a)
        if key not in edge_set:
            raise RuntimeError(
                "triangulation does not conform to the polygon boundary; "
                "reduce h or simplify the polygon")
    return mesh


def build_disk(radius: float, h: float) -> IntrinsicMesh:
    """Polygonal approximation of a disk (inscribed regular n-gon)."""
    n = max(12, int(np.ceil(2.0 * np.pi * radius / h)))
    theta = 2.0 * np.pi * np.arange(n) / n
    boundary = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    return build_polygon(boundary, h, resample=False)


# ---------------------------------------------------------------------- torus

def _build_flat_torus(h: float) -> IntrinsicMesh:
    P = TORUS_PERIOD
    n = max(4, int(np.ceil(P / h)))
    s = P / n
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    coords = np.stack([(ii * s).ravel(), (jj * s).ravel()], axis=1)

    def vid(i, j):
        return (j % n) * n + (i % n)

    tris = []
    for j in range(n):
        for i in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=np.int64)
    mesh = IntrinsicMesh(coords, tris, lengths=None, chart="torus", period=P)
    # Coordinates wrap, so lengths computed from them are wrong across the
    # seam; set them from the known flat metric instead.
    d = coords[mesh.edges[:, 0]] - coords[mesh.edges[:, 1]]
    d = (d + P / 2.0) % P - P / 2.0
    mesh.lengths = np.sqrt(np.einsum("ij,ij->i", d, d))
    return mesh.validate(min_angle_deg=20)


def _build_polygon_identification(genus: int, h: float) -> IntrinsicMesh:
    """Flat 4g-gon with the standard commutator-word edge identification."""
    from .intrinsic import identify_vertices

    sides = 4 * genus
    corners = np.stack([np.cos(2 * np.pi * (np.arange(sides) + 0.5) / sides),
                        np.sin(2 * np.pi * (np.arange(sides) + 0.5) / sides)], axis=1)
    side_len = np.linalg.norm(corners[1] - corners[0])
    K = max(3, int(np.ceil(side_len / h)))
    boundary = []
    for s in range(sides):
        p, q = corners[s], corners[(s + 1) % sides]
        for j in range(K):
            boundary.append(p + (q - p) * (j / K))
    boundary = np.asarray(boundary)
    mesh = build_polygon(boundary, h, resample=False)

    def side_vertex(s, j):
        # Vertex j (0..K) along side s; index K wraps to the next side start.
        return (s * K + j) % (sides * K)

    keep, drop = [], []
    for g in range(genus):
        for (sa, sb) in ((4 * g, 4 * g + 2), (4 * g + 1, 4 * g + 3)):
            for j in range(K + 1):
                keep.append(side_vertex(sa, j))
                drop.append(side_vertex(sb, K - j))
    glued, _ = identify_vertices(mesh, keep, drop)
    glued.validate(check_links=True)
    if not glued.is_closed:
        raise RuntimeError("polygon identification left a boundary")
    return glued


def build_genus_surface(genus: int, h: float) -> IntrinsicMesh:
    """Closed oriented surface of the given genus.

    Genus 1 is the flat square torus ``R^2 / (2 pi Z)^2`` (criss-cross grid
    with periodic identification, ``chart="torus"``).  Higher genus is the
    regular 4g-gon with the standard ``[a1, b1]...[ag, bg]`` identification,
    triangulated flat; all the negative curvature sits at the single cone
    vertex, which is fine intrinsically.

    Raises
    ------
    ValueError
        For genus < 1.
    """
    if genus < 1:
        raise ValueError("genus must be >= 1")
    if genus == 1:
        mesh = _build_flat_torus(h)
    else:
        mesh = _build_polygon_identification(genus, h)
    expected = 2 - 2 * genus
    if mesh.euler_characteristic != expected:
        raise RuntimeError(
            f"Euler characteristic {mesh.euler_characteristic}, expected {expected}")
    return mesh


# --------------------------------------------------------------------- socket

def build_socket(h: float, n_arc: int, bump=None):
    """Unit-scale attachment piece whose boundary contains the upper unit
    semicircle, discretised at ``n_arc + 1`` evenly spaced angles.

    With ``bump=None`` this is the closed upper half-disk (attaching it back
    into a matching excision is the identity surgery).  ``bump=(w, d)`` adds
    a rectangular protrusion ``[-w, w] x [-d, 0]`` hanging below the
    diameter, which after attachment sticks out of the host domain.

    Returns
    -------
    mesh : IntrinsicMesh
        Planar mesh, region ``OMEGA2``.
    arc : ndarray
        Vertex indices of the socket arc, ordered by angle 0 -> pi.
    """
    if n_arc < 8:
        raise ValueError("socket arc needs at least 8 segments")
    theta = np.pi * np.arange(n_arc + 1) / n_arc
    arc_pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    arc_pts[0] = (1.0, 0.0)
    arc_pts[-1] = (-1.0, 0.0)
    rest = []
    if bump is None:
        # Subdivide the diameter at pitch h (exclusive endpoints).
        k = max(2, int(np.ceil(2.0 / h)))
        for j in range(1, k):
            rest.append((-1.0 + 2.0 * j / k, 0.0))
    else:
        w, d = bump
        if not (0 < w < 1 and d > 0):
            raise ValueError("bump must be (w, d) with 0 < w < 1 and d > 0")

        def seg(p, q, include_start):
            p, q = np.asarray(p, float), np.asarray(q, float)
            k = max(1, int(np.ceil(np.linalg.norm(q - p) / h)))
            start = 0 if include_start else 1
            return [tuple(p + (q - p) * (j / k)) for j in range(start, k)]

        rest += seg((-1, 0), (-w, 0), False)
        rest += seg((-w, 0), (-w, -d), True)
        rest += seg((-w, -d), (w, -d), True)
        rest += seg((w, -d), (w, 0), True)
        rest += seg((w, 0), (1, 0), True)
    boundary = np.vstack([arc_pts, np.asarray(rest)]) if rest else arc_pts
    mesh = build_polygon(boundary, h, resample=False)
    mesh.region[:] = int(RegionTag.OMEGA2)
    arc = np.arange(n_arc + 1, dtype=np.int64)
    return mesh, arc
