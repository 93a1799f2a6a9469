"""Removal of geodesic balls with a circle-snapped replacement boundary.

The carve deletes every triangle meeting the ball, places a fresh ring of
vertices exactly on the chart circle of the requested radius, and stitches
the ring to the exposed polygonal rim with a single layer of triangles.
Ring edge lengths are snapped to the flat chord formula ``2 r sin(pi/N)``
so that two carves with the same loop count produce boundary circles that
are exactly isometric after uniform scaling, which is what makes welds
between them length-consistent.
"""

from __future__ import annotations

import numpy as np

from .intrinsic import IntrinsicMesh
from .geodesic import sub_is_disk

__all__ = ["remove_geodesic_ball", "chart_distances", "chart_angles"]

_TWO_PI = 2.0 * np.pi


def _unit(v):
    return v / np.linalg.norm(v)


def chart_distances(mesh: IntrinsicMesh, point: np.ndarray) -> np.ndarray:
    """Exact chart distance from a point to every vertex."""
    p = np.asarray(point, dtype=np.float64)
    c = mesh.coords
    if mesh.chart == "sphere":
        ph = _unit(p)
        ch = c / np.linalg.norm(c, axis=1)[:, None]
        return np.arccos(np.clip(ch @ ph, -1.0, 1.0))
    if mesh.chart == "torus":
        P = mesh.period
        d = (c - p + P / 2.0) % P - P / 2.0
        return np.sqrt(np.einsum("ij,ij->i", d, d))
    if mesh.chart == "plane":
        d = c - p
        return np.sqrt(np.einsum("ij,ij->i", d, d))
    raise ValueError("remove_geodesic_ball needs a charted mesh "
                     "(plane, sphere or torus)")


def _frame(mesh: IntrinsicMesh, p: np.ndarray, tangent=None):
    """Orthonormal frame used to measure azimuth about ``p``."""
    if mesh.chart == "sphere":
        ch = _unit(p)
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(ch)))] = 1.0
        e1 = _unit(axis - (axis @ ch) * ch)
        e2 = np.cross(ch, e1)
        return ch, e1, e2
    if tangent is not None:
        t = _unit(np.asarray(tangent, dtype=np.float64))
        n = np.array([-t[1], t[0]])
        return None, t, n
    return None, np.array([1.0, 0.0]), np.array([0.0, 1.0])


def chart_angles(mesh: IntrinsicMesh, p: np.ndarray, vertices, frame) -> np.ndarray:
    """Azimuth of each vertex about ``p`` in the given frame, in [0, 2 pi)."""
    ch, e1, e2 = frame
    c = mesh.coords[np.asarray(vertices, dtype=np.int64)]
    if mesh.chart == "sphere":
        ang = np.arctan2(c @ e2, c @ e1)
    else:
        d = c - p
        if mesh.chart == "torus":
            P = mesh.period
            d = (d + P / 2.0) % P - P / 2.0
        ang = np.arctan2(d @ e2, d @ e1)
    return np.mod(ang, _TWO_PI)


def _ring_positions(mesh, p, frame, radius, thetas):
    ch, e1, e2 = frame
    if mesh.chart == "sphere":
        pos = (np.cos(radius) * ch[None, :]
               + np.sin(radius) * (np.cos(thetas)[:, None] * e1[None, :]
                                   + np.sin(thetas)[:, None] * e2[None, :]))
        return pos
    pos = p[None, :] + radius * (np.cos(thetas)[:, None] * e1[None, :]
                                 + np.sin(thetas)[:, None] * e2[None, :])
    if mesh.chart == "torus":
        pos = pos % mesh.period
    return pos


def _coord_dist(mesh, a, b):
    d = b - a
    if mesh.chart == "torus":
        P = mesh.period
        d = (d + P / 2.0) % P - P / 2.0
    return float(np.sqrt(d @ d))


def _unwrap(angles):
    """Cumulative angles along a cycle; diffs wrapped into (0, 2 pi)."""
    a = np.asarray(angles)
    out = np.empty_like(a)
    out[0] = a[0]
    for i in range(1, len(a)):
        step = (a[i] - a[i - 1]) % _TWO_PI
        out[i] = out[i - 1] + step
    return out


def _stitch_cycle(outer, outer_ang, ring, ring_ang):
    """Triangulate the annulus between two closed vertex cycles ordered in
    the same angular direction.  Returns (m + n) triangles
    (outer_i, outer_i+1, ring_j) / (outer_i, ring_j+1, ring_j).

    The outer rim is a jagged mesh polygon; its angles may backtrack a
    little where grading kinks it.  The merge therefore runs on the
    nearest-angle unwrap monotonised by a running maximum, which keeps both
    pointers advancing; the winding itself must still be exactly one turn.
    """
    m, n = len(outer), len(ring)
    ang = np.asarray(outer_ang, dtype=np.float64)
    steps = (np.diff(np.concatenate([ang, ang[:1]])) + np.pi) % _TWO_PI - np.pi
    if abs(steps.sum() - _TWO_PI) > 1e-6:
        raise RuntimeError("carve rim does not wind once about the centre; "
                           "refine the mesh near the cut")
    if steps.min() < -0.5 * np.pi:
        raise RuntimeError("carve rim backtracks sharply about the centre; "
                           "refine the mesh near the cut")
    au = ang[0] + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    au = np.maximum.accumulate(au)
    # Start the ring pointer at the ring vertex just behind the outer start.
    behind = (au[0] - np.asarray(ring_ang)) % _TWO_PI
    j0 = int(np.argmin(behind))
    ring = list(ring[j0:]) + list(ring[:j0])
    ring_ang = list(ring_ang[j0:]) + list(ring_ang[:j0])
    bu = _unwrap(ring_ang)
    behind = (au[0] - bu[0]) % _TWO_PI
    bu = bu + (au[0] - behind - bu[0])
    a_next = np.append(au[1:], au[0] + _TWO_PI)
    b_next = np.append(bu[1:], bu[0] + _TWO_PI)
    tris = []
    i = j = 0
    while i < m or j < n:
        adv_outer = j >= n or (i < m and a_next[i] <= b_next[j])
        if adv_outer:
            tris.append((outer[i], outer[(i + 1) % m], ring[j % n]))
            i += 1
        else:
            tris.append((outer[i % m], ring[(j + 1) % n], ring[j]))
            j += 1
    return tris


def _stitch_chain(outer, outer_s, ring, ring_s):
    """Open-strip variant: both sequences share their two endpoints and are
    parameterised by increasing s."""
    m, n = len(outer) - 1, len(ring) - 1
    tris = []
    i = j = 0
    while i < m or j < n:
        adv_outer = j >= n or (i < m and outer_s[i + 1] <= ring_s[j + 1])
        if adv_outer:
            t = (outer[i], outer[i + 1], ring[j])
            i += 1
        else:
            t = (outer[i], ring[j + 1], ring[j])
            j += 1
        if len({t[0], t[1], t[2]}) == 3:
            tris.append(t)
    return tris


def _flip_pass(zipper, ldict, get_len):
    """Lawson flips on the stitched annulus, using the intrinsic Delaunay
    criterion (flip when the cotangents opposite an edge sum negative).

    Only edges interior to the annulus (shared by two zipper triangles) are
    candidates, so the kept mesh and the ring boundary stay untouched.
    ``get_len(a, b)`` supplies lengths of newly created diagonals."""

    def key(a, b):
        return (a, b) if a < b else (b, a)

    def cot_apex(c, b, a):
        # cotangent of the angle opposite side c in a triangle (a, b, c)
        s = 0.5 * (a + b + c)
        rad = s * (s - a) * (s - b) * (s - c)
        if rad <= 0:
            return None
        return (a * a + b * b - c * c) / (4.0 * np.sqrt(rad))

    zipper = [tuple(t) for t in zipper]
    for _ in range(20 * len(zipper)):
        owner = {}
        for ti, t in enumerate(zipper):
            for k in range(3):
                owner.setdefault(key(t[(k + 1) % 3], t[(k + 2) % 3]), []).append(ti)
        flipped = False
        for e, tids in owner.items():
            if len(tids) != 2:
                continue
            t1, t2 = zipper[tids[0]], zipper[tids[1]]
            # Orient: t1 traverses (u, v), t2 traverses (v, u).
            u, v = e
            if (u, v) not in ((t1[0], t1[1]), (t1[1], t1[2]), (t1[2], t1[0])):
                u, v = v, u
            if (v, u) not in ((t2[0], t2[1]), (t2[1], t2[2]), (t2[2], t2[0])):
                continue
            a = next(x for x in t1 if x not in (u, v))
            b = next(x for x in t2 if x not in (u, v))
            luv = ldict[key(u, v)]
            lua, lva = ldict[key(u, a)], ldict[key(v, a)]
            lub, lvb = ldict[key(u, b)], ldict[key(v, b)]
            ca = cot_apex(luv, lua, lva)
            cb = cot_apex(luv, lub, lvb)
            if ca is None or cb is None or ca + cb >= -1e-10:
                continue
            lab = get_len(a, b)
            # The flipped triangles must be non-degenerate.
            ok = True
            for (c, x, y) in ((lab, lub, lua), (lab, lvb, lva)):
                s = 0.5 * (c + x + y)
                if s - c <= 0 or s - x <= 0 or s - y <= 0:
                    ok = False
            if not ok:
                continue
            zipper[tids[0]] = (u, b, a)
            zipper[tids[1]] = (b, v, a)
            ldict[key(a, b)] = lab
            flipped = True
            break
        if not flipped:
            return zipper
    return zipper


def _local_h(mesh, cdist, radius):
    lo = cdist[mesh.edges].min(axis=1)
    hi = cdist[mesh.edges].max(axis=1)
    straddle = (lo <= radius) & (hi >= radius)
    if not straddle.any():
        raise ValueError("no mesh edge crosses the cut circle; radius too "
                         "small for this mesh")
    return float(np.median(mesh.lengths[straddle]))


def remove_geodesic_ball(mesh: IntrinsicMesh, center: int, radius: float,
                         n_loop: int | None = None) -> IntrinsicMesh:
    """Remove the geodesic ball of the given radius about a vertex.

    Every triangle meeting the ball is deleted and the hole is closed off
    with a ring of ``n_loop`` fresh vertices placed exactly on the chart
    circle, stitched to the exposed rim.  If ``center`` is a boundary
    vertex of a planar mesh (with straight boundary through it), a half
    ball is removed instead: the new boundary is a half-circle arc whose
    two endpoint vertices lie exactly on the old boundary line at distance
    ``radius`` from the centre.

    Parameters
    ----------
    mesh : IntrinsicMesh
        Charted mesh (``plane``, ``sphere`` or ``torus``), refined so the
        local edge length near the cut is at most ``0.45 * radius``.
    center : int
        Vertex index at the ball centre.
    radius : float
        Geodesic radius of the ball.
    n_loop : int, optional
        Number of ring segments.  Defaults to ``max(16, ceil(2 pi r / h))``
        for a full ring and ``max(8, ceil(pi r / h))`` for a boundary arc,
        with ``h`` the local edge length at the cut.

    Returns
    -------
    IntrinsicMesh
        New mesh with a ``carve_info`` attribute describing the ring
        (ordered vertex ids, angles, zipper triangle ids, mode, frame,
        and the old-to-new vertex map of the surviving vertices).

    Raises
    ------
    ValueError
        If the ball is not an embedded disk (radius beyond the injectivity
        scale), reaches the mesh boundary from the interior, or the mesh is
        too coarse near the cut.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    mesh = mesh.copy()
    p = mesh.coords[int(center)].astype(np.float64)
    cdist = chart_distances(mesh, p)
    h_loc = _local_h(mesh, cdist, radius)
    if h_loc > 0.45 * radius:
        raise ValueError(
            f"mesh too coarse near the cut (local h {h_loc:.4g} vs radius "
            f"{radius:.4g}); refine_near first")

    boundary_vs = set(int(v) for v in mesh.boundary_vertices)
    boundary_mode = int(center) in boundary_vs
    pad = 0.6 * h_loc

    tangent = None
    if boundary_mode:
        if mesh.chart != "plane":
            raise ValueError("boundary carve is only supported on planar meshes")
        loops = mesh.boundary_loops()
        loop = next(lp for lp in loops if int(center) in set(int(v) for v in lp))
        k = list(int(v) for v in loop).index(int(center))
        tangent = _unit(mesh.coords[loop[(k + 1) % len(loop)]] - p)
        # The boundary must be a straight line through the whole cut zone so
        # the arc endpoints land exactly on it.
        for step in (+1, -1):
            i = k
            for _ in range(len(loop)):
                i = (i + step) % len(loop)
                v = int(loop[i])
                d = mesh.coords[v] - p
                if abs(d[0] * tangent[1] - d[1] * tangent[0]) > 1e-6 * radius:
                    raise ValueError("boundary is not straight across the "
                                     "carve zone; move the centre or shrink "
                                     "the radius")
                if cdist[v] >= radius + pad:
                    break
            else:
                raise ValueError("carve swallows the whole boundary loop")

    inside = cdist < radius + pad
    del_mask = inside[mesh.tris].any(axis=1)
    if not del_mask.any():
        raise ValueError("ball contains no triangles; refine the mesh")
    if not sub_is_disk(mesh, del_mask):
        raise ValueError("ball triangles do not form a disk; radius exceeds "
                         "the injectivity scale here")
    del_vs = set(int(v) for v in np.unique(mesh.tris[del_mask]))
    if not boundary_mode and (del_vs & boundary_vs):
        raise ValueError("interior ball reaches the mesh boundary")

    band_regions = mesh.region[del_mask]
    zip_region = int(np.bincount(band_regions).argmax())
    band_scales = np.unique(mesh.tri_scale[del_mask])
    if len(band_scales) > 1 and \
            band_scales.max() - band_scales.min() > 1e-12 * band_scales.max():
        raise ValueError("carve band spans triangles of mixed scale")
    zip_scale = float(band_scales[0])

    kept, vmap, _ = mesh.submesh(~del_mask)
    frame = _frame(mesh, p, tangent=tangent)

    # --- ring geometry ---------------------------------------------------
    if boundary_mode:
        n = n_loop if n_loop is not None else max(8, int(np.ceil(np.pi * radius / h_loc)))
        if n < 8:
            raise ValueError("need at least 8 ring segments")
        thetas = np.pi * np.arange(n + 1) / n
        chord = radius * (2.0 * np.sin(np.pi / (2 * n)))
    else:
        n = n_loop if n_loop is not None else max(16, int(np.ceil(_TWO_PI * radius / h_loc)))
        if n < 8:
            raise ValueError("need at least 8 ring segments")
        thetas = _TWO_PI * np.arange(n) / n
        chord = radius * (2.0 * np.sin(np.pi / n))
    ring_pos = _ring_positions(mesh, p, frame, radius, thetas)

    nk = kept.n_vertices
    ring_ids = np.arange(nk, nk + len(thetas), dtype=np.int64)
    coords = np.vstack([kept.coords, ring_pos])

    ldict = {}
    for (a, b), l in zip(kept.edges, kept.lengths):
        ldict[(int(a), int(b))] = float(l)

    def put(a, b, l):
        key = (a, b) if a < b else (b, a)
        ldict[key] = l

    # --- rim extraction and stitching ------------------------------------
    if boundary_mode:
        # The rim is the maximal run of newly exposed vertices on the kept
        # boundary, extended by one original boundary vertex at each end.
        orig_b = set(int(vmap[v]) for v in boundary_vs if vmap[v] >= 0)
        loops = kept.boundary_loops()
        chain = None
        for lp in loops:
            cyc = [int(v) for v in lp]
            new_flags = [v not in orig_b for v in cyc]
            if not any(new_flags):
                continue
            # Rotate so the block of new vertices is contiguous from index 1.
            L = len(cyc)
            starts = [i for i in range(L)
                      if new_flags[i] and not new_flags[i - 1]]
            if len(starts) != 1:
                raise RuntimeError("carved rim is not a single chain")
            s0 = starts[0]
            block = []
            i = s0
            while new_flags[i % L]:
                block.append(cyc[i % L])
                i += 1
            chain = [cyc[(s0 - 1) % L]] + block + [cyc[i % L]]
            break
        if chain is None:
            raise RuntimeError("could not identify the carved rim chain")
        chain = chain[::-1]  # zipper traverses opposite to the kept boundary
        ang = chart_angles(kept, p, chain, frame)
        increasing = ang[1] < ang[-2]
        w = 0.3  # sentinel parameter for the collinear terminals
        s_outer = np.array(ang if increasing else np.pi - ang)
        s_outer[0], s_outer[-1] = -w, np.pi + w
        if np.any(np.diff(s_outer) <= -1e-9):
            raise RuntimeError("carve rim is not monotone about the centre; "
                               "refine the mesh near the cut")
        if increasing:
            ring_core, s_core = list(ring_ids), thetas
        else:
            ring_core, s_core = list(ring_ids[::-1]), np.pi - thetas[::-1]
        ring_seq = [chain[0]] + ring_core + [chain[-1]]
        s_ring = np.concatenate([[-w], s_core, [np.pi + w]])
        zipper = _stitch_chain(chain, s_outer, ring_seq, s_ring)
        ring_ordered = ring_ids
        ring_angles = thetas
        for j in range(n):
            put(int(ring_ids[j]), int(ring_ids[j + 1]), chord)
    else:
        old_loops = [frozenset(int(v) for v in lp) for lp in
                     (mesh.boundary_loops() if not mesh.is_closed else [])]
        new_loop = None
        for lp in kept.boundary_loops():
            back = frozenset(int(mesh_v) for mesh_v in
                             (np.nonzero(vmap == v)[0][0] for v in lp))
            if back not in old_loops:
                new_loop = [int(v) for v in lp]
                break
        if new_loop is None:
            raise RuntimeError("could not identify the carved rim loop")
        outer = new_loop[::-1]  # zipper traverses opposite to the kept boundary
        out_ang = chart_angles(kept, p, outer, frame)
        wind = np.sum((np.diff(np.concatenate([out_ang, out_ang[:1]]))
                       + np.pi) % _TWO_PI - np.pi)
        if wind > 0:
            ring_seq, ring_ang = list(ring_ids), thetas
        else:
            ring_seq = [ring_ids[0]] + list(ring_ids[1:][::-1])
            ring_ang = np.concatenate([[thetas[0]], thetas[1:][::-1]])
        zipper = _stitch_cycle(outer, out_ang, ring_seq, ring_ang)
        ring_ordered = ring_ids
        ring_angles = thetas
        for j in range(n):
            put(int(ring_ids[j]), int(ring_ids[(j + 1) % n]), chord)

    for (u, v, w) in zipper:
        for (x, y) in ((u, v), (v, w), (w, u)):
            key = (x, y) if x < y else (y, x)
            if key not in ldict:
                ldict[key] = _coord_dist(mesh, coords[x], coords[y])
    zipper = _flip_pass(zipper, ldict,
                        lambda a, b: _coord_dist(mesh, coords[a], coords[b]))

    # --- assemble ---------------------------------------------------------
    tris = np.vstack([kept.tris, np.asarray(zipper, dtype=np.int64)])
    region = np.concatenate([kept.region,
                             np.full(len(zipper), zip_region, dtype=np.int64)])
    scale = np.concatenate([kept.tri_scale, np.full(len(zipper), zip_scale)])
    raw = np.sort(np.vstack([tris[:, [1, 2]], tris[:, [0, 2]], tris[:, [0, 1]]]),
                  axis=1)
    edges = np.unique(raw, axis=0)
    lengths = np.array([ldict[(int(a), int(b))] for a, b in edges])
    out = IntrinsicMesh(coords, tris, lengths=lengths, region=region,
                        chart=mesh.chart, period=mesh.period, tri_scale=scale)
    out.validate()
    if not out.is_oriented:
        raise RuntimeError("carve produced inconsistent orientation")
    out.carve_info = {
        "mode": "boundary" if boundary_mode else "interior",
        "vmap": vmap,
        "ring": ring_ordered,
        "angles": ring_angles,
        "zipper_tris": np.arange(kept.n_tris, out.n_tris, dtype=np.int64),
        "center_coord": p,
        "frame": frame,
        "radius": float(radius),
        "n_loop": int(n),
        "h_local": float(h_loc),
    }
    return out
