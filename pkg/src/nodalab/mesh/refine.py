"""Local mesh refinement by conforming longest-edge bisection."""

from __future__ import annotations

import numpy as np

from .intrinsic import IntrinsicMesh
from .geodesic import distance_field

__all__ = ["refine_near"]


class _EditableMesh:
    """Mutable triangle soup used during refinement.

    Keeps vertex indices stable (new vertices are appended) so callers can
    track marked vertices across refinement.
    """

    def __init__(self, mesh: IntrinsicMesh, dist: np.ndarray):
        self.coords = [c.copy() for c in mesh.coords]
        self.dist = list(dist)
        self.chart = mesh.chart
        self.period = mesh.period
        self.length = {}
        for (a, b), l in zip(mesh.edges, mesh.lengths):
            self.length[(int(a), int(b))] = float(l)
        self.tris = [tuple(int(v) for v in t) for t in mesh.tris]
        self.region = [int(r) for r in mesh.region]
        self.scale = [float(s) for s in mesh.tri_scale]
        self.alive = [True] * len(self.tris)
        self.edge_tris = {}
        for ti, t in enumerate(self.tris):
            for k in range(3):
                self.edge_tris.setdefault(self._key(t[(k + 1) % 3], t[(k + 2) % 3]),
                                          []).append(ti)

    @staticmethod
    def _key(a, b):
        return (a, b) if a < b else (b, a)

    def edge_length(self, a, b):
        return self.length[self._key(a, b)]

    def longest_edge(self, ti):
        """Longest edge under the total order (length, key).

        Exact ties in length are broken by the edge key, the same way in
        every incident triangle (lengths are shared floats), so bisection
        propagation strictly climbs this order and cannot cycle.
        """
        t = self.tris[ti]
        best = None
        for k in range(3):
            kk = self._key(t[(k + 1) % 3], t[(k + 2) % 3])
            cand = (self.length[kk], kk)
            if best is None or cand > best:
                best = cand
        return best[1], best[0]

    def _midpoint(self, a, b):
        ca, cb = self.coords[a], self.coords[b]
        if self.chart == "sphere":
            m = ca + cb
            return m / np.linalg.norm(m)
        if self.chart == "torus":
            P = self.period
            d = (cb - ca + P / 2.0) % P - P / 2.0
            return (ca + d / 2.0) % P
        return (ca + cb) / 2.0

    def _dist_coords(self, p, q):
        if self.chart == "torus":
            P = self.period
            d = (q - p + P / 2.0) % P - P / 2.0
            return float(np.sqrt(d @ d))
        d = q - p
        return float(np.sqrt(d @ d))

    def split_edge(self, a, b):
        """Bisect edge (a, b), splitting neighbours first so the edge is the
        longest edge of every incident triangle (Rivara).  The propagation
        chain is kept on an explicit stack; cascades on fine meshes run far
        deeper than the interpreter stack allows."""
        stack = [self._key(a, b)]
        on_stack = {stack[0]}
        while stack:
            key = stack[-1]
            worst = None
            for ti in self.edge_tris.get(key, ()):
                if not self.alive[ti]:
                    continue
                lk, _ = self.longest_edge(ti)
                if lk != key:
                    worst = lk
                    break
            if worst is not None:
                if worst in on_stack:
                    raise RuntimeError("bisection propagation cycled; the "
                                       "mesh has exactly tied edge lengths")
                stack.append(worst)
                on_stack.add(worst)
                continue
            stack.pop()
            on_stack.discard(key)
            self._bisect(key)

    def _bisect(self, key):
        """Bisect ``key``, already the longest edge of its triangles."""
        incident = [ti for ti in self.edge_tris.get(key, ()) if self.alive[ti]]
        a, b = key
        mid = self._midpoint(a, b)
        w = len(self.coords)
        self.coords.append(mid)
        self.dist.append(0.5 * (self.dist[a] + self.dist[b]))
        half = self.length[key] / 2.0
        self.length[self._key(a, w)] = half
        self.length[self._key(b, w)] = half
        for ti in incident:
            t = self.tris[ti]
            k = next(k for k in range(3) if self._key(t[(k + 1) % 3], t[(k + 2) % 3]) == key)
            p = t[k]
            u, v = t[(k + 1) % 3], t[(k + 2) % 3]
            if self.chart in ("sphere", "plane", "torus"):
                m = self._dist_coords(self.coords[p], mid)
            else:
                # Flat median of the triangle (Apollonius), exact for the
                # intrinsic piecewise-flat metric.
                lu = self.edge_length(p, u)
                lv = self.edge_length(p, v)
                luv = self.length[key]
                m = 0.5 * np.sqrt(max(2 * lu * lu + 2 * lv * lv - luv * luv, 0.0))
            kpw = self._key(p, w)
            self.length[kpw] = m
            self.alive[ti] = False
            for child in ((p, u, w), (p, w, v)):
                ci = len(self.tris)
                self.tris.append(child)
                self.region.append(self.region[ti])
                self.scale.append(self.scale[ti])
                self.alive.append(True)
                for kk in range(3):
                    ek = self._key(child[(kk + 1) % 3], child[(kk + 2) % 3])
                    self.edge_tris.setdefault(ek, []).append(ci)

    def freeze(self) -> IntrinsicMesh:
        tris = np.asarray([t for t, al in zip(self.tris, self.alive) if al],
                          dtype=np.int64)
        region = np.asarray([r for r, al in zip(self.region, self.alive) if al],
                            dtype=np.int64)
        scale = np.asarray([s for s, al in zip(self.scale, self.alive) if al])
        coords = np.asarray(self.coords)
        mesh = IntrinsicMesh(coords, tris, region=region, chart=self.chart,
                             period=self.period, tri_scale=scale)
        lens = np.array([self.length[(int(a), int(b))] for a, b in mesh.edges])
        mesh.lengths = lens
        return mesh


def refine_near(mesh: IntrinsicMesh, center: int, radius: float,
                h_local: float) -> IntrinsicMesh:
    """Refine until every triangle within ``radius`` of vertex ``center`` has
    maximum edge length ``<= h_local``.

    Bisection is conforming (neighbours across a split edge are split too),
    so the refined region grades smoothly into the coarse mesh.  Vertex
    indices of the input mesh are preserved; new vertices are appended.
    On charted meshes new vertices land on the chart (midpoints are
    projected to the unit sphere, wrapped on the torus), and edge lengths
    stay consistent with coordinates.  On chartless meshes the bisection is
    intrinsically flat per triangle.

    Parameters
    ----------
    mesh : IntrinsicMesh
    center : int
        Vertex index the refinement is centred on.
    radius : float
        Geodesic radius of the refinement region.
    h_local : float
        Edge-length target inside the region.

    Returns
    -------
    IntrinsicMesh
        New mesh; the input is not modified.
    """
    if h_local <= 0 or radius < 0:
        raise ValueError("radius and h_local must be positive")
    dist = distance_field(mesh, [int(center)])
    em = _EditableMesh(mesh, dist)
    guard = 0
    while True:
        guard += 1
        if guard > 200:
            raise RuntimeError("refinement failed to terminate")
        marked = []
        for ti in range(len(em.tris)):
            if not em.alive[ti]:
                continue
            t = em.tris[ti]
            if min(em.dist[v] for v in t) > radius:
                continue
            key, l = em.longest_edge(ti)
            if l > h_local:
                marked.append(key)
        if not marked:
            break
        for key in sorted(set(marked)):
            a, b = key
            if em._key(a, b) in em.length and any(
                    em.alive[ti] for ti in em.edge_tris.get(key, ())):
                em.split_edge(a, b)
    out = em.freeze()
    out.validate()
    return out
