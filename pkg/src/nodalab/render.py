"""Deterministic SVG rendering of meshes, nodal sets, and sweep plots.

Figures are built as plain strings with fixed number formatting and index
iteration order, so re-rendering the same objects yields byte-identical
files (the determinism the experiment reports promise).  No plotting
library is involved; the SVGs are self contained.

Projections: planar meshes draw directly; spheres draw in orthographic
projection along +z with back faces culled; tori unwrap to the fundamental
square (wrapping elements are skipped rather than drawn across the seam).
Glued meshes without a chart fall back on their coordinate dimension.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_mesh_svg", "render_loglog_svg"]

# Line/fill palette (region tints pale, overlays saturated).
_REGION_FILL = {
    0: "#dde8f2",   # M1_BULK
    1: "#c4d7ea",   # M1_COLLAR
    2: "#f2e3cd",   # M2
    3: "#e8cfc4",   # NECK
    4: "#dde8f2",   # OMEGA1
    5: "#f2e3cd",   # OMEGA2
}
_COMPONENT_COLORS = ["#c22f2f", "#2f5fc2", "#2f9e44", "#b0508e",
                     "#c2852f", "#4fb3b3"]


def _project(mesh):
    """Vertex positions in figure coordinates plus a triangle mask."""
    xy = None
    keep_tri = np.ones(mesh.n_tris, dtype=bool)
    if mesh.chart == "torus":
        xy = mesh.coords[:, :2].copy()
        P = mesh.period
        span = np.abs(xy[mesh.tris] - xy[mesh.tris][:, [0], :])
        keep_tri = ~np.any(span > 0.5 * P, axis=(1, 2))
    elif mesh.coords.shape[1] == 2:
        xy = mesh.coords.copy()
    else:
        xy = mesh.coords[:, :2].copy()
        if mesh.is_closed:
            # Orthographic along +z: cull triangles facing away.
            t = mesh.coords[mesh.tris]
            n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
            keep_tri = n[:, 2] > 0.0
    xy = xy.copy()
    xy[:, 1] = -xy[:, 1]
    return xy, keep_tri


def _seg_project(mesh, pts):
    """Project nodal points (matching _project's map)."""
    q = pts[:, :2].copy()
    q[:, 1] = -q[:, 1]
    return q


def _fmt(x: float) -> str:
    return "%.3f" % x


def render_mesh_svg(mesh, path=None, nodal=None, values=None,
                    show_edges=True, width=640) -> str:
    """Draw a mesh, optionally tinted by eigenfunction sign and overlaid
    with a nodal set.

    Parameters
    ----------
    mesh : IntrinsicMesh
    path : str, optional
        File to write; the SVG text is returned either way.
    nodal : NodalSet, optional
        Level set to overlay, colored by connected component.
    values : ndarray, optional
        Vertex scalars; triangles are tinted by the sign of their vertex
        mean (Chladni style) instead of the region palette.
    show_edges : bool
        Draw interior edges (thin); boundary edges are always drawn.
    width : int
        Figure width in pixels; height follows the aspect ratio.

    Returns
    -------
    str
        The SVG document.
    """
    xy, keep_tri = _project(mesh)
    shown = xy[np.unique(mesh.tris[keep_tri])] if keep_tri.any() else xy
    lo = shown.min(axis=0)
    hi = shown.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    pad = 0.04 * span.max()
    lo = lo - pad
    span = span + 2 * pad
    height = int(round(width * span[1] / span[0]))
    sc = width / span[0]

    def pt(i):
        return _fmt((xy[i, 0] - lo[0]) * sc), _fmt((xy[i, 1] - lo[1]) * sc)

    out = []
    out.append('<svg xmlns="http://www.w3.org/2000/svg" '
               'width="%d" height="%d" viewBox="0 0 %d %d">'
               % (width, height, width, height))
    out.append('<rect width="%d" height="%d" fill="#ffffff"/>' % (width, height))

    vm = None
    if values is not None:
        values = np.asarray(values, dtype=np.float64)
        vm = float(np.abs(values).max()) or 1.0

    for ti in range(mesh.n_tris):
        if not keep_tri[ti]:
            continue
        t = mesh.tris[ti]
        if values is not None:
            mean = float(values[t].mean()) / vm
            if mean >= 0:
                s = min(1.0, mean)
                fill = "#%02x%02xff" % (int(255 - 120 * s), int(255 - 120 * s))
            else:
                s = min(1.0, -mean)
                fill = "#ff%02x%02x" % (int(255 - 120 * s), int(255 - 120 * s))
        else:
            fill = _REGION_FILL.get(int(mesh.region[ti]), "#e8e8e8")
        p0, p1, p2 = pt(t[0]), pt(t[1]), pt(t[2])
        out.append('<polygon points="%s,%s %s,%s %s,%s" fill="%s" '
                   'stroke="none"/>'
                   % (p0[0], p0[1], p1[0], p1[1], p2[0], p2[1], fill))

    if show_edges:
        seen_pts = set(np.unique(mesh.tris[keep_tri]).tolist())
        bmask = mesh.boundary_edge_mask
        lines = []
        for ei, (a, b) in enumerate(mesh.edges):
            if a not in seen_pts or b not in seen_pts:
                continue
            if mesh.chart == "torus":
                d = np.abs(xy[a] - xy[b])
                if np.any(d > 0.5 * mesh.period):
                    continue
            pa, pb = pt(a), pt(b)
            if bmask[ei]:
                lines.append('<line x1="%s" y1="%s" x2="%s" y2="%s" '
                             'stroke="#222222" stroke-width="1.6"/>'
                             % (pa[0], pa[1], pb[0], pb[1]))
            else:
                lines.append('<line x1="%s" y1="%s" x2="%s" y2="%s" '
                             'stroke="#9aa4ad" stroke-width="0.4"/>'
                             % (pa[0], pa[1], pb[0], pb[1]))
        out.extend(lines)

    if nodal is not None and not nodal.is_empty:
        q = _seg_project(mesh, nodal.pt_coords)
        for si in range(nodal.n_segments):
            a, b = nodal.segments[si]
            if mesh.chart == "torus":
                if np.any(np.abs(nodal.pt_coords[a, :2] -
                                 nodal.pt_coords[b, :2]) > 0.5 * mesh.period):
                    continue
            if mesh.coords.shape[1] == 3 and mesh.is_closed:
                mid = 0.5 * (nodal.pt_coords[a] + nodal.pt_coords[b])
                if len(mid) == 3 and mid[2] < 0:
                    continue
            col = _COMPONENT_COLORS[int(nodal.seg_component[si])
                                    % len(_COMPONENT_COLORS)]
            xa = _fmt((q[a, 0] - lo[0]) * sc)
            ya = _fmt((q[a, 1] - lo[1]) * sc)
            xb = _fmt((q[b, 0] - lo[0]) * sc)
            yb = _fmt((q[b, 1] - lo[1]) * sc)
            out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" '
                       'stroke="%s" stroke-width="2.2" '
                       'stroke-linecap="round"/>' % (xa, ya, xb, yb, col))

    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def render_loglog_svg(series, path=None, xlabel="", ylabel="", title="",
                      guides=(), width=560, height=420) -> str:
    """Log-log line plot of one or more (label, x, y) series.

    Parameters
    ----------
    series : list of (str, array, array)
        Label and data per curve; points with nonpositive coordinates are
        dropped (cannot be placed on log axes).
    guides : list of (float, float, str), optional
        Reference lines given as (slope, y at the left edge of the x
        range, label), drawn dashed across the plot.

    Returns
    -------
    str
        The SVG document.
    """
    ml, mr, mt, mb = 64, 16, 28, 46
    pw, ph = width - ml - mr, height - mt - mb

    pts = []
    for _, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        ok = (xs > 0) & (ys > 0)
        pts.append((np.log10(xs[ok]), np.log10(ys[ok])))
    allx = np.concatenate([p[0] for p in pts]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    if allx.size == 0:
        allx = np.array([0.0, 1.0])
        ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    for g_slope, g_y0, _ in guides:
        gy = np.log10(g_y0) + g_slope * (np.array([x0, x1]) - x0)
        y0 = min(y0, float(gy.min()))
        y1 = max(y1, float(gy.max()))
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    x0, x1 = x0 - 0.05 * (x1 - x0), x1 + 0.05 * (x1 - x0)
    y0, y1 = y0 - 0.08 * (y1 - y0), y1 + 0.08 * (y1 - y0)

    def fx(lx):
        return ml + (lx - x0) / (x1 - x0) * pw

    def fy(ly):
        return mt + (y1 - ly) / (y1 - y0) * ph

    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
           'viewBox="0 0 %d %d">' % (width, height, width, height),
           '<rect width="%d" height="%d" fill="#ffffff"/>' % (width, height),
           '<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
           'stroke="#444444" stroke-width="1"/>' % (ml, mt, pw, ph)]

    # Decade ticks (at most every integer power inside the range).
    for d in range(int(np.ceil(x0)), int(np.floor(x1)) + 1):
        x = fx(d)
        out.append('<line x1="%s" y1="%d" x2="%s" y2="%d" stroke="#cccccc" '
                   'stroke-width="0.6"/>' % (_fmt(x), mt, _fmt(x), mt + ph))
        out.append('<text x="%s" y="%d" font-size="11" fill="#333333" '
                   'text-anchor="middle" font-family="monospace">1e%d</text>'
                   % (_fmt(x), mt + ph + 16, d))
    for d in range(int(np.ceil(y0)), int(np.floor(y1)) + 1):
        y = fy(d)
        out.append('<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="#cccccc" '
                   'stroke-width="0.6"/>' % (ml, _fmt(y), ml + pw, _fmt(y)))
        out.append('<text x="%d" y="%s" font-size="11" fill="#333333" '
                   'text-anchor="end" font-family="monospace">1e%d</text>'
                   % (ml - 6, _fmt(float(y) + 4), d))

    for gi, (g_slope, g_y0, g_label) in enumerate(guides):
        ly0 = np.log10(g_y0)
        ly1 = ly0 + g_slope * (x1 - x0)
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#888888" '
                   'stroke-width="1" stroke-dasharray="5,4"/>'
                   % (_fmt(fx(x0)), _fmt(fy(ly0)),
                      _fmt(fx(x1)), _fmt(fy(ly1))))
        if g_label:
            out.append('<text x="%s" y="%s" font-size="11" fill="#666666" '
                       'font-family="monospace">%s</text>'
                       % (_fmt(fx(x0) + 6), _fmt(fy(ly0) - 6), g_label))

    for ci, ((label, _, _), (lx, ly)) in enumerate(zip(series, pts)):
        col = _COMPONENT_COLORS[ci % len(_COMPONENT_COLORS)]
        if len(lx):
            d = " ".join("%s,%s" % (_fmt(fx(a)), _fmt(fy(b)))
                         for a, b in zip(lx, ly))
            out.append('<polyline points="%s" fill="none" stroke="%s" '
                       'stroke-width="1.6"/>' % (d, col))
            for a, b in zip(lx, ly):
                out.append('<circle cx="%s" cy="%s" r="2.6" fill="%s"/>'
                           % (_fmt(fx(a)), _fmt(fy(b)), col))
        out.append('<text x="%d" y="%d" font-size="12" fill="%s" '
                   'font-family="monospace">%s</text>'
                   % (ml + 10, mt + 16 + 15 * ci, col, label))

    if title:
        out.append('<text x="%d" y="%d" font-size="13" fill="#111111" '
                   'text-anchor="middle" font-family="monospace">%s</text>'
                   % (ml + pw // 2, mt - 8, title))
    if xlabel:
        out.append('<text x="%d" y="%d" font-size="12" fill="#111111" '
                   'text-anchor="middle" font-family="monospace">%s</text>'
                   % (ml + pw // 2, height - 10, xlabel))
    if ylabel:
        out.append('<text x="14" y="%d" font-size="12" fill="#111111" '
                   'text-anchor="middle" font-family="monospace" '
                   'transform="rotate(-90 14 %d)">%s</text>'
                   % (mt + ph // 2, mt + ph // 2, ylabel))

    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
