"""Stability experiments for the second eigenfunction of a domain.

Two perturbation families share the question "does the nodal line of the
second Dirichlet eigenfunction still reach the boundary, and does it move
only a little": attaching a small protruding piece to the boundary, and
punching small holes well inside.  Both are run over a geometric schedule
of sizes against a fixed reference, and for the perforation family the
mesh is pre-refined once so all hole sizes live on one vertex numbering
and the removed vertex sets nest; the variational monotonicity of the
discrete eigenvalues is then exact, not approximate.
"""

from __future__ import annotations

import numpy as np

from ..mesh import chart_distances, refine_near
from ..fem import assemble
from ..eigen import solve_lowest
from ..nodal import count_domains, extract_level_set, hausdorff, \
    nodal_distance_field, payne_check
from ..surgery import PerforationSpec, perforate
from .config import ConfigError, SweepConfig, parse_geometry
from .report import ExperimentReport, SweepRecord
from .sweeps import _align_to_reference, _build_point, _map_points, \
    prepare_sweep

__all__ = [
    "run_payne_attachment",
    "run_payne_perforation",
]


def _fk_ratio(mesh, u, lam, nodal):
    """Smallest nodal domain area against the area a tube around the
    nodal set can hold, a coarse sanity check that no sliver domain is a
    discretisation artefact.

    A genuine nodal domain of eigenvalue lam has inradius on the order of
    1/sqrt(lam); a fragment much smaller than the tube of that width
    around the zero set would be suspicious.
    """
    dom = count_domains(mesh, u)
    if dom.count == 0 or nodal.is_empty or lam <= 0:
        return np.nan
    tube = 2.0 * nodal.total_length / np.sqrt(lam)
    if tube <= 0:
        return np.nan
    return float(dom.domain_area.min() / tube)


def run_payne_attachment(cfg: SweepConfig) -> ExperimentReport:
    """Attach a protruding boundary piece at a shrinking scale and track
    the second Dirichlet eigenpair.

    Per scale the records carry the raw second eigenvalue, its drift from
    the reference, whether the nodal line touches the boundary, the
    nodal-domain count, the Hausdorff distance of the nodal line from the
    reference one, and a smallest-domain sanity ratio in the flags.
    """
    prep = prepare_sweep(cfg)
    if prep.kind != "domain":
        raise ConfigError("the attachment experiment needs a planar base "
                          "and a socket piece")
    if prep.n_pairs < 2:
        raise ConfigError("need at least two pairs to study the second "
                          "eigenfunction (set solve.m >= 2)")

    ref_u2 = prep.ref.vecs[:, 1]
    ref_ns = prep.ref_nodal[1]
    ref_payne = payne_check(prep.base, ref_u2)

    def point(prep_, cfg_, eps):
        g, rows = _build_point(prep_, eps)
        sp = solve_lowest(assemble(g, bc="dirichlet"), prep_.n_solve,
                          seed=cfg_.seed, tol=cfg_.tol)
        aligned, _ = _align_to_reference(prep_, sp, rows)
        u2 = sp.vecs[:, 1]
        lam2 = float(sp.lam[1])
        ns = extract_level_set(g, u2)
        pr = payne_check(g, u2)
        dom = count_domains(g, u2)
        hd = (np.nan if ns.is_empty or ref_ns.is_empty
              else hausdorff(ref_ns, ns))
        sup = float(np.abs(prep_.ref.vecs[prep_.bulk, 1]
                           - aligned[rows, 1]).max())
        rec = SweepRecord(
            eps=float(eps), k=1, lam=lam2, lam_ref=float(prep_.ref.lam[1]),
            lam_err=abs(lam2 - float(prep_.ref.lam[1])), sup_err=sup,
            verdict="", hausdorff=hd,
            payne="true" if pr.touches else "false",
            c_hat=np.nan, n_domains=dom.count,
            flags="fk=%.3g,bdist=%.3g" % (_fk_ratio(g, u2, lam2, ns),
                                          pr.min_dist))
        return {"eps": float(eps), "records": [rec], "mesh": g,
                "nodal": {1: ns}, "values": np.stack([u2, u2], axis=1)}

    results, failures = _map_points(prep, cfg, point)
    records = [r for item in results for r in item["records"]]
    records_sorted = sorted(records, key=lambda r: r.eps)
    lam_seq = [r.lam for r in sorted(records, key=lambda r: -r.eps)]
    fitted = {
        "eps0": prep.eps0,
        "reference_payne": "true" if ref_payne.touches else "false",
        "reference_lam2": float(prep.ref.lam[1]),
        "lam2_monotone_down": str(all(
            a >= b for a, b in zip(lam_seq, lam_seq[1:]))).lower(),
        "all_two_domains": str(all(
            r.n_domains == 2 for r in records)).lower(),
    }
    figures = {}
    if not ref_ns.is_empty:
        figures["reference"] = (prep.base, ref_ns, ref_u2)
    if results:
        best = min(results, key=lambda item: item["eps"])
        figures["smallest_eps"] = (best["mesh"], best["nodal"][1],
                                   best["values"][:, 0])
    config = cfg.as_flat_dict()
    config["resolved_eps0"] = prep.eps0
    return ExperimentReport(kind="payne_attachment", config=config,
                            records=records_sorted, fitted=fitted,
                            figures=figures, failures=failures)


def _parse_centers(cfg: SweepConfig):
    raw = cfg.extra.get("perforation.centers", "")
    if not raw:
        raise ConfigError("perforation needs perforation.centers = "
                          "\"x,y;x,y;...\" (or \"none\" for the "
                          "degenerate run)")
    if str(raw).strip().lower() == "none":
        return np.zeros((0, 2), dtype=np.float64)
    try:
        pts = [tuple(float(t) for t in part.split(","))
               for part in str(raw).split(";") if part.strip()]
    except ValueError as err:
        raise ConfigError("bad perforation.centers: %s" % err) from None
    if any(len(p) != 2 for p in pts):
        raise ConfigError("perforation centers must be planar points")
    return np.asarray(pts, dtype=np.float64)


def run_payne_perforation(cfg: SweepConfig) -> ExperimentReport:
    """Punch shrinking holes into a planar domain and track the second
    Dirichlet eigenpair.

    The domain is refined once around every centre, at the resolution the
    smallest scheduled radius needs, and all radii are punched into that
    one mesh.  Removed vertex sets then nest as the radius grows, so the
    discrete second eigenvalue is exactly monotone: every perforated
    value is at least the unperforated one, and values decrease as the
    radius shrinks.  The schedule is rejected up front if a hole would
    come within a collar of the reference nodal line.
    """
    omega = parse_geometry(cfg.m1, cfg.h)
    if omega.is_closed or omega.chart != "plane":
        raise ConfigError("perforation runs on a planar domain")
    centers = _parse_centers(cfg)
    degenerate = centers.shape[0] == 0
    n_pairs = max(cfg.m, 2)

    # Resolve the radius schedule first: eps0 is a radius cap here.
    op0 = assemble(omega, bc="dirichlet")
    ref0 = solve_lowest(op0, n_pairs, seed=cfg.seed, tol=cfg.tol)
    ns0 = extract_level_set(omega, ref0.vecs[:, 1])
    if ns0.is_empty:
        raise ConfigError("reference second eigenfunction has no nodal "
                          "line; nothing to perturb against")
    if degenerate:
        clearance = np.inf
    else:
        dist0 = nodal_distance_field(omega, ns0, include_boundary=False)
        near = [int(np.argmin(np.linalg.norm(omega.coords - c, axis=1)))
                for c in centers]
        clearance = float(min(dist0[v] for v in near))
    if cfg.eps0 == "auto":
        eps0 = cfg.h if degenerate else clearance / 3.0
    else:
        eps0 = float(cfg.eps0)
        if eps0 >= clearance:
            raise ConfigError("radius cap %.4g reaches the reference "
                              "nodal line (clearance %.4g)"
                              % (eps0, clearance))
    radii = np.asarray(sorted(cfg.schedule(eps0), reverse=True))

    # One refinement pass per centre, sized for the smallest radius.
    h_fine = max(float(radii[-1]) / 3.0, cfg.h / 64.0)
    pre = omega
    for _ in range(10):
        before = pre.n_vertices
        for c in centers:
            v = int(np.argmin(np.linalg.norm(pre.coords - c, axis=1)))
            pre = refine_near(pre, v, float(radii[0]) * 1.5, h_fine)
        if pre.n_vertices == before:
            break
    else:
        raise RuntimeError("hole refinement did not stabilise")

    op = assemble(pre, bc="dirichlet")
    ref = solve_lowest(op, n_pairs, seed=cfg.seed, tol=cfg.tol)
    ref_ns = extract_level_set(pre, ref.vecs[:, 1])
    lam2_ref = float(ref.lam[1])

    # Vertices far from every hole, for the pointwise comparison.
    if degenerate:
        far = np.arange(pre.n_vertices)
    else:
        dmin = np.min(np.stack([np.linalg.norm(pre.coords - c, axis=1)
                                for c in centers]), axis=0)
        far = np.flatnonzero(dmin > clearance / 2.0)

    records, failures = [], []
    figures = {}
    lam_prev = None
    for radius in radii:
        spec = PerforationSpec(centers=centers, radius=float(radius),
                               clearance=clearance)
        try:
            holed = perforate(pre, spec)
        except ValueError as err:
            failures.append("radius=%.6g: %s" % (radius, err))
            continue
        vmap = holed.perforation_info["vmap"]
        sp = solve_lowest(assemble(holed, bc="dirichlet"), n_pairs,
                          seed=cfg.seed, tol=cfg.tol)
        lam2 = float(sp.lam[1])
        u2 = sp.vecs[:, 1]
        rows = vmap[far]
        keep = rows >= 0
        diff = u2[rows[keep]] - ref.vecs[far[keep], 1]
        # The second pair is simple here; a sign flip is the only gauge.
        sup = float(min(np.abs(diff).max(),
                        np.abs(u2[rows[keep]]
                               + ref.vecs[far[keep], 1]).max()))
        ns = extract_level_set(holed, u2)
        hd = np.nan if ns.is_empty else hausdorff(ref_ns, ns)
        pr = payne_check(holed, u2)
        flags = "bdist=%.3g" % pr.min_dist
        if lam_prev is not None and lam2 > lam_prev + 1e-9 * abs(lam_prev):
            flags += ",nonmonotone"
        lam_prev = lam2
        records.append(SweepRecord(
            eps=float(radius), k=1, lam=lam2, lam_ref=lam2_ref,
            lam_err=abs(lam2 - lam2_ref), sup_err=sup, verdict="",
            hausdorff=hd, payne="true" if pr.touches else "false",
            c_hat=np.nan, n_domains=count_domains(holed, u2).count,
            flags=flags))
        if radius == radii[-1]:
            figures["smallest_radius"] = (holed, ns, u2)

    lam_seq = [r.lam for r in records]
    fitted = {
        "clearance": clearance,
        "radius_cap": eps0,
        "reference_lam2": lam2_ref,
        "lam2_above_reference": str(all(
            r.lam >= lam2_ref - 1e-9 * lam2_ref for r in records)).lower(),
        "lam2_monotone_down": str(all(
            a >= b for a, b in zip(lam_seq, lam_seq[1:]))).lower(),
    }
    if not ref_ns.is_empty:
        figures["reference"] = (pre, ref_ns, ref.vecs[:, 1])
    config = cfg.as_flat_dict()
    config["resolved_eps0"] = eps0
    config["clearance"] = clearance
    return ExperimentReport(kind="payne_perforation", config=config,
                            records=sorted(records, key=lambda r: r.eps),
                            fitted=fitted, figures=figures,
                            failures=failures)
