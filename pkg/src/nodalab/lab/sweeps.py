"""Scale sweeps over families of perturbed geometries.

The central trick here is common-mode error cancellation.  Each sweep
compares the perturbed spectrum against the unperturbed base computed on
the SAME mesh: the base is pre-refined once, until every scheduled scale
finds its seam zone already resolved, so the surgery's internal refinement
is a no-op at every sweep point and the surviving part of the base keeps
one vertex numbering across the whole family.  Differences between
reference and perturbed eigenpairs are then purely the effect of the
surgery; the discretisation error is shared and drops out of the
comparison.

``run_convergence_sweep`` measures eigenvalue and eigenfunction drift over
a geometric schedule of scales, ``estimate_threshold`` locates the largest
scale at which all low nodal sets stay in the untouched bulk (and fits its
decay against the number of tracked eigenvalues), and
``m2_restricted_profile`` isolates the attached piece and tracks its
Dirichlet ground state, which scales like the inverse square of the scale.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..mesh import IntrinsicMesh, RegionTag, chart_distances, refine_near, \
    remove_geodesic_ball
from ..fem import assemble
from ..eigen import balance_clusters, cluster_eigenvalues, solve_lowest
from ..nodal import classify_containment, count_domains, extract_level_set, \
    hausdorff, nodal_distance_field, payne_check, wavelength_density
from ..surgery import GluedSpec, attach_domain, choose_epsilon0, \
    connected_sum, injectivity_cap, select_surgery_vertex, _detect_socket_arc
from .config import ConfigError, SweepConfig, parse_geometry
from .report import ExperimentReport, SweepRecord

__all__ = [
    "SweepPrep",
    "prepare_sweep",
    "run_convergence_sweep",
    "estimate_threshold",
    "m2_restricted_profile",
]

CONTAINED = "CONTAINED_IN_M1_EPS0"

# Eigenpairs are solved with this many columns past the reported range, so
# a degenerate cluster straddling the report boundary is still complete
# and can be balanced and aligned as a block.
SOLVE_PAD = 6


@dataclass
class SweepPrep:
    """Shared state of a sweep: pre-refined base, reference spectrum, and
    the bulk vertex set every comparison is restricted to.

    ``kind`` is "closed" (connected sum, closed problem) or "domain"
    (boundary attachment, Dirichlet problem).  ``bulk`` are the vertex ids
    of the base mesh at distance >= eps0 from the surgery vertex; they
    survive every carve in the schedule, and ``weights`` carries their
    lumped masses for the restricted inner product.  ``probe`` is the
    vertex whose eigenvector values anchor the cluster balancing, and
    ``n_solve`` is the padded number of solved pairs (only the first
    ``n_pairs`` are reported; the pad keeps trailing clusters complete).
    """

    kind: str
    base: IntrinsicMesh
    piece: IntrinsicMesh
    x1: int
    x1_coord: np.ndarray
    probe: int
    bc: str
    eps0: float
    schedule: np.ndarray
    n_loop: int
    n_pairs: int
    n_solve: int
    ref: object
    bulk: np.ndarray
    weights: np.ndarray
    clusters: list = field(default_factory=list)
    ref_nodal: dict = field(default_factory=dict)


def _seam_requirement(kind: str, eps: float, n_loop: int):
    """(radius, edge target) the surgery will ask of the base mesh at a
    given scale; must mirror the surgery's own refinement call exactly."""
    if kind == "closed":
        chord = 2.0 * eps * np.sin(np.pi / n_loop)
    else:
        chord = 2.0 * eps * np.sin(np.pi / (2 * n_loop))
    return eps + 6.0 * chord, chord


def _prerefine(base, x1, kind, schedule, n_loop):
    """Refine the base near the surgery vertex until every scheduled scale
    is already resolved.

    Refinement shortens graph distances, which can pull new triangles into
    a requirement zone, so the chain is repeated until a full pass adds no
    vertices; at that fixpoint the surgery's internal refinement call is a
    no-op for every scale in the schedule.
    """
    m = base
    for _ in range(10):
        before = m.n_vertices
        for eps in sorted(schedule, reverse=True):
            radius, chord = _seam_requirement(kind, float(eps), n_loop)
            m = refine_near(m, x1, radius, chord)
        if m.n_vertices == before:
            return m
    raise RuntimeError("seam pre-refinement did not stabilise")


def _lumped_mass(op):
    return np.asarray(op.M.sum(axis=1)).ravel()


def _probe_vertex(mesh: IntrinsicMesh, x1: int) -> int:
    """Vertex whose eigenvector values anchor the cluster balancing.

    On a closed mesh that is the surgery vertex itself.  On a domain the
    surgery vertex sits on the clamped wall where every mode vanishes, so
    the nearest interior vertex is used instead (lowest index on ties).
    """
    if mesh.is_closed:
        return int(x1)
    on_bd = np.zeros(mesh.n_vertices, dtype=bool)
    for loop in mesh.boundary_loops():
        on_bd[loop] = True
    if not on_bd[x1]:
        return int(x1)
    d = chart_distances(mesh, mesh.coords[x1])
    d[on_bd] = np.inf
    return int(np.argmin(d))


def _check_cluster_pad(clusters, n_pairs: int, n_solve: int):
    """Reject a solve whose trailing cluster is cut off while it still
    touches the reported range; balancing and alignment need every such
    cluster complete."""
    for grp in clusters:
        if grp[0] < n_pairs and grp[-1] >= n_solve - 1:
            raise ConfigError(
                "eigenvalue cluster %d..%d may continue past the padded "
                "solve (%d pairs); raise the pad or lower m"
                % (grp[0], grp[-1], n_solve))


def prepare_sweep(cfg: SweepConfig) -> SweepPrep:
    """Build both factors, resolve eps0, pre-refine the base, and solve
    the reference problem all sweep points are compared against.

    Degenerate clusters of the reference are balanced at the probe
    vertex: the cluster basis is rotated so every member takes the same
    positive value there.  Each individual member then has its zero set
    away from the surgery site, which is the configuration the
    containment statements speak about; without the rotation almost
    every degenerate cluster carries a member vanishing at the site
    itself, and no choice of site avoids that.
    """
    cfg.validate()
    base = parse_geometry(cfg.m1, cfg.h)
    piece = parse_geometry(cfg.m2, cfg.h)
    kind = "closed" if base.is_closed else "domain"
    if kind == "closed" and not piece.is_closed:
        raise ConfigError("a closed base needs a closed attached factor")
    if kind == "domain" and piece.is_closed:
        raise ConfigError("a domain base needs a socket piece, got a "
                          "closed surface")
    bc = "closed" if kind == "closed" else "dirichlet"
    n_pairs = cfg.m + 1 if kind == "closed" else cfg.m
    n_solve = n_pairs + SOLVE_PAD

    # Surgery vertex and collar radius, measured on the unrefined base.
    # The default site maximises clearance from the low nodal sets, which
    # is what the containment statements presume of the surgery point.
    spec0 = None
    if cfg.x1 is not None:
        x1 = cfg.x1
    else:
        spec0 = solve_lowest(assemble(base, bc=bc), n_solve, seed=cfg.seed,
                             tol=cfg.tol)
        x1 = select_surgery_vertex(spec0, n_pairs - 1,
                                   on_boundary=(kind == "domain"),
                                   cluster_tol=cfg.cluster_tol)
    probe = _probe_vertex(base, x1)
    if cfg.eps0 == "auto":
        if spec0 is None:
            spec0 = solve_lowest(assemble(base, bc=bc), n_solve,
                                 seed=cfg.seed, tol=cfg.tol)
        clusters0 = cluster_eigenvalues(spec0.lam, cfg.cluster_tol)
        _check_cluster_pad(clusters0, n_pairs, n_solve)
        spec0.vecs = balance_clusters(spec0.vecs, clusters0, probe)
        eps0 = choose_epsilon0(spec0, n_pairs - 1, x1)
        if eps0 <= 0:
            raise ConfigError("automatic eps0 came out nonpositive; pick "
                              "a surgery vertex with nodal clearance")
    else:
        eps0 = float(cfg.eps0)

    schedule = cfg.schedule(eps0)

    # Ring count is fixed by the attached piece at unit scale.
    if kind == "closed":
        probe_cut = remove_geodesic_ball(piece, 0, 1.0)
        n_loop = len(probe_cut.carve_info["ring"])
    else:
        n_loop = len(_detect_socket_arc(piece)) - 1

    pre = _prerefine(base, x1, kind, schedule, n_loop)
    op = assemble(pre, bc=bc)
    ref = solve_lowest(op, n_solve, seed=cfg.seed, tol=cfg.tol)
    clusters = cluster_eigenvalues(ref.lam, cfg.cluster_tol)
    _check_cluster_pad(clusters, n_pairs, n_solve)
    ref.vecs = balance_clusters(ref.vecs, clusters, probe)

    x1_coord = pre.coords[x1].copy()
    dist = chart_distances(pre, x1_coord)
    bulk = np.flatnonzero(dist >= eps0)
    if len(bulk) == 0:
        raise ConfigError("eps0 swallows the whole base mesh")
    weights = _lumped_mass(op)[bulk]
    ref_nodal = {k: extract_level_set(pre, ref.vecs[:, k])
                 for k in range(n_pairs)}
    return SweepPrep(kind=kind, base=pre, piece=piece, x1=x1,
                     x1_coord=x1_coord, probe=probe, bc=bc, eps0=eps0,
                     schedule=schedule, n_loop=n_loop, n_pairs=n_pairs,
                     n_solve=n_solve, ref=ref, bulk=bulk, weights=weights,
                     clusters=clusters, ref_nodal=ref_nodal)


def _build_point(prep: SweepPrep, eps: float):
    """One perturbed geometry at scale eps, with the base vertex map.

    Raises if the surgery had to refine (the pre-refinement guarantee is
    what makes the sweep a common-mode comparison, so a violation is a
    hard error, not a warning).
    """
    if prep.kind == "closed":
        spec = GluedSpec(epsilon=float(eps), epsilon0=prep.eps0, x1=prep.x1,
                         n_loop=prep.n_loop)
        g = connected_sum(prep.base, prep.piece, spec)
        vmap = g.glue_info["m1_map"]
    else:
        g = attach_domain(prep.base, prep.piece, prep.x1, float(eps))
        vmap = g.attach_info["omega_map"]
        # Tag the collar so containment has the same meaning as on closed
        # geometries: base triangles near the attachment are not bulk.
        tri_min = chart_distances(g, prep.x1_coord)[g.tris].min(axis=1)
        base_tris = np.zeros(g.n_tris, dtype=bool)
        base_tris[g.attach_info["omega_tris"]] = True
        g.region[base_tris & (tri_min < prep.eps0)] = int(RegionTag.M1_COLLAR)
    if len(vmap) != prep.base.n_vertices:
        raise RuntimeError("surgery refined the pre-refined base; the "
                           "sweep would not be a common-mode comparison")
    rows = vmap[prep.bulk]
    if (rows < 0).any():
        raise RuntimeError("a bulk vertex was removed by the carve; "
                           "eps0 and the schedule are inconsistent")
    return g, rows


def _align_to_reference(prep: SweepPrep, sp, rows):
    """Rotate the solved eigenvectors, cluster by cluster, to best match
    the reference on the bulk (orthogonal Procrustes in the lumped-mass
    inner product restricted to surviving base vertices).

    ``rows`` are the solved mesh's vertex ids of the bulk set.  Clusters
    wholly inside the solve pad are left as they come (they are never
    reported).  Returns the aligned full-length block and the largest
    principal angle seen across the aligned clusters.
    """
    aligned = sp.vecs.copy()
    worst = 0.0
    w = prep.weights[:, None]
    for grp in prep.clusters:
        idx = list(grp)
        if idx[0] >= prep.n_pairs:
            break
        R = prep.ref.vecs[prep.bulk][:, idx]
        T = sp.vecs[rows][:, idx]
        B = T.T @ (w * R)
        U, s, Vt = np.linalg.svd(B)
        aligned[:, idx] = sp.vecs[:, idx] @ (U @ Vt)
        ang = float(np.arccos(np.clip(s.min(), -1.0, 1.0)))
        worst = max(worst, ang)
    return aligned, worst


def _sweep_point(prep: SweepPrep, cfg: SweepConfig, eps: float):
    """Solve one sweep point and measure every per-pair quantity."""
    g, rows = _build_point(prep, eps)
    op = assemble(g, bc=prep.bc)
    sp = solve_lowest(op, prep.n_solve, seed=cfg.seed, tol=cfg.tol)

    aligned, worst_angle = _align_to_reference(prep, sp, rows)

    records = []
    nodal_sets = {}
    for k in range(prep.n_pairs):
        lam = float(sp.lam[k])
        lam_ref = float(prep.ref.lam[k])
        u = aligned[:, k]
        sup_err = float(np.abs(prep.ref.vecs[prep.bulk, k]
                               - u[rows]).max())
        ns = extract_level_set(g, u)
        nodal_sets[k] = ns
        verdict = classify_containment(g, ns).classification
        ref_ns = prep.ref_nodal[k]
        if ns.is_empty or ref_ns.is_empty:
            hd = np.nan
        else:
            hd = hausdorff(ref_ns, ns)
        c_hat = (wavelength_density(g, ns, lam)
                 if (not ns.is_empty and lam > 1e-12) else np.nan)
        try:
            n_dom = count_domains(g, u).count
        except ValueError:
            n_dom = -1
        payne = ""
        if prep.kind == "domain" and k == 1:
            # The property asserts boundary contact of the second nodal set.
            payne = "true" if payne_check(g, u).touches else "false"
        records.append(SweepRecord(
            eps=float(eps), k=k, lam=lam, lam_ref=lam_ref,
            lam_err=abs(lam - lam_ref), sup_err=sup_err, verdict=verdict,
            hausdorff=hd, payne=payne, c_hat=c_hat, n_domains=n_dom,
            flags="angle=%.3g" % worst_angle))
    return {"eps": float(eps), "records": records, "mesh": g,
            "nodal": nodal_sets, "values": aligned}


def _log_slope(xs, ys):
    """Least squares slope of log y against log x, with the rms residual.

    Only strictly positive pairs participate; returns (nan, nan) when
    fewer than two remain.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if ok.sum() < 2:
        return np.nan, np.nan
    lx, ly = np.log(xs[ok]), np.log(ys[ok])
    coef = np.polyfit(lx, ly, 1)
    res = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
    return float(coef[0]), res


def _map_points(prep, cfg, worker):
    """Run the per-point worker over the schedule, largest scale first.

    Failures are collected, not raised; a partial sweep still reports.
    """
    eps_list = sorted(prep.schedule, reverse=True)
    results, failures = [], []

    def run(eps):
        try:
            return worker(prep, cfg, eps)
        except (ConfigError, ValueError, RuntimeError) as err:
            return {"eps": float(eps), "error": "%s" % err}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(run, eps_list))
    else:
        out = [run(eps) for eps in eps_list]
    for item in out:
        if "error" in item:
            failures.append("eps=%.6g: %s" % (item["eps"], item["error"]))
        else:
            results.append(item)
    return results, failures


def run_convergence_sweep(cfg: SweepConfig) -> ExperimentReport:
    """Sweep the attachment scale down a geometric schedule and compare
    every eigenpair against the unperturbed reference.

    Records one row per (scale, pair index) with the eigenvalue drift,
    the sup-norm drift of the aligned eigenfunction on the bulk, the
    containment verdict of its nodal set, the Hausdorff distance between
    perturbed and reference nodal sets, and the measured wavelength
    density.  The fitted block carries per-index convergence rates.
    """
    prep = prepare_sweep(cfg)
    results, failures = _map_points(prep, cfg, _sweep_point)

    records = [r for item in results for r in item["records"]]
    fitted = {
        "kind": prep.kind,
        "eps0": prep.eps0,
        "n_loop": prep.n_loop,
        "base_vertices": prep.base.n_vertices,
        "bulk_vertices": len(prep.bulk),
    }
    for k in range(prep.n_pairs):
        eps_k = [r.eps for r in records if r.k == k]
        fitted["rate_lam_%d" % k] = _log_slope(
            eps_k, [r.lam_err for r in records if r.k == k])[0]
        fitted["rate_sup_%d" % k] = _log_slope(
            eps_k, [r.sup_err for r in records if r.k == k])[0]

    figures = {}
    k_show = 1 if prep.n_pairs > 1 else 0
    if not prep.ref_nodal[k_show].is_empty:
        figures["reference"] = (prep.base, prep.ref_nodal[k_show],
                                prep.ref.vecs[:, k_show])
    if results:
        best = min(results, key=lambda item: item["eps"])
        figures["smallest_eps"] = (best["mesh"], best["nodal"][k_show],
                                   best["values"][:, k_show])

    config = cfg.as_flat_dict()
    config["resolved_eps0"] = prep.eps0
    return ExperimentReport(kind="sweep_" + prep.kind, config=config,
                            records=records, fitted=fitted, figures=figures,
                            failures=failures)


def m2_restricted_profile(cfg: SweepConfig) -> ExperimentReport:
    """Dirichlet ground state of the attached piece along the schedule.

    The attached factor carries the scale squared in its metric, so its
    restricted Dirichlet eigenvalues are the unit-scale ones divided by
    the scale squared; the fitted slope of the profile is -2 up to float
    noise, and the unit-scale value solved once serves as the reference.
    """
    prep = prepare_sweep(cfg)
    if prep.kind != "closed":
        raise ConfigError("the restricted profile is a closed-sum "
                          "experiment")

    cut_unit = remove_geodesic_ball(prep.piece, 0, 1.0, n_loop=prep.n_loop)
    lam_unit = float(solve_lowest(assemble(cut_unit, bc="dirichlet"), 1,
                                  seed=cfg.seed, tol=cfg.tol).lam[0])

    def point(prep_, cfg_, eps):
        spec = GluedSpec(epsilon=float(eps), epsilon0=prep_.eps0,
                         x1=prep_.x1, n_loop=prep_.n_loop)
        g = connected_sum(prep_.base, prep_.piece, spec)
        mask = np.zeros(g.n_tris, dtype=bool)
        mask[g.glue_info["m2_tris"]] = True
        sub, _, _ = g.submesh(mask)
        lam = float(solve_lowest(assemble(sub, bc="dirichlet"), 1,
                                 seed=cfg_.seed, tol=cfg_.tol).lam[0])
        lam_ref = lam_unit / eps ** 2
        rec = SweepRecord(eps=float(eps), k=0, lam=lam, lam_ref=lam_ref,
                          lam_err=abs(lam - lam_ref),
                          sup_err=abs(lam - lam_ref) / lam_ref)
        return {"eps": float(eps), "records": [rec]}

    results, failures = _map_points(prep, cfg, point)
    records = [r for item in results for r in item["records"]]
    slope, res = _log_slope([r.eps for r in records],
                            [r.lam for r in records])
    fitted = {"lam_unit": lam_unit, "slope": slope, "slope_residual": res,
              "eps0": prep.eps0}
    config = cfg.as_flat_dict()
    config["resolved_eps0"] = prep.eps0
    return ExperimentReport(kind="m2_profile", config=config,
                            records=records, fitted=fitted,
                            failures=failures)


def _retag_collar(g: IntrinsicMesh, eps0: float):
    """Repaint the first factor's bulk/collar split at a new radius.

    The glued geometry does not depend on the collar radius, only the
    region tags do, so one solved mesh can serve several collar choices.
    """
    sl = g.glue_info["m1_tris"]
    dist = g.glue_info["m1_tri_dist"]
    g.region[sl] = np.where(dist >= eps0, int(RegionTag.M1_BULK),
                            int(RegionTag.M1_COLLAR))


def estimate_threshold(cfg: SweepConfig, m_list=None) -> ExperimentReport:
    """Largest scale with all low nodal sets contained, as a function of
    how many eigenvalues are tracked.

    The collar radius is resolved per entry m: a fixed fraction of the
    smallest clearance between the surgery vertex and the zero sets of
    the tracked eigenfunctions (in the balanced basis), which is how the
    containment statements themselves scale their collar.  A single
    shared radius cannot work across a wide m range: the scales at which
    containment is lost shrink with the clearance, and a radius small
    enough to bracket the largest m censors the smallest.

    For each m the scan walks its schedule until all pair indices 1..m
    are contained, brackets the transition, and bisects geometrically.
    Verdicts are read off the aligned basis (perturbed clusters rotated
    onto the balanced reference), and one solve per scale is shared
    across all m; only the region tags are repainted.  The fitted block
    carries the slope of log(threshold) against log(m) and the empirical
    constant threshold * sqrt(m).
    """
    if m_list is None:
        raw = cfg.extra.get("threshold.m_list", "2,3,4,6,8")
        m_list = sorted(int(s) for s in str(raw).split(","))
    if not m_list or m_list[0] < 1:
        raise ConfigError("threshold m_list must be positive integers")
    m_max = max(m_list)

    base = parse_geometry(cfg.m1, cfg.h)
    piece = parse_geometry(cfg.m2, cfg.h)
    if not (base.is_closed and piece.is_closed):
        raise ConfigError("threshold estimation runs on closed sums")
    n_pairs = m_max + 1
    n_solve = n_pairs + SOLVE_PAD

    op_base = assemble(base, bc="closed")
    ref = solve_lowest(op_base, n_solve, seed=cfg.seed, tol=cfg.tol)
    x1 = int(cfg.x1 if cfg.x1 is not None
             else select_surgery_vertex(ref, m_max,
                                        cluster_tol=cfg.cluster_tol))
    clusters = cluster_eigenvalues(ref.lam, cfg.cluster_tol)
    _check_cluster_pad(clusters, n_pairs, n_solve)
    ref.vecs = balance_clusters(ref.vecs, clusters, x1)

    # Clearance of each tracked zero set from the surgery vertex.
    dist_l = np.full(n_pairs, np.inf)
    for l in range(1, n_pairs):
        ns = extract_level_set(base, ref.vecs[:, l])
        if ns.is_empty:
            continue
        dist_l[l] = float(nodal_distance_field(
            base, ns, include_boundary=False)[x1])
    if not np.all(dist_l[1:] > 0):
        raise ConfigError("surgery vertex sits on a low nodal set; pick "
                          "another vertex")
    inj = injectivity_cap(base, x1)
    frac = float(cfg.extra.get("threshold.collar_frac", 0.9))
    if not 0 < frac < 1:
        raise ConfigError("threshold.collar_frac must be in (0, 1)")

    def collar(m):
        if cfg.eps0 != "auto":
            return float(min(float(cfg.eps0), inj))
        return float(min(frac * np.min(dist_l[1:m + 1]), inj))

    probe_cut = remove_geodesic_ball(piece, 0, 1.0)
    n_loop = len(probe_cut.carve_info["ring"])

    # Alignment region: base vertices the surgery never touches at any
    # probed scale, outside both the carve and its refinement reach.
    eps_hi = 0.98 * max(collar(m) for m in m_list)
    r_al = 1.05 * _seam_requirement("closed", eps_hi, n_loop)[0]
    dist_x1 = chart_distances(base, base.coords[x1])
    al_ids = np.flatnonzero(dist_x1 >= r_al)
    if len(al_ids) == 0:
        raise ConfigError("collar radii leave no untouched region to "
                          "align against")
    w_al = _lumped_mass(op_base)[al_ids]

    cache = {}

    def solve_at(eps):
        """Glued mesh and aligned eigenbasis at one scale, memoised."""
        key = float(eps)
        if key in cache:
            return cache[key]
        spec = GluedSpec(epsilon=key, epsilon0=2.0 * key, x1=x1,
                         n_loop=n_loop)
        g = connected_sum(base, piece, spec)
        sp = solve_lowest(assemble(g, bc="closed"), n_solve, seed=cfg.seed,
                          tol=cfg.tol)
        rows = g.glue_info["m1_map"][al_ids]
        ok = rows >= 0
        R = ref.vecs[al_ids[ok]]
        w = w_al[ok][:, None]
        aligned = sp.vecs.copy()
        for grp in clusters:
            idx = list(grp)
            if idx[0] >= n_pairs:
                break
            T = sp.vecs[rows[ok]][:, idx]
            B = T.T @ (w * R[:, idx])
            U, _, Vt = np.linalg.svd(B)
            aligned[:, idx] = sp.vecs[:, idx] @ (U @ Vt)
        cache[key] = (g, aligned)
        return cache[key]

    vmemo = {}

    def contained(eps, m):
        e0 = collar(m)
        g, aligned = solve_at(eps)
        _retag_collar(g, e0)
        for k in range(1, m + 1):
            mk = (float(eps), round(e0, 12), k)
            v = vmemo.get(mk)
            if v is None:
                ns = extract_level_set(g, aligned[:, k])
                v = classify_containment(g, ns).classification == CONTAINED
                vmemo[mk] = v
            if not v:
                return False
        return True

    records, failures = [], []
    eval_log = {m: [] for m in m_list}

    def probe(eps, m):
        ok = contained(eps, m)
        eval_log[m].append((float(eps), ok))
        return ok

    for m in m_list:
        e0 = collar(m)
        schedule = sorted(cfg.schedule(e0), reverse=True)
        cap = 0.98 * e0
        good, bad = None, None
        for eps in schedule:
            if probe(eps, m):
                good = eps
                break
            bad = eps
        extra = 0
        eps = schedule[-1]
        while good is None and extra < 4:
            eps *= cfg.ratio
            extra += 1
            if probe(eps, m):
                good = eps
            else:
                bad = eps
        if good is None:
            failures.append("m=%d: no contained scale found down to "
                            "%.4g" % (m, eps))
            continue
        if bad is None:
            # Contained already at the top of the schedule; push upward
            # toward the collar to find the other side of the bracket.
            eps = schedule[0]
            while bad is None and eps < cap:
                eps = min(eps / cfg.ratio, cap)
                if probe(eps, m):
                    good = max(good, eps)
                else:
                    bad = eps
            if bad is None:
                failures.append("m=%d: contained all the way up to the "
                                "collar; threshold is off scale" % m)
                records.append(SweepRecord(
                    eps=float(good), k=m, lam=float("nan"),
                    verdict="THRESHOLD_CENSORED",
                    c_hat=float(good) * np.sqrt(m),
                    flags="lo=%.6g,hi=censored,eps0=%.6g" % (good, e0)))
                continue
        width0 = bad - good
        for _ in range(24):
            if bad - good <= width0 / 8.0 or bad / good < 1.02:
                break
            mid = float(np.sqrt(good * bad))
            if probe(mid, m):
                good = mid
            else:
                bad = mid
        # A clean transition has every probed scale below the bracket
        # contained and every one above it not.
        nonmono = ""
        for e, ok in eval_log[m]:
            if (e <= good and not ok) or (e >= bad and ok):
                nonmono = "nonmonotone"
        star = float(np.sqrt(good * bad))
        records.append(SweepRecord(
            eps=star, k=m, lam=float("nan"), verdict="THRESHOLD",
            c_hat=star * np.sqrt(m),
            flags=("lo=%.6g,hi=%.6g,eps0=%.6g" % (good, bad, e0)
                   + ("," + nonmono if nonmono else ""))))

    stars = [(r.k, r.eps) for r in records if r.verdict == "THRESHOLD"]
    fitted = {"n_loop": n_loop, "collar_frac": frac}
    for m in m_list:
        fitted["eps0_m%d" % m] = collar(m)
    if len(stars) >= 2:
        ms = np.array([s[0] for s in stars], dtype=np.float64)
        es = np.array([s[1] for s in stars], dtype=np.float64)
        coef = np.polyfit(np.log(ms), np.log(es), 1)
        resid = float(np.sqrt(np.mean(
            (np.polyval(coef, np.log(ms)) - np.log(es)) ** 2)))
        fitted["slope"] = float(coef[0])
        fitted["c_emp"] = float(np.exp(coef[1]))
        fitted["slope_residual"] = resid

    # Constant predicted by the containment bound, both ways of reading
    # the collar volume (with and without the scaled attached factor).
    dens = [wavelength_density(base, ns, float(ref.lam[k]))
            for k, ns in ((k, extract_level_set(base, ref.vecs[:, k]))
                          for k in range(1, n_pairs))
            if not ns.is_empty]
    if dens and stars:
        c_hat_max = max(dens)
        eps_min = float(min(s[1] for s in stars))
        # The diameter gap is measured on the unit-scale cut piece, so any
        # solved scale carries the same numbers.
        spec_any = next(iter(cache.values()))[0].glue_info["spec"]
        dist = chart_distances(base, base.coords[x1])
        bulk_mask = dist[base.tris].min(axis=1) >= collar(m_max)
        area_bulk = float(base.areas[bulk_mask].sum())
        area_piece = float(piece.total_area)
        d_gap = spec_any.D - spec_any.D_tilde
        fitted["c_hat_max"] = c_hat_max
        fitted["diam_gap"] = float(d_gap)
        fitted["c_bound_bulk"] = float(
            c_hat_max / (d_gap * np.pi) * np.sqrt(np.pi * area_bulk))
        fitted["c_bound_full"] = float(
            c_hat_max / (d_gap * np.pi)
            * np.sqrt(np.pi * (area_bulk + eps_min ** 2 * area_piece)))

    config = cfg.as_flat_dict()
    config["resolved_eps0"] = ",".join("%.9g" % collar(m) for m in m_list)
    config["m_list"] = ",".join(str(m) for m in m_list)
    return ExperimentReport(kind="threshold", config=config,
                            records=records, fitted=fitted,
                            failures=failures)
