"""Command line driver.

Subcommands mirror the package layers: ``mesh`` builds and inspects a
geometry, ``solve`` computes one spectrum, ``nodal`` extracts and counts a
nodal set, ``sweep`` runs the scale sweeps (convergence, threshold, or the
restricted profile), ``payne`` runs the boundary experiments, ``lewy``
searches the sphere clusters and transfers the minimisers, and ``report``
re-renders the plots of an emitted CSV.  Exit code 0 on success, 2 on a
configuration problem, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..mesh import read_mesh, write_mesh
from ..fem import assemble
from ..eigen import SolverError, dump_spectrum, solve_lowest
from ..nodal import classify_containment, count_domains, dump_nodal_csv, \
    extract_level_set
from ..render import render_mesh_svg
from .config import ConfigError, load_sweep_config, parse_geometry
from .lewy import run_lewy_transfer
from .payne import run_payne_attachment, run_payne_perforation
from .report import emit_report, load_records_csv
from .sweeps import estimate_threshold, m2_restricted_profile, \
    run_convergence_sweep

__all__ = ["main"]


def _load_geometry(spec: str, h: float):
    """A geometry argument is either a builder string or a mesh file."""
    if os.path.exists(spec):
        return read_mesh(spec)
    return parse_geometry(spec, h)


def _resolve_bc(mesh, bc: str) -> str:
    if bc != "auto":
        return bc
    return "closed" if mesh.is_closed else "dirichlet"


def _cmd_mesh(args) -> int:
    mesh = _load_geometry(args.geometry, args.h)
    q = mesh.quality()
    print("vertices      %d" % mesh.n_vertices)
    print("triangles     %d" % mesh.n_tris)
    print("edges         %d" % mesh.n_edges)
    print("euler         %d" % mesh.euler_characteristic)
    print("closed        %s" % mesh.is_closed)
    print("oriented      %s" % mesh.is_oriented)
    print("area          %.12g" % mesh.total_area)
    print("median edge   %.6g" % mesh.median_edge)
    print("min angle     %.4g deg" % np.degrees(q.min_angle))
    if args.out:
        write_mesh(mesh, args.out)
        print("wrote %s" % args.out)
    if args.svg:
        render_mesh_svg(mesh, path=args.svg)
        print("wrote %s" % args.svg)
    return 0


def _cmd_solve(args) -> int:
    mesh = _load_geometry(args.geometry, args.h)
    bc = _resolve_bc(mesh, args.bc)
    sp = solve_lowest(assemble(mesh, bc=bc), args.m, seed=args.seed,
                      tol=args.tol)
    print("bc %s, %d pairs (%s)" % (bc, sp.m, sp.method))
    for k in range(sp.m):
        print("%3d  %.12g  (residual %.2e)" % (k, sp.lam[k],
                                               sp.residuals[k]))
    if args.csv:
        dump_spectrum(sp, args.csv)
        print("wrote %s" % args.csv)
    return 0


def _cmd_nodal(args) -> int:
    mesh = _load_geometry(args.geometry, args.h)
    bc = _resolve_bc(mesh, args.bc)
    sp = solve_lowest(assemble(mesh, bc=bc), args.k + 1, seed=args.seed,
                      tol=args.tol)
    u = sp.vecs[:, args.k]
    ns = extract_level_set(mesh, u)
    print("pair %d: lambda %.12g" % (args.k, sp.lam[args.k]))
    print("segments      %d" % ns.n_segments)
    print("components    %d" % ns.n_components)
    print("length        %.8g" % ns.total_length)
    try:
        dom = count_domains(mesh, u)
        print("domains       %d" % dom.count)
    except ValueError as err:
        print("domains       ? (%s)" % err)
    if mesh.region.any():
        print("containment   %s"
              % classify_containment(mesh, ns).classification)
    if args.csv:
        dump_nodal_csv(ns, args.csv)
        print("wrote %s" % args.csv)
    if args.svg:
        render_mesh_svg(mesh, path=args.svg, nodal=ns, values=u)
        print("wrote %s" % args.svg)
    return 0


def _print_report(report, paths) -> None:
    print("experiment    %s" % report.kind)
    print("records       %d" % len(report.records))
    for key in sorted(report.fitted):
        val = report.fitted[key]
        if isinstance(val, float):
            print("  %-22s %.6g" % (key, val))
        else:
            print("  %-22s %s" % (key, val))
    for msg in report.failures:
        print("  FAILED: %s" % msg)
    for p in paths:
        print("wrote %s" % p)


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    if args.mode == "converge":
        report = run_convergence_sweep(cfg)
    elif args.mode == "threshold":
        report = estimate_threshold(cfg)
    else:
        report = m2_restricted_profile(cfg)
    paths = emit_report(report, outdir=args.out or cfg.out,
                        svg=not args.no_svg)
    _print_report(report, paths)
    return 0 if report.complete else 3


def _cmd_payne(args) -> int:
    cfg = load_sweep_config(args.config)
    if args.mode == "attach":
        report = run_payne_attachment(cfg)
    else:
        report = run_payne_perforation(cfg)
    paths = emit_report(report, outdir=args.out or cfg.out,
                        svg=not args.no_svg)
    _print_report(report, paths)
    return 0 if report.complete else 3


def _cmd_lewy(args) -> int:
    cfg = load_sweep_config(args.config)
    degrees = tuple(int(s) for s in args.degrees.split(","))
    report = run_lewy_transfer(cfg, degrees=degrees,
                               n_samples=args.samples)
    paths = emit_report(report, outdir=args.out or cfg.out,
                        svg=not args.no_svg)
    _print_report(report, paths)
    return 0 if report.complete else 3


def _cmd_report(args) -> int:
    report = load_records_csv(args.csv)
    outdir = args.out or os.path.dirname(os.path.abspath(args.csv))
    paths = emit_report(report, outdir=outdir, svg=True)
    _print_report(report, paths)
    return 0


def _add_geometry_args(p, with_bc=True):
    p.add_argument("geometry",
                   help="builder string (sphere:3, rect:2x1:0.05, ...) "
                        "or a mesh file path")
    p.add_argument("--h", type=float, default=0.1,
                   help="target edge length for builders (default 0.1)")
    if with_bc:
        p.add_argument("--bc", choices=("auto", "closed", "neumann",
                                        "dirichlet"), default="auto")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=0.0)


def _add_report_args(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-svg", action="store_true",
                   help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nodalab",
        description="Spectral stability experiments on perturbed "
                    "surfaces and domains.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build or inspect a mesh")
    _add_geometry_args(p, with_bc=False)
    p.add_argument("-o", "--out", default=None, help="write IMESH file")
    p.add_argument("--svg", default=None, help="write SVG view")
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("solve", help="compute one spectrum")
    _add_geometry_args(p)
    p.add_argument("-m", type=int, default=6, dest="m",
                   help="number of pairs (default 6)")
    p.add_argument("--csv", default=None, help="dump spectrum CSV")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("nodal", help="extract and count a nodal set")
    _add_geometry_args(p)
    p.add_argument("-k", type=int, default=1, dest="k",
                   help="pair index (default 1)")
    p.add_argument("--csv", default=None, help="dump segments CSV")
    p.add_argument("--svg", default=None, help="write overlay SVG")
    p.set_defaults(func=_cmd_nodal)

    p = sub.add_parser("sweep", help="run a scale sweep")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--mode", choices=("converge", "threshold", "profile"),
                   default="converge")
    _add_report_args(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("payne", help="second-eigenfunction experiments")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--mode", choices=("attach", "perforate"),
                   default="attach")
    _add_report_args(p)
    p.set_defaults(func=_cmd_payne)

    p = sub.add_parser("lewy", help="cluster search and transfer")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--degrees", default="1,2,3")
    p.add_argument("--samples", type=int, default=1500)
    _add_report_args(p)
    p.set_defaults(func=_cmd_lewy)

    p = sub.add_parser("report", help="re-render plots from a CSV")
    p.add_argument("csv", help="records CSV emitted by an experiment")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_report)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as err:
        print("config error: %s" % err, file=sys.stderr)
        return 2
    except (SolverError, ValueError, RuntimeError,
            np.linalg.LinAlgError) as err:
        print("numerical failure: %s" % err, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
