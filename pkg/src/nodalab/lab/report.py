"""Experiment reports: record collection and deterministic emission.

A report is a flat list of per-(eps, k) records plus a dictionary of
fitted constants.  Emission is a single-threaded fold over records sorted
by (eps, k): given the same config and seed the CSV bytes come out
identical on every run, which the acceptance suite checks literally.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..render import render_loglog_svg, render_mesh_svg

__all__ = ["SweepRecord", "ExperimentReport", "emit_report",
           "load_records_csv"]

_CSV_HEADER = ("eps,k,lambda,lambda_ref,lambda_err,sup_err,verdict,"
               "hausdorff,payne,c_hat,n_domains,flags")


@dataclass
class SweepRecord:
    """One (eps, k) measurement row.

    Fields that a given experiment does not measure hold their neutral
    value: nan for floats, -1 for counts, "" for strings.
    """

    eps: float
    k: int
    lam: float
    lam_ref: float = float("nan")
    lam_err: float = float("nan")
    sup_err: float = float("nan")
    verdict: str = ""
    hausdorff: float = float("nan")
    payne: str = ""
    c_hat: float = float("nan")
    n_domains: int = -1
    flags: str = ""


@dataclass
class ExperimentReport:
    """Everything one experiment produced.

    Attributes
    ----------
    kind : str
        Experiment name ("convergence", "threshold", "payne_attachment",
        "payne_perforation", "lewy_transfer", "m2_profile").
    config : dict
        Flattened config key -> string value, recorded verbatim.
    records : list of SweepRecord
    fitted : dict
        Fitted constants (threshold per m, slopes, residuals, empirical
        constants), keyed by name.
    figures : dict
        Name -> (mesh, nodal_or_None, values_or_None) kept for rendering;
        not serialized into the CSV.
    failures : list of str
        Per-point failure notes (solver non-convergence etc.); a partial
        report still emits.
    """

    kind: str
    config: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures

    def rows_sorted(self):
        return sorted(self.records, key=lambda r: (r.eps, r.k))


def _f(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return "%.17g" % x


def emit_report(report: ExperimentReport, outdir: str | None = None,
                basename: str | None = None, svg: bool = True) -> list:
    """Write the report's CSV tables and SVG figures.

    Parameters
    ----------
    report : ExperimentReport
    outdir : str, optional
        Output directory (created if missing); defaults to the config's
        ``out`` entry or the working directory.
    basename : str, optional
        File stem; defaults to the report kind.
    svg : bool
        Also render figures (error plot from the records, any stored
        mesh/nodal overlays).

    Returns
    -------
    list of str
        Paths written, sorted.
    """
    if outdir is None:
        outdir = report.config.get("out", ".")
    os.makedirs(outdir, exist_ok=True)
    base = basename or report.kind
    paths = []

    rows = report.rows_sorted()
    lines = [_CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            _f(r.eps), str(int(r.k)), _f(r.lam), _f(r.lam_ref),
            _f(r.lam_err), _f(r.sup_err), r.verdict, _f(r.hausdorff),
            r.payne, _f(r.c_hat), str(int(r.n_domains)), r.flags,
        ]))
    csv_path = os.path.join(outdir, base + ".csv")
    with open(csv_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    paths.append(csv_path)

    meta = ["key,value"]
    for k in sorted(report.config):
        meta.append("%s,%s" % (k, report.config[k]))
    for k in sorted(report.fitted):
        v = report.fitted[k]
        meta.append("%s,%s" % (k, _f(v) if isinstance(v, float) else str(v)))
    for i, msg in enumerate(report.failures):
        meta.append("failure.%d,%s" % (i, msg.replace(",", ";")))
    fit_path = os.path.join(outdir, base + "_fit.csv")
    with open(fit_path, "w") as f:
        f.write("\n".join(meta) + "\n")
    paths.append(fit_path)

    if svg:
        ks = sorted({r.k for r in rows})
        err_series = []
        sup_series = []
        for k in ks:
            pe = [(r.eps, r.lam_err) for r in rows
                  if r.k == k and np.isfinite(r.lam_err) and r.lam_err > 0]
            if pe:
                err_series.append(("k=%d" % k, [p[0] for p in pe],
                                   [p[1] for p in pe]))
            ps = [(r.eps, r.sup_err) for r in rows
                  if r.k == k and np.isfinite(r.sup_err) and r.sup_err > 0]
            if ps:
                sup_series.append(("k=%d" % k, [p[0] for p in ps],
                                   [p[1] for p in ps]))
        if err_series:
            p = os.path.join(outdir, base + "_lam_err.svg")
            render_loglog_svg(err_series, path=p, xlabel="eps",
                              ylabel="|lambda(eps) - lambda_ref|",
                              title=base + ": eigenvalue error")
            paths.append(p)
        if sup_series:
            p = os.path.join(outdir, base + "_sup_err.svg")
            render_loglog_svg(sup_series, path=p, xlabel="eps",
                              ylabel="sup error on the bulk",
                              title=base + ": eigenfunction error")
            paths.append(p)
        for name in sorted(report.figures):
            mesh, nodal, values = report.figures[name]
            p = os.path.join(outdir, "%s_%s.svg" % (base, name))
            render_mesh_svg(mesh, path=p, nodal=nodal, values=values)
            paths.append(p)

    return sorted(paths)


def load_records_csv(path) -> ExperimentReport:
    """Read a previously emitted records CSV back into a report.

    Only the tabular part comes back (figures are not serialized); the
    kind is taken from the file stem.  Useful for re-rendering plots.
    """
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError("%s is not a records CSV (bad header)" % path)
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) < 12:
            raise ValueError("short row in %s: %r" % (path, ln))
        # flags may contain commas; everything past column 11 is flags.
        parts = parts[:11] + [",".join(parts[11:])]
        records.append(SweepRecord(
            eps=float(parts[0]), k=int(parts[1]), lam=float(parts[2]),
            lam_ref=float(parts[3]), lam_err=float(parts[4]),
            sup_err=float(parts[5]), verdict=parts[6],
            hausdorff=float(parts[7]), payne=parts[8],
            c_hat=float(parts[9]), n_domains=int(parts[10]),
            flags=parts[11]))
    kind = os.path.splitext(os.path.basename(path))[0]
    return ExperimentReport(kind=kind, records=records)
