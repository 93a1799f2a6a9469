"""Sweep configuration: key-value files and geometry strings.

Config files are plain ``key = value`` text (one pair per line, ``#``
comments).  Keys are dotted:

    geometry.m1 = sphere:3
    geometry.m2 = genus:1:0.2
    geometry.x1 = 37          # optional; deterministic default otherwise
    sweep.eps0 = 0.3          # or "auto" (measured nodal clearance)
    sweep.steps = 5
    sweep.ratio = 0.5
    solve.m = 4
    solve.tol = 1e-9
    solve.cluster_tol = 5e-3
    mesh.h = 0.1
    seed = 0
    workers = 1
    out = ./results

Geometry strings name a builder and its parameters, colon separated:
``sphere:S`` (icosphere, S subdivisions), ``genus:G:h`` (flat torus for
G=1, 4g-gon identification above), ``rect:WxH:h``, ``disk:R:h``,
``polygon:x0,y0;x1,y1;...:h`` and ``socket:h:n_arc[:w:d]`` (attachment
piece, optional bump).  A trailing ``:h`` may be omitted where the config
supplies ``mesh.h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh.build import (build_disk, build_genus_surface, build_polygon,
                          build_rectangle, build_socket, build_sphere)

__all__ = ["SweepConfig", "parse_config", "parse_geometry",
           "load_sweep_config"]


class ConfigError(ValueError):
    """Malformed config file, key, or geometry string."""


@dataclass
class SweepConfig:
    """Parameters of one experiment sweep.

    Attributes
    ----------
    m1, m2 : str
        Geometry strings of the base piece and the attached piece.
    eps0 : float or str
        Containment radius; the schedule lives strictly below it.  The
        string "auto" measures it from the reference nodal clearance.
    steps : int
        Schedule length (at least 3 for trend assertions).
    ratio : float
        Geometric schedule ratio in (0, 1).
    m : int
        Number of nontrivial eigenpairs tracked.
    h : float
        Default mesh parameter for geometry strings that omit theirs.
    x1 : int, optional
        Surgery vertex on m1; a deterministic default is picked when
        absent (topmost vertex on closed surfaces, bottom-edge midpoint
        vertex on domains).
    tol : float
        Relative eigensolver residual bound.
    cluster_tol : float
        Eigenvalue clustering tolerance for subspace alignment.  The
        default sits between the discretisation splitting of a true
        multiple eigenvalue (order h^2 relative) and genuine spectral
        gaps (order one relative), so degenerate clusters are treated as
        blocks even though the mesh breaks their exact equality.
    seed : int
        Seed for the solver start vector and any sampling.
    workers : int
        Sweep-point worker threads (1 = serial).
    out : str
        Output directory for emitted reports.
    """

    m1: str = "sphere:3"
    m2: str = "genus:1:0.2"
    eps0: float | str = 0.3
    steps: int = 5
    ratio: float = 0.5
    m: int = 4
    h: float = 0.1
    x1: int | None = None
    tol: float = 1e-9
    cluster_tol: float = 5e-3
    seed: int = 0
    workers: int = 1
    out: str = "./results"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.steps < 3:
            raise ConfigError("sweep.steps must be at least 3")
        if not 0 < self.ratio < 1:
            raise ConfigError("sweep.ratio must lie in (0, 1)")
        if isinstance(self.eps0, str):
            if self.eps0 != "auto":
                raise ConfigError("sweep.eps0 must be a number or 'auto'")
        elif self.eps0 <= 0:
            raise ConfigError("sweep.eps0 must be positive")
        if self.m < 1:
            raise ConfigError("solve.m must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def schedule(self, eps0: float) -> np.ndarray:
        """Geometric schedule eps0 * ratio^i, i = 1..steps (all < eps0)."""
        return eps0 * self.ratio ** np.arange(1, self.steps + 1)

    def as_flat_dict(self) -> dict:
        d = {
            "geometry.m1": self.m1,
            "geometry.m2": self.m2,
            "sweep.eps0": str(self.eps0),
            "sweep.steps": str(self.steps),
            "sweep.ratio": repr(self.ratio),
            "solve.m": str(self.m),
            "solve.tol": repr(self.tol),
            "solve.cluster_tol": repr(self.cluster_tol),
            "mesh.h": repr(self.h),
            "seed": str(self.seed),
            "workers": str(self.workers),
            "out": self.out,
        }
        if self.x1 is not None:
            d["geometry.x1"] = str(self.x1)
        for k in sorted(self.extra):
            d[k] = str(self.extra[k])
        return d


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into a string dictionary.

    Values keep everything after the first ``=`` (stripped); ``#`` starts
    a comment unless it is inside the value of ``out`` style paths, so
    comments are only recognized at line starts or after whitespace.
    """
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        # Strip trailing comments (whitespace before the hash).
        for i, ch in enumerate(line):
            if ch == "#" and i > 0 and line[i - 1] in " \t":
                line = line[:i].rstrip()
                break
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key '{key}'")
        out[key] = val
    return out


_KNOWN_KEYS = {
    "geometry.m1": ("m1", str),
    "geometry.m2": ("m2", str),
    "geometry.x1": ("x1", int),
    "sweep.eps0": ("eps0", "eps0"),
    "sweep.steps": ("steps", int),
    "sweep.ratio": ("ratio", float),
    "solve.m": ("m", int),
    "solve.tol": ("tol", float),
    "solve.cluster_tol": ("cluster_tol", float),
    "mesh.h": ("h", float),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "out": ("out", str),
}


def load_sweep_config(path_or_text: str, is_text: bool = False) -> SweepConfig:
    """Build a SweepConfig from a config file (or raw text).

    Unknown keys are collected under ``extra`` (runner-specific settings
    like perforation centers live there) rather than rejected.
    """
    if is_text:
        text = path_or_text
    else:
        try:
            with open(path_or_text) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
    raw = parse_config(text)
    cfg = SweepConfig()
    for key, val in raw.items():
        if key in _KNOWN_KEYS:
            attr, conv = _KNOWN_KEYS[key]
            try:
                if conv == "eps0":
                    parsed = val if val == "auto" else float(val)
                else:
                    parsed = conv(val)
            except ValueError as e:
                raise ConfigError(f"key '{key}': {e}") from e
            setattr(cfg, attr, parsed)
        else:
            cfg.extra[key] = val
    cfg.validate()
    return cfg


def parse_geometry(spec: str, h_default: float | None = None):
    """Build the mesh named by a geometry string.

    Returns the mesh; socket strings return the mesh only (the arc is
    re-detected by the attachment).

    Raises
    ------
    ConfigError
        Unknown geometry name or malformed parameters.
    """
    parts = [p for p in str(spec).strip().split(":") if p != ""]
    if not parts:
        raise ConfigError("empty geometry string")
    name = parts[0].lower()
    args = parts[1:]

    def want_h(pos):
        if len(args) > pos:
            return float(args[pos])
        if h_default is not None:
            return float(h_default)
        raise ConfigError(f"geometry '{spec}' needs a mesh size "
                          "(append :h or set mesh.h)")

    try:
        if name == "sphere":
            if not args:
                raise ConfigError("sphere needs a subdivision count")
            return build_sphere(int(args[0]))
        if name == "genus":
            if not args:
                raise ConfigError("genus needs the genus")
            return build_genus_surface(int(args[0]), want_h(1))
        if name == "torus":
            return build_genus_surface(1, want_h(0))
        if name == "rect":
            if not args or "x" not in args[0]:
                raise ConfigError("rect needs WxH")
            w, ht = args[0].lower().split("x", 1)
            return build_rectangle(float(w), float(ht), want_h(1))
        if name == "square":
            return build_rectangle(1.0, 1.0, want_h(0))
        if name == "disk":
            if not args:
                raise ConfigError("disk needs a radius")
            return build_disk(float(args[0]), want_h(1))
        if name == "polygon":
            if not args:
                raise ConfigError("polygon needs vertex list")
            pts = []
            for pair in args[0].split(";"):
                x, y = pair.split(",")
                pts.append((float(x), float(y)))
            return build_polygon(pts, want_h(1))
        if name == "socket":
            if len(args) < 2:
                raise ConfigError("socket needs h and n_arc")
            bump = None
            if len(args) >= 4:
                bump = (float(args[2]), float(args[3]))
            mesh, _ = build_socket(float(args[0]), int(args[1]), bump=bump)
            return mesh
    except ConfigError:
        raise
    except (ValueError, IndexError) as e:
        raise ConfigError(f"geometry '{spec}': {e}") from e
    raise ConfigError(f"unknown geometry '{name}'")


def default_surgery_vertex(mesh) -> int:
    """Deterministic surgery site: topmost vertex on closed surfaces, the
    boundary vertex nearest the bottom-edge midpoint on domains."""
    if mesh.is_closed:
        return int(np.argmax(mesh.coords[:, -1]))
    bv = mesh.boundary_vertices
    p = mesh.coords[bv]
    ymin = p[:, 1].min()
    bottom = bv[p[:, 1] <= ymin + 1e-12]
    xs = mesh.coords[bottom, 0]
    cx = 0.5 * (xs.min() + xs.max())
    return int(bottom[np.argmin(np.abs(xs - cx))])
