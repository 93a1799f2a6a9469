"""Experiment harness: sweep configs, runners, reports, and the CLI."""

from .config import (ConfigError, SweepConfig, load_sweep_config,
                     parse_config, parse_geometry)
from .report import (ExperimentReport, SweepRecord, emit_report,
                     load_records_csv)
from .sweeps import (estimate_threshold, m2_restricted_profile,
                     prepare_sweep, run_convergence_sweep)
from .payne import run_payne_attachment, run_payne_perforation
from .lewy import LewyResult, harmonic_block, lewy_search, run_lewy_transfer
from .cli import main

__all__ = [
    "ConfigError",
    "SweepConfig",
    "parse_config",
    "parse_geometry",
    "load_sweep_config",
    "SweepRecord",
    "ExperimentReport",
    "emit_report",
    "load_records_csv",
    "prepare_sweep",
    "run_convergence_sweep",
    "estimate_threshold",
    "m2_restricted_profile",
    "run_payne_attachment",
    "run_payne_perforation",
    "LewyResult",
    "harmonic_block",
    "lewy_search",
    "run_lewy_transfer",
    "main",
]
