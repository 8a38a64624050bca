"""Trace-driven simulator of way-memoizing set-associative caches.

A small address buffer remembers recently used (tag, set-index) pairs and
the cache way each one resolved to; a hit in the buffer skips the tag
check and reads a single way.  This package models the mechanism over
instruction/data traces, counts tag and way accesses under several modes,
audits the buffer-cache consistency contract, and evaluates an
access-count power model.
"""

from .cache_model import AccessOutcome, LineMeta, SetAssocCache
from .dcache_path import DAccessReport, DCachePipeline
from .energy_stats import (
    Counters,
    EnergyParams,
    MAB_POWER_TABLE_W,
    PowerReport,
    evaluate,
    mab_power_lookup,
)
from .engine import LaneSpec, active_backend, available_backends, predict_batch
from .geometry import AddressParts, CacheGeometry, compose, decompose, same_line
from .harness import AuditReport, Violation, default_lanes, differential_run, sweep
from .icache_path import IAccessReport, ICachePipeline, classify
from .mab import Cflag, Mab, MabConfig, MabOutcome, Prediction, predict
from .trace_io import (
    IFetch,
    Load,
    Store,
    TraceParseError,
    emit,
    gen_loop,
    gen_random,
    parse,
)

__version__ = "0.1.0"

__all__ = [
    "AccessOutcome",
    "AddressParts",
    "AuditReport",
    "CacheGeometry",
    "Cflag",
    "Counters",
    "DAccessReport",
    "DCachePipeline",
    "EnergyParams",
    "IAccessReport",
    "ICachePipeline",
    "IFetch",
    "LaneSpec",
    "LineMeta",
    "Load",
    "MAB_POWER_TABLE_W",
    "Mab",
    "MabConfig",
    "MabOutcome",
    "PowerReport",
    "Prediction",
    "SetAssocCache",
    "Store",
    "TraceParseError",
    "Violation",
    "active_backend",
    "available_backends",
    "classify",
    "compose",
    "decompose",
    "default_lanes",
    "differential_run",
    "emit",
    "evaluate",
    "gen_loop",
    "gen_random",
    "mab_power_lookup",
    "parse",
    "predict",
    "predict_batch",
    "same_line",
    "sweep",
    "__version__",
]
