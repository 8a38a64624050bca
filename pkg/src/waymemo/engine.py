"""Backend selection and the batch lane-running API.

The per-record simulation loop is the hot path, so it exists twice: a
compiled extension (``waymemo._kernels``, Cython) and a pure-Python
fallback (``waymemo._pykernels``) built on the reference pipeline classes.
The compiled engine is used when importable; set ``WAYMEMO_ENGINE=python``
or ``WAYMEMO_ENGINE=compiled`` to force one.  Both produce identical
outputs (see tests/test_engine_equivalence.py and benchmarks/).

A *lane* is one (cache side, mode, buffer config) simulation of a trace.
Running a lane yields per-record outcome arrays plus final counters, which
is what the differential harness compares across lanes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _pykernels
from .energy_stats import Counters
from .geometry import CacheGeometry
from .icache_path import TraceOrderError
from .mab import MabConfig
from .trace_io import IFetch, Load, Store, TraceRecord

try:
    from . import _kernels
except ImportError:  # pure-python install
    _kernels = None

_env = os.environ.get("WAYMEMO_ENGINE", "").strip().lower()
if _env in ("python", "pure"):
    _DEFAULT_BACKEND = "python"
elif _env in ("compiled", "cython", "c"):
    if _kernels is None:
        raise ImportError("WAYMEMO_ENGINE=compiled but waymemo._kernels is not built")
    _DEFAULT_BACKEND = "compiled"
elif _env:
    raise ValueError(f"unknown WAYMEMO_ENGINE value {_env!r}")
else:
    _DEFAULT_BACKEND = "compiled" if _kernels is not None else "python"


def active_backend() -> str:
    """Name of the engine used by default: 'compiled' or 'python'."""
    return _DEFAULT_BACKEND


def available_backends() -> Tuple[str, ...]:
    return ("python",) if _kernels is None else ("python", "compiled")


def _module(backend: Optional[str]):
    name = backend or _DEFAULT_BACKEND
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _kernels is None:
            raise ValueError("compiled engine requested but not built")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


RTYPE_IFETCH, RTYPE_LOAD, RTYPE_STORE = 0, 1, 2
_TKIND_CODE = {"seq": 0, "br": 1, "lnk": 2}

D_MODE_CODE = {"baseline": 0, "mab": 1}
I_MODE_CODE = {"baseline": 0, "intra_only": 1, "full_mab": 2}


@dataclass(frozen=True)
class RecordArrays:
    """Trace packed into flat arrays for the engines."""

    rtype: np.ndarray  # uint8: 0 fetch, 1 load, 2 store
    addr: np.ndarray   # int64: pc or base
    aux: np.ndarray    # int64: displacement or link target
    tkind: np.ndarray  # uint8: 0 seq, 1 br, 2 lnk (fetches only)

    @property
    def n(self) -> int:
        return int(self.rtype.shape[0])


def records_to_arrays(records: Sequence[TraceRecord]) -> RecordArrays:
    n = len(records)
    rtype = np.zeros(n, np.uint8)
    addr = np.zeros(n, np.int64)
    aux = np.zeros(n, np.int64)
    tkind = np.zeros(n, np.uint8)
    for i, rec in enumerate(records):
        if isinstance(rec, IFetch):
            addr[i] = rec.pc
            aux[i] = rec.arg
            tkind[i] = _TKIND_CODE[rec.transfer]
        elif isinstance(rec, Load):
            rtype[i] = RTYPE_LOAD
            addr[i] = rec.base
            aux[i] = rec.disp
        elif isinstance(rec, Store):
            rtype[i] = RTYPE_STORE
            addr[i] = rec.base
            aux[i] = rec.disp
        else:
            raise TypeError(f"not a trace record: {rec!r}")
    return RecordArrays(rtype, addr, aux, tkind)


def validate_fetch_order(ra: RecordArrays, g: CacheGeometry) -> None:
    """Reject traces whose fetch pcs contradict the transfer markers."""
    ipos = np.flatnonzero(ra.rtype == RTYPE_IFETCH)
    if ipos.size < 2:
        return
    pcs = ra.addr[ipos]
    tks = ra.tkind[ipos]
    args = ra.aux[ipos]
    expected = np.where(
        tks == 0, pcs + g.instr_stride_bytes, np.where(tks == 1, pcs + args, args)
    ) & np.int64(g.address_mask)
    bad = np.flatnonzero(pcs[1:] != expected[:-1])
    if bad.size:
        k = int(bad[0])
        raise TraceOrderError(
            f"record {int(ipos[k + 1])}: fetch pc {int(pcs[k + 1]):#x} contradicts "
            f"predecessor at record {int(ipos[k])} (expected {int(expected[k]):#x})"
        )


@dataclass(frozen=True)
class LaneSpec:
    """One simulation lane: side 'd' or 'i', a mode, and a buffer config."""

    side: str
    mode: str
    mab: Optional[MabConfig] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.side not in ("d", "i"):
            raise ValueError(f"side must be 'd' or 'i', got {self.side!r}")
        codes = D_MODE_CODE if self.side == "d" else I_MODE_CODE
        if self.mode not in codes:
            raise ValueError(f"bad mode {self.mode!r} for side {self.side!r}")
        if self.uses_mab and self.mab is None:
            object.__setattr__(self, "mab", MabConfig() if self.side == "d"
                               else MabConfig(n_tag_rows=2, n_index_cols=16))

    @property
    def uses_mab(self) -> bool:
        return (self.side == "d" and self.mode == "mab") or (
            self.side == "i" and self.mode == "full_mab"
        )

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        suffix = ""
        if self.uses_mab and not self.mab.precise_invalidation:
            suffix = ":literal"
        return f"{self.side}:{self.mode}{suffix}"


@dataclass
class LaneResult:
    spec: LaneSpec
    counters: Counters
    arrays: Dict[str, np.ndarray]
    violations: List[tuple] = field(default_factory=list)
    violations_total: int = 0


def run_lane(
    ra: RecordArrays,
    geometry: CacheGeometry,
    spec: LaneSpec,
    *,
    allocate_on_store: bool = True,
    refill_tag_writes: int = 1,
    refill_way_writes: int = 1,
    audit: bool = True,
    backend: Optional[str] = None,
) -> LaneResult:
    """Simulate one lane over a packed trace."""
    mod = _module(backend)
    geom = (
        geometry.address_bits,
        geometry.offset_bits,
        geometry.index_bits,
        geometry.ways,
        geometry.instr_stride_bytes,
    )
    mab = spec.mab if spec.uses_mab else None
    n1 = mab.n_tag_rows if mab else 1
    n2 = mab.n_index_cols if mab else 1
    precise = int(mab.precise_invalidation) if mab else 1
    if spec.side == "i":
        validate_fetch_order(ra, geometry)
        raw = mod.run_i_lane(
            ra.rtype, ra.addr, ra.aux, ra.tkind, geom, I_MODE_CODE[spec.mode],
            n1, n2, precise, int(allocate_on_store),
            refill_tag_writes, refill_way_writes, int(audit),
        )
    else:
        raw = mod.run_d_lane(
            ra.rtype, ra.addr, ra.aux, ra.tkind, geom, D_MODE_CODE[spec.mode],
            n1, n2, precise, int(allocate_on_store),
            refill_tag_writes, refill_way_writes, int(audit),
        )
    counters = Counters(**{k: int(v) for k, v in raw.pop("counters").items()})
    violations = [tuple(int(x) for x in v) for v in raw.pop("violations")]
    total = int(raw.pop("violations_total"))
    return LaneResult(spec, counters, raw, violations, total)


def run_lanes(
    records_or_arrays,
    geometry: CacheGeometry,
    specs: Sequence[LaneSpec],
    **kwargs,
) -> Dict[str, LaneResult]:
    """Run several lanes over the same trace; keyed by lane name."""
    if isinstance(records_or_arrays, RecordArrays):
        ra = records_or_arrays
    else:
        ra = records_to_arrays(records_or_arrays)
    results: Dict[str, LaneResult] = {}
    for spec in specs:
        if spec.name in results:
            raise ValueError(f"duplicate lane name {spec.name!r}")
        results[spec.name] = run_lane(ra, geometry, spec, **kwargs)
    return results


def predict_batch(base, disp, geometry: CacheGeometry, backend: Optional[str] = None) -> dict:
    """Vectorized narrow-adder prediction (see :func:`waymemo.mab.predict`)."""
    geom = (
        geometry.address_bits,
        geometry.offset_bits,
        geometry.index_bits,
        geometry.ways,
        geometry.instr_stride_bytes,
    )
    return _module(backend).predict_batch(base, disp, geom)
