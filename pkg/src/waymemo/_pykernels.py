"""Pure-Python lane runner: the fallback engine.

Drives the reference pipeline classes record by record and collects
per-record outcome arrays.  The compiled engine in ``_kernels.pyx``
mirrors this module; the equivalence tests hold both to identical output,
so this file doubles as the executable definition of lane semantics.
"""

from __future__ import annotations

import numpy as np

from .dcache_path import DCachePipeline, LOAD, STORE
from .geometry import CacheGeometry
from .icache_path import ICachePipeline
from .mab import MabConfig
from .trace_io import IFetch, TRANSFER_BRANCH, TRANSFER_LINK, TRANSFER_SEQ

VIOLATION_CAP = 1000

_D_MODES = ("baseline", "mab")
_I_MODES = ("baseline", "intra_only", "full_mab")
_TRANSFERS = (TRANSFER_SEQ, TRANSFER_BRANCH, TRANSFER_LINK)
_FLOW_CODE = {
    "first_fetch": 1,
    "intra_seq": 2,
    "intra_nonseq": 3,
    "inter_seq": 4,
    "inter_nonseq": 5,
}


def _geometry(geom: tuple) -> CacheGeometry:
    address_bits, offset_bits, index_bits, ways, stride = geom
    return CacheGeometry.from_bits(address_bits, offset_bits, index_bits, ways, stride)


def _alloc(n: int) -> dict:
    return {
        "applies": np.zeros(n, np.uint8),
        "cache_hit": np.zeros(n, np.uint8),
        "way": np.full(n, -1, np.int8),
        "victim_tag": np.full(n, -1, np.int64),
        "victim_index": np.full(n, -1, np.int64),
        "tag_reads": np.zeros(n, np.int32),
        "way_accesses": np.zeros(n, np.int32),
        "refill_tag_writes": np.zeros(n, np.int32),
        "refill_way_writes": np.zeros(n, np.int32),
        "mab_event": np.zeros(n, np.uint8),
        "flow": np.zeros(n, np.uint8),
    }


def _audit_mab(mab, cache, step: int, violations: list, total: int) -> int:
    """Row-major scan of valid pairs against the cache; returns new total."""
    n1, n2 = mab.config.n_tag_rows, mab.config.n_index_cols
    for i in range(n1):
        if not mab.rows[i].valid:
            continue
        etag = mab.effective_tag(i)
        for j in range(n2):
            if not (mab.vflag[i][j] and mab.cols[j].valid):
                continue
            idx = mab.cols[j].index
            probe = cache.probe_line(etag, idx)
            if probe != mab.memo_way[i][j]:
                total += 1
                if len(violations) < VIOLATION_CAP:
                    violations.append(
                        (step, etag, idx, mab.memo_way[i][j], -1 if probe is None else probe)
                    )
    return total


def _fill(out: dict, step: int, rep) -> None:
    out["applies"][step] = 1
    out["cache_hit"][step] = 1 if rep.cache_hit else 0
    out["way"][step] = -1 if rep.way is None else rep.way
    if rep.victim is not None:
        out["victim_tag"][step] = rep.victim[0]
        out["victim_index"][step] = rep.victim[1]
    out["tag_reads"][step] = rep.tag_reads
    out["way_accesses"][step] = rep.way_accesses
    out["refill_tag_writes"][step] = rep.refill_tag_writes
    out["refill_way_writes"][step] = rep.refill_way_writes
    if rep.bypass:
        out["mab_event"][step] = 3
    elif rep.mab_hit:
        out["mab_event"][step] = 1


def run_d_lane(
    rtype,
    addr,
    aux,
    tkind,
    geom: tuple,
    mode: int,
    n1: int,
    n2: int,
    precise: int,
    allocate_on_store: int,
    refill_tag_writes: int,
    refill_way_writes: int,
    audit: int,
) -> dict:
    g = _geometry(geom)
    mode_name = _D_MODES[mode]
    pipe = DCachePipeline(
        g,
        mode_name,
        MabConfig(n1, n2, bool(precise)) if mode_name == "mab" else None,
        allocate_on_store=bool(allocate_on_store),
        refill_tag_writes=refill_tag_writes,
        refill_way_writes=refill_way_writes,
    )
    n = len(rtype)
    out = _alloc(n)
    violations: list = []
    total = 0
    rtype_l, addr_l, aux_l = rtype.tolist(), addr.tolist(), aux.tolist()
    do_audit = bool(audit) and pipe.mab is not None
    for step in range(n):
        rt = rtype_l[step]
        if rt == 0:
            continue
        rep = pipe.access(LOAD if rt == 1 else STORE, addr_l[step], aux_l[step])
        _fill(out, step, rep)
        if not rep.bypass and not rep.mab_hit and pipe.mab is not None:
            out["mab_event"][step] = 2
        if do_audit:
            total = _audit_mab(pipe.mab, pipe.cache, step, violations, total)
    out["counters"] = pipe.counters.as_dict()
    out["violations"] = violations
    out["violations_total"] = total
    return out


def run_i_lane(
    rtype,
    addr,
    aux,
    tkind,
    geom: tuple,
    mode: int,
    n1: int,
    n2: int,
    precise: int,
    allocate_on_store: int,
    refill_tag_writes: int,
    refill_way_writes: int,
    audit: int,
) -> dict:
    g = _geometry(geom)
    mode_name = _I_MODES[mode]
    pipe = ICachePipeline(
        g,
        mode_name,
        MabConfig(n1, n2, bool(precise)) if mode_name == "full_mab" else None,
        refill_tag_writes=refill_tag_writes,
        refill_way_writes=refill_way_writes,
    )
    n = len(rtype)
    out = _alloc(n)
    violations: list = []
    total = 0
    rtype_l, addr_l, aux_l, tk_l = rtype.tolist(), addr.tolist(), aux.tolist(), tkind.tolist()
    do_audit = bool(audit) and pipe.mab is not None
    for step in range(n):
        if rtype_l[step] != 0:
            continue
        rep = pipe.fetch(IFetch(addr_l[step], _TRANSFERS[tk_l[step]], aux_l[step]))
        _fill(out, step, rep)
        out["flow"][step] = _FLOW_CODE[rep.flow]
        if (
            pipe.mab is not None
            and rep.flow in ("inter_seq", "inter_nonseq")
            and not rep.bypass
            and not rep.mab_hit
        ):
            out["mab_event"][step] = 2
        if do_audit:
            total = _audit_mab(pipe.mab, pipe.cache, step, violations, total)
    out["counters"] = pipe.counters.as_dict()
    out["violations"] = violations
    out["violations_total"] = total
    return out


def predict_batch(base, disp, geom: tuple) -> dict:
    """Vectorized narrow-adder prediction over arrays of (base, disp)."""
    address_bits, offset_bits, index_bits, _, _ = geom
    k = offset_bits + index_bits
    tag_bits = address_bits - k
    base = np.asarray(base, dtype=np.int64)
    disp = np.asarray(disp, dtype=np.int64)
    base, disp = np.broadcast_arrays(base, disp)
    low_mask = np.int64((1 << k) - 1)
    tag_mask = np.int64((1 << tag_bits) - 1)
    low_sum = (base & low_mask) + (disp & low_mask)
    carry = (low_sum >> k) & 1
    low = low_sum & low_mask
    neg = (disp < 0).astype(np.int64)
    base_tag = (base >> k) & tag_mask
    return {
        "in_range": ((disp >= -(1 << k)) & (disp < (1 << k))).astype(np.uint8),
        "base_tag": base_tag,
        "carry": carry.astype(np.uint8),
        "neg": neg.astype(np.uint8),
        "pred_index": low >> offset_bits,
        "pred_offset": low & np.int64((1 << offset_bits) - 1),
        "effective_tag": (base_tag + carry - neg) & tag_mask,
    }
