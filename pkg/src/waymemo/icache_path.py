"""Instruction-fetch path: flow classification plus way memoization.

Consecutive fetches fall into four flow classes: intra/inter cache line
crossed with sequential/non-sequential control.  A fetch is sequential
only when the previous record fell through (``seq`` marker) -- generators
fold taken branches that target the next address into ``seq``, so the
marker is authoritative.

Intra-line flows (both kinds) are served by a same-line shortcut: the line
that held the previous instruction is still resident, so its way is reused
with no tag check.  Inter-line flows go through the memoization buffer in
``full_mab`` mode, with the (base, displacement) pair chosen by flow:

    inter-line sequential:    base = previous pc, disp = fetch stride
    taken branch:             base = previous pc, disp = branch offset
    jump via link register:   base = link target, disp = 0

``intra_only`` mode applies just the same-line shortcut (the classic
intra-line optimization); ``baseline`` reads all ways and tags on every
fetch.  Cache state evolves identically in all three modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .cache_model import AccessOutcome, SetAssocCache
from .energy_stats import Counters
from .geometry import CacheGeometry, same_line
from .mab import Mab, MabConfig, predict
from .trace_io import IFetch, TRANSFER_BRANCH, TRANSFER_SEQ, next_pc

I_MODES = ("baseline", "intra_only", "full_mab")

FIRST_FETCH = "first_fetch"
INTRA_SEQ = "intra_seq"
INTRA_NONSEQ = "intra_nonseq"
INTER_SEQ = "inter_seq"
INTER_NONSEQ = "inter_nonseq"
FLOW_CLASSES = (FIRST_FETCH, INTRA_SEQ, INTRA_NONSEQ, INTER_SEQ, INTER_NONSEQ)


class TraceOrderError(ValueError):
    """A fetch's pc contradicts the predecessor's transfer marker."""


@dataclass
class IAccessReport:
    flow: str
    mab_hit: bool
    bypass: bool
    cache_hit: bool
    tag_reads: int
    way_accesses: int
    refill_tag_writes: int = 0
    refill_way_writes: int = 0
    way: Optional[int] = None
    victim: Optional[Tuple[int, int]] = None


def classify(prev: Optional[IFetch], cur_pc: int, g: CacheGeometry) -> str:
    """Flow class of the fetch at ``cur_pc`` given the preceding fetch."""
    if prev is None:
        return FIRST_FETCH
    sequential = prev.transfer == TRANSFER_SEQ
    intra = same_line(prev.pc, cur_pc, g)
    if sequential:
        return INTRA_SEQ if intra else INTER_SEQ
    return INTRA_NONSEQ if intra else INTER_NONSEQ


class ICachePipeline:
    """One instruction cache; fetches must arrive in trace order."""

    def __init__(
        self,
        geometry: CacheGeometry,
        mode: str = "full_mab",
        mab_config: Optional[MabConfig] = None,
        *,
        refill_tag_writes: int = 1,
        refill_way_writes: int = 1,
    ):
        if mode not in I_MODES:
            raise ValueError(f"mode must be one of {I_MODES}, got {mode!r}")
        self.geometry = geometry
        self.mode = mode
        self.refill_tag_writes = refill_tag_writes
        self.refill_way_writes = refill_way_writes
        self.cache = SetAssocCache(geometry)
        self.mab = (
            Mab(mab_config or MabConfig(n_tag_rows=2, n_index_cols=16), geometry)
            if mode == "full_mab"
            else None
        )
        self.counters = Counters()
        self._prev: Optional[IFetch] = None

    def reset(self) -> None:
        self.cache.reset()
        if self.mab is not None:
            self.mab.reset()
        self.counters = Counters()
        self._prev = None

    def fetch(self, rec: IFetch) -> IAccessReport:
        g = self.geometry
        prev = self._prev
        if prev is not None:
            expected = next_pc(prev, g.instr_stride_bytes, g.address_mask)
            if rec.pc != expected:
                raise TraceOrderError(
                    f"fetch pc {rec.pc:#x} contradicts predecessor "
                    f"{prev.pc:#x} {prev.transfer} (expected {expected:#x})"
                )
        flow = classify(prev, rec.pc, g)
        full_tags = full_ways = g.ways

        mab_hit = bypass = False
        if self.mode == "baseline":
            out = self.cache.access(rec.pc)
            tag_reads, way_accesses = full_tags, full_ways
        elif flow in (INTRA_SEQ, INTRA_NONSEQ):
            # Same line as the previous fetch: nothing between two fetches
            # can evict it, so the way is known without any tag check.
            out = self.cache.access(rec.pc)
            if not out.hit:
                raise AssertionError("intra-line fetch missed; simulator bug")
            tag_reads, way_accesses = 0, 1
        elif self.mode == "intra_only" or flow == FIRST_FETCH:
            # First fetch has no predecessor to predict from; the buffer is
            # left untouched.
            out = self._access_snooped(rec.pc)
            tag_reads, way_accesses = full_tags, full_ways
        else:
            # full_mab, inter-line flow
            if flow == INTER_SEQ:
                base, disp = prev.pc, g.instr_stride_bytes
            elif prev.transfer == TRANSFER_BRANCH:
                base, disp = prev.pc, prev.arg
            else:  # link jump: the full target is available directly
                base, disp = prev.arg, 0
            p = predict(base, disp, g)
            if not p.in_range:
                out = self._access_snooped(rec.pc)
                tag_reads, way_accesses = full_tags, full_ways
                self.mab.bypass_invalidate()
                bypass = True
            else:
                look = self.mab.lookup(p)
                out = self._access_snooped(rec.pc)
                if look.hit:
                    tag_reads, way_accesses = 0, 1
                    mab_hit = True
                else:
                    tag_reads, way_accesses = full_tags, full_ways
                self.mab.update(p, look, out.way)

        refill_t = refill_w = 0
        if not out.hit and not mab_hit:
            refill_t, refill_w = self.refill_tag_writes, self.refill_way_writes

        self._count(flow, out, mab_hit, bypass, tag_reads, way_accesses, refill_t, refill_w)
        self._prev = rec
        return IAccessReport(
            flow=flow,
            mab_hit=mab_hit,
            bypass=bypass,
            cache_hit=out.hit,
            tag_reads=tag_reads,
            way_accesses=way_accesses,
            refill_tag_writes=refill_t,
            refill_way_writes=refill_w,
            way=out.way,
            victim=out.victim,
        )

    def _access_snooped(self, pc: int) -> AccessOutcome:
        out = self.cache.access(pc)
        if (
            self.mab is not None
            and out.victim is not None
            and self.mab.config.precise_invalidation
        ):
            self.mab.snoop_evict(*out.victim)
        return out

    def _count(self, flow, out, mab_hit, bypass, tags, ways, refill_t, refill_w) -> None:
        c = self.counters
        c.accesses += 1
        if out.hit:
            c.cache_hits += 1
        else:
            c.cache_misses += 1
        c.tag_reads += tags
        c.way_accesses += ways
        c.refill_tag_writes += refill_t
        c.refill_way_writes += refill_w
        if flow == FIRST_FETCH:
            c.flow_first += 1
        elif flow == INTRA_SEQ:
            c.flow_intra_seq += 1
        elif flow == INTRA_NONSEQ:
            c.flow_intra_nonseq += 1
        elif flow == INTER_SEQ:
            c.flow_inter_seq += 1
        else:
            c.flow_inter_nonseq += 1
        if self.mode == "full_mab" and flow in (INTER_SEQ, INTER_NONSEQ):
            if bypass:
                c.bypasses += 1
            elif mab_hit:
                c.mab_hits += 1
            else:
                c.mab_misses += 1
