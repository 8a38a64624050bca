"""Data-cache access path: way memoization wrapped around the cache model.

Counting contract per access (w = ways):

    baseline load:            w tag reads, w way accesses
    baseline store:           w tag reads, 1 way access (write buffer lets
                              stores touch a single data way)
    memoized hit:             0 tag reads, 1 way access
    memoized miss or bypass:  baseline counts, then the buffer update or
                              the bypass invalidation

A miss fill additionally costs ``refill_tag_writes`` + ``refill_way_writes``
(reported separately from the read counts; set both to 0 for read-only
accounting).  The cache itself is updated identically in every mode, so
hit/miss/victim behavior is the same with and without the buffer; only the
counts change.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .cache_model import AccessOutcome, SetAssocCache
from .energy_stats import Counters
from .geometry import CacheGeometry
from .mab import Mab, MabConfig, predict

LOAD = "load"
STORE = "store"

D_MODES = ("baseline", "mab")


@dataclass
class DAccessReport:
    kind: str
    mab_hit: bool
    bypass: bool
    cache_hit: bool
    tag_reads: int
    way_accesses: int
    refill_tag_writes: int = 0
    refill_way_writes: int = 0
    way: Optional[int] = None
    victim: Optional[Tuple[int, int]] = None


class DCachePipeline:
    """One data cache plus (in ``mab`` mode) its memoization buffer."""

    def __init__(
        self,
        geometry: CacheGeometry,
        mode: str = "mab",
        mab_config: Optional[MabConfig] = None,
        *,
        allocate_on_store: bool = True,
        refill_tag_writes: int = 1,
        refill_way_writes: int = 1,
    ):
        if mode not in D_MODES:
            raise ValueError(f"mode must be one of {D_MODES}, got {mode!r}")
        self.geometry = geometry
        self.mode = mode
        self.refill_tag_writes = refill_tag_writes
        self.refill_way_writes = refill_way_writes
        self.cache = SetAssocCache(geometry, allocate_on_store)
        self.mab = Mab(mab_config or MabConfig(), geometry) if mode == "mab" else None
        self.counters = Counters()

    def reset(self) -> None:
        self.cache.reset()
        if self.mab is not None:
            self.mab.reset()
        self.counters = Counters()

    def access(self, kind: str, base: int, disp: int) -> DAccessReport:
        if kind not in (LOAD, STORE):
            raise ValueError(f"kind must be 'load' or 'store', got {kind!r}")
        g = self.geometry
        is_store = kind == STORE
        addr = (base + disp) & g.address_mask
        full_tags = g.ways
        full_ways = 1 if is_store else g.ways

        mab_hit = bypass = False
        if self.mode == "baseline":
            out = self.cache.access(addr, store=is_store)
            tag_reads, way_accesses = full_tags, full_ways
        else:
            p = predict(base, disp, g)
            if not p.in_range:
                out = self._access_snooped(addr, is_store)
                tag_reads, way_accesses = full_tags, full_ways
                self.mab.bypass_invalidate()
                bypass = True
            else:
                look = self.mab.lookup(p)
                out = self._access_snooped(addr, is_store)
                if look.hit:
                    # Memoized: read only the remembered way, no tag check.
                    tag_reads, way_accesses = 0, 1
                    mab_hit = True
                else:
                    tag_reads, way_accesses = full_tags, full_ways
                if out.way is not None:
                    # A store miss without allocation resolves to no way and
                    # cannot be memoized.
                    self.mab.update(p, look, out.way)

        refill_t = refill_w = 0
        if not out.hit and out.way is not None and not mab_hit:
            refill_t, refill_w = self.refill_tag_writes, self.refill_way_writes

        self._count(kind, out, mab_hit, bypass, tag_reads, way_accesses, refill_t, refill_w)
        return DAccessReport(
            kind=kind,
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

    def _access_snooped(self, addr: int, is_store: bool) -> AccessOutcome:
        out = self.cache.access(addr, store=is_store)
        if out.victim is not None and self.mab.config.precise_invalidation:
            self.mab.snoop_evict(*out.victim)
        return out

    def _count(self, kind, out, mab_hit, bypass, tags, ways, refill_t, refill_w) -> None:
        c = self.counters
        c.accesses += 1
        if kind == STORE:
            c.stores += 1
            c.store_way_accesses += ways
        else:
            c.loads += 1
        if out.hit:
            c.cache_hits += 1
        else:
            c.cache_misses += 1
        c.tag_reads += tags
        c.way_accesses += ways
        c.refill_tag_writes += refill_t
        c.refill_way_writes += refill_w
        if self.mode == "mab":
            if bypass:
                c.bypasses += 1
            elif mab_hit:
                c.mab_hits += 1
            else:
                c.mab_misses += 1
