import random

import pytest

from waymemo.dcache_path import DCachePipeline, LOAD, STORE
from waymemo.geometry import CacheGeometry
from waymemo.mab import MabConfig

G = CacheGeometry()


def test_cold_load_is_full_access():
    pipe = DCachePipeline(G)
    rep = pipe.access(LOAD, 0x3FFC, 8)
    assert not rep.mab_hit and not rep.bypass and not rep.cache_hit
    assert rep.tag_reads == 2 and rep.way_accesses == 2
    assert rep.refill_tag_writes == 1 and rep.refill_way_writes == 1


def test_repeat_load_hits_buffer():
    pipe = DCachePipeline(G)
    pipe.access(LOAD, 0x3FFC, 8)
    rep = pipe.access(LOAD, 0x3FFC, 8)
    assert rep.mab_hit and rep.cache_hit
    assert rep.tag_reads == 0 and rep.way_accesses == 1
    assert rep.refill_tag_writes == 0


def test_wide_displacement_bypasses():
    pipe = DCachePipeline(G)
    pipe.access(LOAD, 0x3FFC, 8)   # row 0
    pipe.access(LOAD, 0x8000, -4)  # row 1, most recent
    lru = pipe.mab.row_lru[0]
    assert lru == 0 and any(pipe.mab.vflag[0])
    rep = pipe.access(STORE, 0x8000, 1 << 14)
    assert rep.bypass and not rep.mab_hit
    assert rep.tag_reads == 2 and rep.way_accesses == 1
    # only the LRU row lost its flags
    assert not any(pipe.mab.vflag[0])
    assert any(pipe.mab.vflag[1])


def test_store_touches_single_way_in_every_mode():
    for mode in ("baseline", "mab"):
        pipe = DCachePipeline(G, mode)
        for disp in (0, 8, 8, 1 << 14):
            rep = pipe.access(STORE, 0x9000, disp)
            assert rep.way_accesses == 1
    # a memoized store still reads zero tags
    pipe = DCachePipeline(G)
    pipe.access(STORE, 0x9000, 0)
    rep = pipe.access(STORE, 0x9000, 0)
    assert rep.mab_hit and rep.tag_reads == 0 and rep.way_accesses == 1


def test_refill_accounting_is_configurable():
    pipe = DCachePipeline(G, refill_tag_writes=0, refill_way_writes=0)
    rep = pipe.access(LOAD, 0x100, 0)
    assert not rep.cache_hit
    assert rep.refill_tag_writes == 0 and rep.refill_way_writes == 0
    assert pipe.counters.refill_tag_writes == 0


def test_store_miss_without_allocation_skips_buffer():
    pipe = DCachePipeline(G, allocate_on_store=False)
    rep = pipe.access(STORE, 0x2000, 4)
    assert not rep.cache_hit and rep.way is None and rep.victim is None
    assert rep.refill_way_writes == 0
    assert pipe.mab.valid_pairs() == set()
    # the identical store still misses the buffer afterwards
    rep = pipe.access(STORE, 0x2000, 4)
    assert not rep.mab_hit


def _random_accesses(n, seed):
    rng = random.Random(seed)
    bases = [0x10000 + rng.randrange(1 << 12) for _ in range(6)]
    out = []
    for _ in range(n):
        kind = STORE if rng.random() < 0.3 else LOAD
        disp = rng.randrange(-(1 << 12), 1 << 12)
        if rng.random() < 0.03:
            disp = rng.choice([-1, 1]) * ((1 << 14) + rng.randrange(1 << 12))
        out.append((kind, rng.choice(bases), disp))
    return out


@pytest.mark.parametrize("seed", [1, 2])
def test_transparency_against_baseline(seed):
    baseline = DCachePipeline(G, "baseline")
    mab = DCachePipeline(G, "mab")
    for kind, base, disp in _random_accesses(4000, seed):
        a = baseline.access(kind, base, disp)
        b = mab.access(kind, base, disp)
        assert (a.cache_hit, a.way, a.victim) == (b.cache_hit, b.way, b.victim)
    assert baseline.counters.cache_misses == mab.counters.cache_misses


def test_count_dominance_and_report_invariants():
    baseline = DCachePipeline(G, "baseline")
    mab = DCachePipeline(G, "mab", MabConfig(2, 8, True))
    for kind, base, disp in _random_accesses(4000, 3):
        a = baseline.access(kind, base, disp)
        b = mab.access(kind, base, disp)
        assert b.way_accesses >= 1
        if b.mab_hit:
            assert b.tag_reads == 0
        if b.bypass:
            assert not b.mab_hit
    cb, cm = baseline.counters, mab.counters
    assert cm.tag_reads <= cb.tag_reads
    assert cm.way_accesses - cm.store_way_accesses <= cb.way_accesses - cb.store_way_accesses
    assert cm.store_way_accesses == cb.store_way_accesses
    assert cm.mab_hits + cm.mab_misses + cm.bypasses == cm.accesses
    assert cm.cache_hits + cm.cache_misses == cm.accesses


def test_mode_validation():
    with pytest.raises(ValueError):
        DCachePipeline(G, "turbo")
    pipe = DCachePipeline(G)
    with pytest.raises(ValueError):
        pipe.access("fetch", 0, 0)
