"""The compiled and pure engines must produce identical output."""

import numpy as np
import pytest

from waymemo import engine
from waymemo.engine import LaneSpec, predict_batch, records_to_arrays, run_lane
from waymemo.geometry import CacheGeometry
from waymemo.mab import MabConfig, predict
from waymemo.trace_io import Load, gen_loop, gen_random

from conftest import needs_compiled

G32 = CacheGeometry()
G16 = CacheGeometry.from_bits(address_bits=16, offset_bits=3, index_bits=4, ways=2)

ALL_LANES = [
    LaneSpec("d", "baseline"),
    LaneSpec("d", "mab", MabConfig(2, 8, True)),
    LaneSpec("d", "mab", MabConfig(2, 8, False)),
    LaneSpec("d", "mab", MabConfig(1, 4, True)),
    LaneSpec("i", "baseline"),
    LaneSpec("i", "intra_only"),
    LaneSpec("i", "full_mab", MabConfig(2, 16, True)),
    LaneSpec("i", "full_mab", MabConfig(2, 4, False), label="i:small_literal"),
]


def assert_lane_results_equal(a, b, context=""):
    assert a.counters == b.counters, context
    for key in a.arrays:
        assert np.array_equal(a.arrays[key], b.arrays[key]), f"{context}: {key}"
    assert a.violations == b.violations, context
    assert a.violations_total == b.violations_total, context


@needs_compiled
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_lanes_agree_on_random_traces(seed):
    records = gen_random(6000, seed=seed, far_disp_frac=0.05)
    ra = records_to_arrays(records)
    for spec in ALL_LANES:
        py = run_lane(ra, G32, spec, backend="python")
        cy = run_lane(ra, G32, spec, backend="compiled")
        assert_lane_results_equal(py, cy, f"seed={seed} lane={spec.name}")


@needs_compiled
def test_lanes_agree_under_eviction_pressure():
    # tiny 16-bit geometry: constant evictions and snoops
    records = gen_random(
        5000, seed=7, pc_start=0x100, pc_range=1 << 10,
        data_start=0x4000, data_range=1 << 10,
        max_small_disp=64, far_disp_frac=0.1,
    )
    ra = records_to_arrays(records)
    for spec in ALL_LANES:
        if spec.uses_mab:
            mab = MabConfig(spec.mab.n_tag_rows, min(spec.mab.n_index_cols, 4),
                            spec.mab.precise_invalidation)
            spec = LaneSpec(spec.side, spec.mode, mab, spec.label)
        py = run_lane(ra, G16, spec, backend="python")
        cy = run_lane(ra, G16, spec, backend="compiled")
        assert_lane_results_equal(py, cy, spec.name)


@needs_compiled
def test_violation_lists_identical_on_stale_scenario():
    # deterministic staleness for the update-rules-only policy
    y, z = 5, 9
    addr = lambda tag, idx: (tag << 14) | (idx << 5)
    records = [
        Load(addr(1, y), 0), Load(addr(2, y), 0), Load(addr(1, z), 0),
        Load(addr(3, y), 0), Load(addr(1, y), 0),
    ]
    ra = records_to_arrays(records)
    spec = LaneSpec("d", "mab", MabConfig(2, 8, False))
    py = run_lane(ra, G32, spec, backend="python")
    cy = run_lane(ra, G32, spec, backend="compiled")
    assert py.violations, "scenario must produce at least one stale pair"
    assert_lane_results_equal(py, cy, "stale scenario")


@needs_compiled
def test_lanes_agree_on_loop_and_no_allocate():
    records = gen_loop(200, 12, loads_per_iter=6, distinct_bases=3, disp_stride=8)
    ra = records_to_arrays(records)
    for spec in ALL_LANES:
        py = run_lane(ra, G32, spec, backend="python", allocate_on_store=False,
                      refill_tag_writes=0, refill_way_writes=0)
        cy = run_lane(ra, G32, spec, backend="compiled", allocate_on_store=False,
                      refill_tag_writes=0, refill_way_writes=0)
        assert_lane_results_equal(py, cy, spec.name)


@needs_compiled
def test_predict_batch_backends_agree():
    rng = np.random.default_rng(3)
    bases = rng.integers(0, 1 << 32, size=20000)
    disps = rng.integers(-(1 << 15), 1 << 15, size=20000)
    py = predict_batch(bases, disps, G32, backend="python")
    cy = predict_batch(bases, disps, G32, backend="compiled")
    for key in py:
        assert np.array_equal(py[key], cy[key]), key


def test_predict_batch_matches_scalar_predict():
    rng = np.random.default_rng(4)
    bases = rng.integers(0, 1 << 32, size=3000)
    disps = rng.integers(-(1 << 15), 1 << 15, size=3000)
    batch = predict_batch(bases, disps, G32)
    for i in range(0, 3000, 37):
        p = predict(int(bases[i]), int(disps[i]), G32)
        assert batch["in_range"][i] == int(p.in_range)
        assert batch["base_tag"][i] == p.base_tag
        assert batch["carry"][i] == p.cflag.carry
        assert batch["neg"][i] == p.cflag.neg
        assert batch["pred_index"][i] == p.pred_index
        assert batch["pred_offset"][i] == p.pred_offset
        assert batch["effective_tag"][i] == p.effective_tag


def test_predict_batch_against_full_sum_oracle():
    rng = np.random.default_rng(5)
    bases = rng.integers(0, 1 << 32, size=50000)
    disps = rng.integers(-(1 << 14), 1 << 14, size=50000)
    out = predict_batch(bases, disps, G32)
    full = (bases + disps) & ((1 << 32) - 1)
    assert np.array_equal(out["effective_tag"], full >> 14)
    assert np.array_equal(out["pred_index"], (full >> 5) & 0x1FF)
    assert np.array_equal(out["pred_offset"], full & 0x1F)
    assert out["in_range"].all()


def test_backend_selection_api():
    assert engine.active_backend() in engine.available_backends()
    with pytest.raises(ValueError):
        engine._module("fortran")
