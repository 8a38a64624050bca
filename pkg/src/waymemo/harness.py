"""Differential and audit runner.

Runs one trace through several lanes (cache side x mode x buffer config)
and checks, record by record:

* transparency -- every lane of a side sees the identical cache hit/miss,
  way, and victim sequence; memoization may only change access counts;
* consistency -- each memoized (tag, index, way) triple matches a probe of
  the lane's own cache (``stale_mab`` when not).  With precise
  invalidation this must never fire; with the literal update-rules-only
  policy violations are findings, reported but not asserted;
* count dominance -- cumulative tag reads of memoizing lanes never exceed
  the baseline's, intra-only never exceeds baseline, full memoization
  never exceeds intra-only; load way accesses are dominated likewise and
  store way accesses match the baseline exactly.

``sweep`` reruns one memoizing lane across a grid of buffer shapes and
attaches the power-model evaluation per cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .energy_stats import (
    Counters,
    EnergyParams,
    MAB_ACTIVE,
    PowerReport,
    evaluate,
)
from .engine import LaneResult, LaneSpec, RecordArrays, records_to_arrays, run_lanes
from .geometry import CacheGeometry
from .mab import MabConfig

STALE_MAB = "stale_mab"
TRANSPARENCY = "transparency"
COUNT_DOMINANCE = "count_dominance"


@dataclass(frozen=True)
class Violation:
    step: int
    kind: str
    lane: str
    detail: str
    asserted: bool  # True when this violation class must be empty

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "lane": self.lane,
            "detail": self.detail,
            "asserted": self.asserted,
        }


@dataclass
class AuditReport:
    steps: int
    lanes: List[str]
    counters: Dict[str, Counters]
    violations: List[Violation] = field(default_factory=list)
    violations_total: int = 0

    @property
    def asserted_violations(self) -> List[Violation]:
        return [v for v in self.violations if v.asserted]

    @property
    def ok(self) -> bool:
        return not self.asserted_violations

    @property
    def findings(self) -> List[Violation]:
        return [v for v in self.violations if not v.asserted]


def default_lanes(
    d_mab: MabConfig = MabConfig(2, 8),
    i_mab: MabConfig = MabConfig(2, 16),
    include_literal_policy: bool = False,
) -> List[LaneSpec]:
    """The standard lane set: baselines plus memoizing modes per side.

    The first lane of each side acts as the transparency reference.
    ``include_literal_policy`` adds update-rules-only twins of the memoizing
    lanes whose staleness is audited as findings.
    """
    lanes = [
        LaneSpec("d", "baseline"),
        LaneSpec("d", "mab", d_mab),
        LaneSpec("i", "baseline"),
        LaneSpec("i", "intra_only"),
        LaneSpec("i", "full_mab", i_mab),
    ]
    if include_literal_policy:
        lanes.append(LaneSpec("d", "mab", replace(d_mab, precise_invalidation=False)))
        lanes.append(LaneSpec("i", "full_mab", replace(i_mab, precise_invalidation=False)))
    return lanes


def differential_run(
    records,
    geometry: CacheGeometry,
    lanes: Optional[Sequence[LaneSpec]] = None,
    *,
    audit: bool = True,
    allocate_on_store: bool = True,
    refill_tag_writes: int = 1,
    refill_way_writes: int = 1,
    backend: Optional[str] = None,
    max_recorded: int = 1000,
    tamper: Optional[Callable[[Dict[str, LaneResult]], None]] = None,
) -> AuditReport:
    """Run all lanes over one trace and cross-check the invariants.

    ``tamper`` is a fault-injection hook: it may mutate the lane results
    before the cross-checks run, to prove the checker catches breakage.
    """
    if lanes is None:
        lanes = default_lanes()
    ra = records if isinstance(records, RecordArrays) else records_to_arrays(records)
    results = run_lanes(
        ra,
        geometry,
        lanes,
        allocate_on_store=allocate_on_store,
        refill_tag_writes=refill_tag_writes,
        refill_way_writes=refill_way_writes,
        audit=audit,
        backend=backend,
    )
    if tamper is not None:
        tamper(results)

    violations: List[Violation] = []
    total = 0

    def record(v: Violation) -> None:
        nonlocal total
        total += 1
        if len(violations) < max_recorded:
            violations.append(v)

    # consistency: stale pairs found by the per-step audit inside each lane
    for name, res in results.items():
        if not res.spec.uses_mab:
            continue
        asserted = res.spec.mab.precise_invalidation
        for step, etag, idx, memo, probe in res.violations:
            where = "not resident" if probe < 0 else f"resident in way {probe}"
            record(
                Violation(
                    step,
                    STALE_MAB,
                    name,
                    f"pair (tag={etag:#x}, index={idx:#x}) memoized way {memo} but {where}",
                    asserted,
                )
            )
        total += res.violations_total - len(res.violations)
        # a consumed stale hit: the buffer said hit but the access missed
        stale_hits = np.flatnonzero(
            (res.arrays["mab_event"] == 1) & (res.arrays["cache_hit"] == 0)
            & (res.arrays["applies"] == 1)
        )
        for step in stale_hits:
            record(
                Violation(
                    int(step),
                    STALE_MAB,
                    name,
                    "buffer hit served a non-resident line",
                    asserted,
                )
            )

    # transparency: identical cache behavior across all lanes of a side
    for side in ("d", "i"):
        side_lanes = [r for r in results.values() if r.spec.side == side]
        if len(side_lanes) < 2:
            continue
        ref = side_lanes[0]
        for other in side_lanes[1:]:
            for key in ("cache_hit", "way", "victim_tag", "victim_index"):
                bad = np.flatnonzero(ref.arrays[key] != other.arrays[key])
                for step in bad[:8]:
                    record(
                        Violation(
                            int(step),
                            TRANSPARENCY,
                            other.spec.name,
                            f"{key} diverges from {ref.spec.name}",
                            True,
                        )
                    )
                total += max(0, len(bad) - 8)

    # count dominance and the one-way-per-access floor
    def first_bad(mask_bad: np.ndarray) -> Optional[int]:
        idx = np.flatnonzero(mask_bad)
        return int(idx[0]) if idx.size else None

    for name, res in results.items():
        applies = res.arrays["applies"] == 1
        step = first_bad(applies & (res.arrays["way_accesses"] < 1))
        if step is not None:
            record(Violation(step, COUNT_DOMINANCE, name, "way_accesses below 1", True))

    def cum(res: LaneResult, key: str, mask=None) -> np.ndarray:
        a = res.arrays[key].astype(np.int64)
        if mask is not None:
            a = np.where(mask, a, 0)
        return np.cumsum(a)

    def check_tags_dominated(better: LaneResult, worse: LaneResult) -> None:
        step = first_bad(cum(better, "tag_reads") > cum(worse, "tag_reads"))
        if step is not None:
            record(
                Violation(
                    step,
                    COUNT_DOMINANCE,
                    better.spec.name,
                    f"cumulative tag reads exceed {worse.spec.name}",
                    True,
                )
            )

    for side in ("d", "i"):
        side_lanes = [r for r in results.values() if r.spec.side == side]
        base = next((r for r in side_lanes if r.spec.mode == "baseline"), None)
        intra = next((r for r in side_lanes if r.spec.mode == "intra_only"), None)
        for res in side_lanes:
            if base is not None and res is not base:
                check_tags_dominated(res, base)
            if intra is not None and res.spec.mode == "full_mab":
                check_tags_dominated(res, intra)

    d_lanes = [r for r in results.values() if r.spec.side == "d"]
    d_base = next((r for r in d_lanes if r.spec.mode == "baseline"), None)
    if d_base is not None:
        loads = ra.rtype == 1
        stores = ra.rtype == 2
        for res in d_lanes:
            if res is d_base:
                continue
            step = first_bad(cum(res, "way_accesses", loads) > cum(d_base, "way_accesses", loads))
            if step is not None:
                record(
                    Violation(step, COUNT_DOMINANCE, res.spec.name,
                              "cumulative load way accesses exceed baseline", True)
                )
            step = first_bad(cum(res, "way_accesses", stores) != cum(d_base, "way_accesses", stores))
            if step is not None:
                record(
                    Violation(step, COUNT_DOMINANCE, res.spec.name,
                              "store way accesses differ from baseline", True)
                )

    return AuditReport(
        steps=ra.n,
        lanes=[r.spec.name for r in results.values()],
        counters={name: res.counters for name, res in results.items()},
        violations=violations,
        violations_total=total,
    )


@dataclass
class SweepCell:
    n1: int
    n2: int
    counters: Counters
    power: PowerReport


def sweep(
    records,
    geometry: CacheGeometry,
    n1_list: Sequence[int],
    n2_list: Sequence[int],
    *,
    side: str = "d",
    precise: bool = True,
    energy: Optional[EnergyParams] = None,
    audit: bool = False,
    allocate_on_store: bool = True,
    refill_tag_writes: int = 1,
    refill_way_writes: int = 1,
    backend: Optional[str] = None,
) -> List[SweepCell]:
    """One memoizing-lane run per buffer shape, row-major over n1 then n2.

    Buffer power per cell comes from the built-in table when the shape is
    tabulated; untabulated shapes keep the supplied parameters.  Cells are
    independent, so the loop could be parallelized; trace sizes here make
    that unnecessary.
    """
    if not n1_list or not n2_list:
        raise ValueError("n1_list and n2_list must be non-empty")
    if energy is None:
        energy = EnergyParams()
    ra = records if isinstance(records, RecordArrays) else records_to_arrays(records)
    mode = "mab" if side == "d" else "full_mab"
    cells: List[SweepCell] = []
    for n1 in n1_list:
        for n2 in n2_list:
            spec = LaneSpec(side, mode, MabConfig(n1, n2, precise))
            res = run_lanes(
                ra,
                geometry,
                [spec],
                allocate_on_store=allocate_on_store,
                refill_tag_writes=refill_tag_writes,
                refill_way_writes=refill_way_writes,
                audit=audit,
                backend=backend,
            )[spec.name]
            params = energy.with_mab_power(n1, n2)
            cells.append(
                SweepCell(n1, n2, res.counters, evaluate(res.counters, params, MAB_ACTIVE))
            )
    return cells
