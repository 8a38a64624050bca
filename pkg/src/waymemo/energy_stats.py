"""Access counters and the cache power/energy model.

Power is modeled as

    P = E_way * N_way + E_tag * N_tag + P_mab

with N_way/N_tag the per-second way and tag access rates.  The simulator
counts accesses and derives time as accesses * cycles_per_access / clock,
so the report carries both total energy and average power.  Refill writes
(tag + data written by a miss fill) are tracked separately from the read
counts and included in the energy terms.

``MAB_POWER_TABLE_W`` carries measured buffer power for the standard
configurations; per-way and per-tag access energies are circuit-specific
and must be supplied (the defaults are order-of-magnitude placeholders,
not measurements).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

# (n_tag_rows, n_index_cols) -> (active W, clock-gated idle W)
MAB_POWER_TABLE_W: Dict[Tuple[int, int], Tuple[float, float]] = {
    (1, 4): (1.95e-3, 0.24e-3),
    (1, 8): (2.37e-3, 0.40e-3),
    (1, 16): (3.39e-3, 0.76e-3),
    (1, 32): (6.25e-3, 1.37e-3),
    (2, 4): (2.34e-3, 0.40e-3),
    (2, 8): (3.07e-3, 0.68e-3),
    (2, 16): (4.56e-3, 1.28e-3),
    (2, 32): (7.93e-3, 2.26e-3),
}

MAB_ACTIVE = "active"
MAB_SLEEP = "sleep"
MAB_OFF = "off"


def mab_power_lookup(n1: int, n2: int) -> Optional[Tuple[float, float]]:
    """(active, sleep) watts for a buffer shape, or None if not tabulated."""
    return MAB_POWER_TABLE_W.get((n1, n2))


def power_state_for_mode(mode: str) -> str:
    """Which buffer power applies to a simulation mode.

    Memoizing modes burn active power; intra-line-only keeps the buffer
    present but clock-gated; the plain baseline has no buffer at all.
    """
    if mode in ("mab", "full_mab"):
        return MAB_ACTIVE
    if mode == "intra_only":
        return MAB_SLEEP
    return MAB_OFF


@dataclass
class Counters:
    """Per-run access counts for one cache/mode lane.

    Merging two Counters (``+``) is field-wise addition, so sharded runs
    can be reduced in any order.
    """

    accesses: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    tag_reads: int = 0
    way_accesses: int = 0
    refill_tag_writes: int = 0
    refill_way_writes: int = 0
    mab_hits: int = 0
    mab_misses: int = 0
    bypasses: int = 0
    loads: int = 0
    stores: int = 0
    store_way_accesses: int = 0
    flow_first: int = 0
    flow_intra_seq: int = 0
    flow_intra_nonseq: int = 0
    flow_inter_seq: int = 0
    flow_inter_nonseq: int = 0

    def __add__(self, other: "Counters") -> "Counters":
        return Counters(
            **{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)}
        )

    def as_dict(self) -> Dict[str, int]:
        return {f.name: int(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class EnergyParams:
    """Energy/power inputs for the Eq-style model.

    e_way/e_tag defaults are placeholders; plug in values extracted for
    your circuit.  The buffer power defaults are the tabulated 2x8 shape.
    """

    e_way: float = 2.0e-10
    e_tag: float = 1.0e-10
    p_mab_active: float = 3.07e-3
    p_mab_sleep: float = 0.68e-3
    clock_hz: float = 360e6
    cycles_per_access: int = 1

    def __post_init__(self) -> None:
        for name in ("e_way", "e_tag", "p_mab_active", "p_mab_sleep"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.clock_hz <= 0 or self.cycles_per_access <= 0:
            raise ValueError("clock_hz and cycles_per_access must be positive")

    def with_mab_power(self, n1: int, n2: int) -> "EnergyParams":
        """Copy with buffer power from the table; unchanged if untabulated."""
        looked_up = mab_power_lookup(n1, n2)
        if looked_up is None:
            return self
        return EnergyParams(
            e_way=self.e_way,
            e_tag=self.e_tag,
            p_mab_active=looked_up[0],
            p_mab_sleep=looked_up[1],
            clock_hz=self.clock_hz,
            cycles_per_access=self.cycles_per_access,
        )


@dataclass(frozen=True)
class PowerReport:
    simulated_time: float
    way_energy: float
    tag_energy: float
    mab_energy: float
    total_energy: float
    average_power: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "simulated_time": self.simulated_time,
            "way_energy": self.way_energy,
            "tag_energy": self.tag_energy,
            "mab_energy": self.mab_energy,
            "total_energy": self.total_energy,
            "average_power": self.average_power,
        }


def evaluate(c: Counters, p: EnergyParams, mab_power_state: str = MAB_ACTIVE) -> PowerReport:
    """Evaluate the power model over a completed run's counters.

    An empty run yields a well-defined all-zero report.  The breakdown
    terms sum exactly to the total by construction.
    """
    if mab_power_state == MAB_ACTIVE:
        p_mab = p.p_mab_active
    elif mab_power_state == MAB_SLEEP:
        p_mab = p.p_mab_sleep
    elif mab_power_state == MAB_OFF:
        p_mab = 0.0
    else:
        raise ValueError(f"unknown MAB power state {mab_power_state!r}")

    t = c.accesses * p.cycles_per_access / p.clock_hz
    way_energy = p.e_way * (c.way_accesses + c.refill_way_writes)
    tag_energy = p.e_tag * (c.tag_reads + c.refill_tag_writes)
    mab_energy = p_mab * t
    total = way_energy + tag_energy + mab_energy
    return PowerReport(
        simulated_time=t,
        way_energy=way_energy,
        tag_energy=tag_energy,
        mab_energy=mab_energy,
        total_energy=total,
        average_power=total / t if t > 0 else 0.0,
    )
