"""Behavioral set-associative cache with true-LRU replacement.

Only tags and recency are modeled, never data values: the simulator cares
about which way an address resolves to and what gets evicted, not about
memory contents.  Each set keeps its ways in a recency list whose front is
the least recently used way; after reset the list is ``[0, 1, ...]`` so way
0 is filled first and runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from .geometry import CacheGeometry, decompose


class LineMeta(NamedTuple):
    valid: bool
    tag: int
    lru_rank: int  # 0 = least recently used within the set


@dataclass
class AccessOutcome:
    hit: bool
    # Way that served or received the line.  None only for a store miss when
    # store allocation is disabled (nothing was filled).
    way: Optional[int]
    # (tag, index) of the line evicted by a miss fill, if one was valid.
    victim: Optional[Tuple[int, int]] = None


class SetAssocCache:
    """Set-associative cache tracking tag/valid/LRU state per way.

    Write misses allocate by default; pass ``allocate_on_store=False`` for a
    no-write-allocate policy (store misses then touch nothing).
    """

    def __init__(self, geometry: CacheGeometry, allocate_on_store: bool = True):
        self.geometry = geometry
        self.allocate_on_store = allocate_on_store
        self.reset()

    def reset(self) -> None:
        g = self.geometry
        self._valid = [[False] * g.ways for _ in range(g.sets)]
        self._tags = [[0] * g.ways for _ in range(g.sets)]
        # front = least recently used
        self._order = [list(range(g.ways)) for _ in range(g.sets)]

    def access(self, addr: int, store: bool = False) -> AccessOutcome:
        """Look up ``addr``, filling the LRU way on a miss.

        The accessed way becomes most recently used.  The outcome reports
        the victim line displaced by a miss fill so callers can keep
        derived structures consistent.
        """
        tag, index, _ = decompose(addr, self.geometry)
        valid, tags, order = self._valid[index], self._tags[index], self._order[index]

        for way in range(self.geometry.ways):
            if valid[way] and tags[way] == tag:
                order.remove(way)
                order.append(way)
                return AccessOutcome(hit=True, way=way)

        if store and not self.allocate_on_store:
            return AccessOutcome(hit=False, way=None)

        way = order[0]
        victim = (tags[way], index) if valid[way] else None
        valid[way] = True
        tags[way] = tag
        order.remove(way)
        order.append(way)
        return AccessOutcome(hit=False, way=way, victim=victim)

    def probe(self, addr: int) -> Optional[int]:
        """Non-mutating lookup: the way holding ``addr``'s line, or None."""
        tag, index, _ = decompose(addr, self.geometry)
        return self.probe_line(tag, index)

    def probe_line(self, tag: int, index: int) -> Optional[int]:
        valid, tags = self._valid[index], self._tags[index]
        for way in range(self.geometry.ways):
            if valid[way] and tags[way] == tag:
                return way
        return None

    def set_state(self, index: int) -> list[LineMeta]:
        """Snapshot of one set: (valid, tag, lru_rank) per way."""
        order = self._order[index]
        return [
            LineMeta(self._valid[index][w], self._tags[index][w], order.index(w))
            for w in range(self.geometry.ways)
        ]

    def valid_count(self, index: int) -> int:
        return sum(self._valid[index])
