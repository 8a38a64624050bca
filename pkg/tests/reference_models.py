"""Brute-force oracles kept deliberately independent of the package code."""

from __future__ import annotations


class LinearScanCache:
    """Move-to-back list formulation of a set-associative LRU cache.

    Each set is a list of [tag, way] entries ordered least- to
    most-recently used, seeded with invalid entries on ways 0..w-1 so the
    fill order matches a deterministic reset.
    """

    def __init__(self, sets: int, ways: int, offset_bits: int, index_bits: int):
        self.ways = ways
        self.offset_bits = offset_bits
        self.index_bits = index_bits
        self.entries = [[[None, w] for w in range(ways)] for _ in range(sets)]

    def split(self, addr: int):
        index = (addr >> self.offset_bits) % (1 << self.index_bits)
        tag = addr >> (self.offset_bits + self.index_bits)
        return tag, index

    def access(self, addr: int, store: bool = False, allocate_on_store: bool = True):
        """Returns (hit, way, victim) with victim = (tag, index) or None."""
        tag, index = self.split(addr)
        line = self.entries[index]
        for pos, entry in enumerate(line):
            if entry[0] == tag:
                line.append(line.pop(pos))
                return True, entry[1], None
        if store and not allocate_on_store:
            return False, None, None
        entry = line.pop(0)
        victim = (entry[0], index) if entry[0] is not None else None
        entry[0] = tag
        line.append(entry)
        return False, entry[1], victim

    def probe(self, addr: int):
        tag, index = self.split(addr)
        for entry in self.entries[index]:
            if entry[0] == tag:
                return entry[1]
        return None
