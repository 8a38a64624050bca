"""Memory address buffer (MAB): cross-product way memoization.

The buffer remembers recently seen addresses as the cross product of a few
tag rows and a few set-index columns instead of whole addresses, so n1 + n2
narrow entries cover n1 x n2 addresses.  A row stores a *base* tag plus two
carry/sign flags (the ``cflag``); a column stores a set index.  A validity
matrix ``vflag[i][j]`` marks which (row, column) pairs correspond to an
address whose cache way has been memoized, and ``memo_way[i][j]`` holds
that way.

The point of the cflag is timing: a load/store address is base + disp, and
for small displacements the tag of the sum is the base's tag plus the
carry out of a narrow adder spanning only the offset+index bits, minus one
if the displacement is negative.  Matching (base tag, carry, sign) against
a row therefore needs only the narrow adder, not full address generation.
Displacements too wide for the narrow adder (|disp| outside the
offset+index-bit window) bypass the buffer entirely.

Rows and columns are replaced least-recently-used, independently.  An
update after each cache access falls into four cases:

1. row hit, column hit:   set vflag[i][j], memoize the resolved way;
2. row miss, column hit:  install the key in the LRU row i, clear the rest
                          of row i, set vflag[i][j];
3. row hit, column miss:  install the index in the LRU column j, clear the
                          rest of column j, set vflag[i][j];
4. both miss:             install both, clear row i and column j except
                          (i, j).

Touched rows/columns become most recently used in every case.

Two invalidation policies keep the buffer consistent with the cache:

* ``precise_invalidation=True`` (default): every cache eviction is snooped
  and any matching pair is cleared, so a valid pair always denotes a
  resident line.
* ``precise_invalidation=False``: only the literal hardware rules run (the
  four cases above plus clearing the LRU row's flags on a bypass).  This
  mode can go stale; the harness audits it instead of assuming it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Set, Tuple

from .geometry import CacheGeometry


class Cflag(NamedTuple):
    carry: int  # carry out of the offset+index-bit add of base and disp
    neg: int    # 1 iff the displacement is negative


@dataclass(frozen=True)
class MabConfig:
    n_tag_rows: int = 2
    n_index_cols: int = 8
    precise_invalidation: bool = True

    def __post_init__(self) -> None:
        if self.n_tag_rows < 1 or self.n_index_cols < 1:
            raise ValueError("MAB needs at least one tag row and one index column")


@dataclass(frozen=True)
class Prediction:
    """Result of the narrow-adder address prediction for (base, disp)."""

    in_range: bool
    base_tag: int
    cflag: Cflag
    pred_index: int
    pred_offset: int
    effective_tag: int


def predict(base: int, disp: int, g: CacheGeometry) -> Prediction:
    """Predict the (tag, index, offset) of base + disp without a full add.

    ``in_range`` is true iff disp fits the signed offset+index-bit window;
    outside it only ``in_range`` is meaningful.  When in range,
    (effective_tag, pred_index, pred_offset) equals the decomposition of
    (base + disp) mod 2^address_bits.
    """
    k = g.low_bits
    low_sum = (base & g.low_mask) + (disp & g.low_mask)
    carry = (low_sum >> k) & 1
    low = low_sum & g.low_mask
    neg = 1 if disp < 0 else 0
    base_tag = (base >> k) & g.tag_mask
    return Prediction(
        in_range=-(1 << k) <= disp < (1 << k),
        base_tag=base_tag,
        cflag=Cflag(carry, neg),
        pred_index=low >> g.offset_bits,
        pred_offset=low & g.offset_mask,
        effective_tag=(base_tag + carry - neg) & g.tag_mask,
    )


@dataclass
class TagRow:
    valid: bool = False
    tag: int = 0
    cflag: Cflag = Cflag(0, 0)


@dataclass
class IndexCol:
    valid: bool = False
    index: int = 0


class MabOutcome(NamedTuple):
    hit: bool            # full hit: row + column + vflag set
    way: Optional[int]   # memoized way on a full hit
    row: Optional[int]   # matching row entry, if any
    col: Optional[int]   # matching column entry, if any


class Mab:
    """Mutable MAB state plus the lookup/update/invalidate operations."""

    def __init__(self, config: MabConfig, geometry: CacheGeometry):
        self.config = config
        self.geometry = geometry
        self.reset()

    def reset(self) -> None:
        n1, n2 = self.config.n_tag_rows, self.config.n_index_cols
        self.rows = [TagRow() for _ in range(n1)]
        self.cols = [IndexCol() for _ in range(n2)]
        self.vflag = [[False] * n2 for _ in range(n1)]
        self.memo_way = [[0] * n2 for _ in range(n1)]
        # front = least recently used; ties at reset broken by entry number
        self.row_lru = list(range(n1))
        self.col_lru = list(range(n2))

    def lookup(self, p: Prediction) -> MabOutcome:
        """Non-mutating match of a prediction against rows and columns.

        A row matches only on equal (base tag, cflag); a different encoding
        of the same effective tag conservatively misses.
        """
        row = col = None
        for i, r in enumerate(self.rows):
            if r.valid and r.tag == p.base_tag and r.cflag == p.cflag:
                row = i
                break
        for j, c in enumerate(self.cols):
            if c.valid and c.index == p.pred_index:
                col = j
                break
        if row is not None and col is not None and self.vflag[row][col]:
            return MabOutcome(True, self.memo_way[row][col], row, col)
        return MabOutcome(False, None, row, col)

    def update(self, p: Prediction, outcome: MabOutcome, resolved_way: int) -> None:
        """Apply the four-case update after the cache access resolved.

        ``resolved_way`` is where the cache found or filled the line, so a
        freshly set vflag always denotes a line resident at this instant.
        """
        n1, n2 = self.config.n_tag_rows, self.config.n_index_cols
        i, j = outcome.row, outcome.col
        if i is None:
            i = self.row_lru[0]
            self.rows[i] = TagRow(True, p.base_tag, p.cflag)
            self.vflag[i] = [False] * n2
        if j is None:
            j = self.col_lru[0]
            self.cols[j] = IndexCol(True, p.pred_index)
            for r in range(n1):
                self.vflag[r][j] = False
        self.vflag[i][j] = True
        self.memo_way[i][j] = resolved_way
        self._touch(self.row_lru, i)
        self._touch(self.col_lru, j)

    def bypass_invalidate(self) -> None:
        """Clear all vflags of the LRU tag row.

        Runs when a displacement falls outside the narrow-adder window, so
        the access proceeds without the buffer.  Row/column contents and
        recency are deliberately untouched.
        """
        self.vflag[self.row_lru[0]] = [False] * self.config.n_index_cols

    def snoop_evict(self, victim_tag: int, victim_index: int) -> None:
        """Clear every pair whose effective address matches an evicted line.

        Used by the precise-invalidation policy.  All cflag encodings that
        alias the victim's tag are cleared, not just exact key matches.
        """
        for i, r in enumerate(self.rows):
            if not r.valid or self.effective_tag(i) != victim_tag:
                continue
            for j, c in enumerate(self.cols):
                if c.valid and c.index == victim_index:
                    self.vflag[i][j] = False

    def effective_tag(self, i: int) -> int:
        """Tag denoted by row ``i``: stored tag plus carry minus sign."""
        r = self.rows[i]
        return (r.tag + r.cflag.carry - r.cflag.neg) & self.geometry.tag_mask

    def valid_pairs(self) -> Set[Tuple[int, int, int]]:
        """All memoized (effective_tag, index, way) triples; audit surface."""
        return {
            (self.effective_tag(i), self.cols[j].index, self.memo_way[i][j])
            for i in range(self.config.n_tag_rows)
            for j in range(self.config.n_index_cols)
            if self.vflag[i][j]
        }

    @staticmethod
    def _touch(order: list, entry: int) -> None:
        order.remove(entry)
        order.append(entry)
