"""Address bit-field arithmetic for a set-associative cache.

An address is split into three fields, from most to least significant:

    | tag | set index | line offset |

The field widths are fully parameterized so small geometries can be tested
exhaustively.  The defaults describe a 32 kB 2-way cache: 512 sets of
32-byte lines, leaving an 18-bit tag in a 32-bit address.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class AddressParts(NamedTuple):
    tag: int
    index: int
    offset: int


@dataclass(frozen=True)
class CacheGeometry:
    """Bit-level layout of one cache.

    ``line_bytes``, ``sets`` and ``tag_bits`` are redundant with the bit
    widths; the constructor validates that they agree.  Use
    :meth:`from_bits` to derive them automatically.
    """

    address_bits: int = 32
    offset_bits: int = 5
    index_bits: int = 9
    tag_bits: int = 18
    ways: int = 2
    line_bytes: int = 32
    sets: int = 512
    instr_stride_bytes: int = 4

    def __post_init__(self) -> None:
        if not (2 <= self.address_bits <= 62):
            raise ValueError(f"address_bits must be in [2, 62], got {self.address_bits}")
        if self.offset_bits < 0 or self.index_bits < 0 or self.tag_bits < 1:
            raise ValueError("field widths must be non-negative (tag at least 1 bit)")
        if self.offset_bits + self.index_bits + self.tag_bits != self.address_bits:
            raise ValueError(
                "offset_bits + index_bits + tag_bits must equal address_bits "
                f"({self.offset_bits}+{self.index_bits}+{self.tag_bits} != {self.address_bits})"
            )
        if self.line_bytes != 1 << self.offset_bits:
            raise ValueError(f"line_bytes must be 2^offset_bits, got {self.line_bytes}")
        if self.sets != 1 << self.index_bits:
            raise ValueError(f"sets must be 2^index_bits, got {self.sets}")
        if not (1 <= self.ways <= 64):
            raise ValueError(f"ways must be in [1, 64], got {self.ways}")
        if self.instr_stride_bytes < 1 or self.line_bytes % self.instr_stride_bytes != 0:
            raise ValueError("instr_stride_bytes must divide line_bytes")

    @classmethod
    def from_bits(
        cls,
        address_bits: int = 32,
        offset_bits: int = 5,
        index_bits: int = 9,
        ways: int = 2,
        instr_stride_bytes: int = 4,
    ) -> "CacheGeometry":
        """Build a geometry from the primary widths, deriving the rest."""
        return cls(
            address_bits=address_bits,
            offset_bits=offset_bits,
            index_bits=index_bits,
            tag_bits=address_bits - offset_bits - index_bits,
            ways=ways,
            line_bytes=1 << offset_bits,
            sets=1 << index_bits,
            instr_stride_bytes=instr_stride_bytes,
        )

    # The narrow adder used for way memoization spans the offset+index bits.
    @property
    def low_bits(self) -> int:
        return self.offset_bits + self.index_bits

    @property
    def address_mask(self) -> int:
        return (1 << self.address_bits) - 1

    @property
    def offset_mask(self) -> int:
        return (1 << self.offset_bits) - 1

    @property
    def index_mask(self) -> int:
        return (1 << self.index_bits) - 1

    @property
    def tag_mask(self) -> int:
        return (1 << self.tag_bits) - 1

    @property
    def low_mask(self) -> int:
        return (1 << self.low_bits) - 1


def decompose(addr: int, g: CacheGeometry) -> AddressParts:
    """Split ``addr`` into (tag, index, offset).  ``addr`` must be in range."""
    return AddressParts(
        tag=(addr >> g.low_bits) & g.tag_mask,
        index=(addr >> g.offset_bits) & g.index_mask,
        offset=addr & g.offset_mask,
    )


def compose(parts: AddressParts, g: CacheGeometry) -> int:
    """Inverse of :func:`decompose`.  Raises if a field exceeds its width."""
    tag, index, offset = parts
    if not 0 <= tag <= g.tag_mask:
        raise ValueError(f"tag {tag:#x} exceeds {g.tag_bits} bits")
    if not 0 <= index <= g.index_mask:
        raise ValueError(f"index {index:#x} exceeds {g.index_bits} bits")
    if not 0 <= offset <= g.offset_mask:
        raise ValueError(f"offset {offset:#x} exceeds {g.offset_bits} bits")
    return (tag << g.low_bits) | (index << g.offset_bits) | offset


def same_line(a: int, b: int, g: CacheGeometry) -> bool:
    """True iff both addresses fall on the same cache line."""
    return (a >> g.offset_bits) == (b >> g.offset_bits)
