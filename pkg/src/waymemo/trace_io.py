"""Trace format, parser/emitter, and synthetic workload generators.

Grammar (UTF-8, one record per line, ``#`` starts a comment):

    I <pc> seq              instruction fetch, control falls through
    I <pc> br <disp>        fetch, then a taken branch by a signed offset
    I <pc> lnk <target>     fetch, then a jump to a link-register target
    L <base> <disp>         load  from base + disp
    S <base> <disp>         store to   base + disp

``<pc>``, ``<base>``, ``<target>`` are 0x-prefixed hex; ``<disp>`` is
signed decimal.  A taken branch whose target is simply the next address is
written as ``seq`` by the generators, so the sequential/non-sequential
distinction in the markers is real.

Fetch streams are self-consistent: each I record's pc is implied by the
predecessor's transfer marker (see :func:`next_pc`).
"""

from __future__ import annotations

import random
from typing import Iterable, List, NamedTuple, Union

TRANSFER_SEQ = "seq"
TRANSFER_BRANCH = "br"
TRANSFER_LINK = "lnk"


class IFetch(NamedTuple):
    pc: int
    transfer: str  # "seq" | "br" | "lnk"
    arg: int = 0   # branch displacement or link target


class Load(NamedTuple):
    base: int
    disp: int


class Store(NamedTuple):
    base: int
    disp: int


TraceRecord = Union[IFetch, Load, Store]


class TraceParseError(ValueError):
    """Malformed trace line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def next_pc(rec: IFetch, stride: int, address_mask: int) -> int:
    """Address of the fetch that must follow ``rec``."""
    if rec.transfer == TRANSFER_SEQ:
        return (rec.pc + stride) & address_mask
    if rec.transfer == TRANSFER_BRANCH:
        return (rec.pc + rec.arg) & address_mask
    if rec.transfer == TRANSFER_LINK:
        return rec.arg & address_mask
    raise ValueError(f"unknown transfer marker {rec.transfer!r}")


def _parse_addr(text: str, line_no: int, what: str, limit: int) -> int:
    if not text.lower().startswith("0x"):
        raise TraceParseError(line_no, f"{what} must be 0x-prefixed hex, got {text!r}")
    try:
        value = int(text, 16)
    except ValueError:
        raise TraceParseError(line_no, f"bad hex {what}: {text!r}") from None
    if not 0 <= value < limit:
        raise TraceParseError(line_no, f"{what} {text} out of address range")
    return value


def _parse_disp(text: str, line_no: int, limit: int) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise TraceParseError(line_no, f"bad displacement: {text!r}") from None
    if not -limit < value < limit:
        raise TraceParseError(line_no, f"displacement {text} out of range")
    return value


def parse(source: Union[str, Iterable[str]], address_bits: int = 32) -> List[TraceRecord]:
    """Parse trace text (a string or an iterable of lines) into records."""
    if isinstance(source, str):
        source = source.splitlines()
    limit = 1 << address_bits
    records: List[TraceRecord] = []
    for line_no, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0]
        if op == "I":
            if len(parts) < 3:
                raise TraceParseError(line_no, "fetch needs a pc and a transfer marker")
            pc = _parse_addr(parts[1], line_no, "pc", limit)
            marker = parts[2]
            if marker == TRANSFER_SEQ:
                if len(parts) != 3:
                    raise TraceParseError(line_no, "trailing junk after 'seq'")
                records.append(IFetch(pc, TRANSFER_SEQ, 0))
            elif marker == TRANSFER_BRANCH:
                if len(parts) != 4:
                    raise TraceParseError(line_no, "'br' needs a displacement")
                records.append(IFetch(pc, TRANSFER_BRANCH, _parse_disp(parts[3], line_no, limit)))
            elif marker == TRANSFER_LINK:
                if len(parts) != 4:
                    raise TraceParseError(line_no, "'lnk' needs a target address")
                records.append(IFetch(pc, TRANSFER_LINK, _parse_addr(parts[3], line_no, "target", limit)))
            else:
                raise TraceParseError(line_no, f"unknown transfer marker {marker!r}")
        elif op in ("L", "S"):
            if len(parts) != 3:
                raise TraceParseError(line_no, f"'{op}' needs a base and a displacement")
            base = _parse_addr(parts[1], line_no, "base", limit)
            disp = _parse_disp(parts[2], line_no, limit)
            records.append(Load(base, disp) if op == "L" else Store(base, disp))
        else:
            raise TraceParseError(line_no, f"unknown opcode {op!r}")
    return records


def emit(records: Iterable[TraceRecord]) -> str:
    """Render records in the trace grammar; inverse of :func:`parse`."""
    lines = []
    for rec in records:
        if isinstance(rec, IFetch):
            if rec.transfer == TRANSFER_SEQ:
                lines.append(f"I 0x{rec.pc:x} seq")
            elif rec.transfer == TRANSFER_BRANCH:
                lines.append(f"I 0x{rec.pc:x} br {rec.arg}")
            else:
                lines.append(f"I 0x{rec.pc:x} lnk 0x{rec.arg:x}")
        elif isinstance(rec, Load):
            lines.append(f"L 0x{rec.base:x} {rec.disp}")
        elif isinstance(rec, Store):
            lines.append(f"S 0x{rec.base:x} {rec.disp}")
        else:
            raise TypeError(f"not a trace record: {rec!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def gen_loop(
    iterations: int,
    body_fetches: int,
    loads_per_iter: int = 0,
    distinct_bases: int = 1,
    disp_stride: int = 4,
    *,
    stores: bool = False,
    start_pc: int = 0x1000,
    data_base: int | None = None,
    line_bytes: int = 32,
    instr_stride: int = 4,
    seed: int = 0,
) -> List[TraceRecord]:
    """A loop body of straight-line fetches with a back-branch, plus loads.

    Loads round-robin over ``distinct_bases`` line-spaced base addresses;
    each base cycles through eight displacements ``disp_stride`` apart.
    The final fetch of every iteration but the last carries the
    back-branch.  ``seed`` only perturbs where the data region lands; the
    structure is deterministic.
    """
    if iterations < 0 or body_fetches < 1:
        raise ValueError("iterations must be >= 0 and body_fetches positive")
    if loads_per_iter < 0 or distinct_bases < 1:
        raise ValueError("bad load parameters")
    if iterations == 0:
        return []
    span = (body_fetches - 1) * instr_stride
    if start_pc + span >= 1 << 32:
        raise ValueError("loop body overflows the address space")

    if data_base is None:
        rng = random.Random(seed)
        data_base = 0x0010_0000 + rng.randrange(0, 4096) * line_bytes
    bases = [data_base + i * line_bytes for i in range(distinct_bases)]

    records: List[TraceRecord] = []
    mem_count = 0
    for it in range(iterations):
        emitted = 0
        for f in range(body_fetches):
            pc = start_pc + f * instr_stride
            last = f == body_fetches - 1
            if last and it != iterations - 1 and body_fetches > 1:
                records.append(IFetch(pc, TRANSFER_BRANCH, -span))
            elif last and it != iterations - 1:
                # single-fetch body: branch to itself
                records.append(IFetch(pc, TRANSFER_BRANCH, 0))
            else:
                records.append(IFetch(pc, TRANSFER_SEQ, 0))
            # spread the iteration's loads evenly across the body
            due = loads_per_iter * (f + 1) // body_fetches
            while emitted < due:
                base = bases[mem_count % distinct_bases]
                disp = ((mem_count // distinct_bases) % 8) * disp_stride
                records.append(Store(base, disp) if stores else Load(base, disp))
                mem_count += 1
                emitted += 1
    return records


def gen_random(
    n: int,
    seed: int,
    *,
    pc_start: int = 0x4000,
    pc_range: int = 1 << 16,
    base_pool: int = 8,
    data_start: int = 0x0010_0000,
    data_range: int = 1 << 16,
    fetch_frac: float = 0.5,
    store_frac: float = 0.3,
    branch_frac: float = 0.2,
    link_frac: float = 0.1,
    far_disp_frac: float = 0.02,
    max_small_disp: int = 4096,
    address_bits: int = 32,
    instr_stride: int = 4,
) -> List[TraceRecord]:
    """Pseudo-random mixed trace with a self-consistent fetch stream.

    Branch/link targets stay inside ``[pc_start, pc_start + pc_range)``.
    ``far_disp_frac`` of memory displacements fall outside the 14-bit-style
    window (magnitude >= 2^14) to exercise the bypass path.  Deterministic
    for a given seed.
    """
    rng = random.Random(seed)
    mask = (1 << address_bits) - 1
    pool = [
        (data_start + rng.randrange(data_range)) & ~0x3 for _ in range(max(1, base_pool))
    ]
    pc = pc_start
    records: List[TraceRecord] = []

    def in_text(addr: int) -> bool:
        return pc_start <= addr < pc_start + pc_range

    for _ in range(n):
        if rng.random() < fetch_frac:
            u = rng.random()
            if u < branch_frac:
                disp = rng.randrange(-max_small_disp, max_small_disp) & ~0x3
                if rng.random() < far_disp_frac:
                    disp = rng.choice([-1, 1]) * ((1 << 14) + (rng.randrange(1 << 13) & ~0x3))
                target = (pc + disp) & mask
                if in_text(target):
                    rec = IFetch(pc, TRANSFER_BRANCH, disp)
                else:
                    target = pc_start + rng.randrange(pc_range // instr_stride) * instr_stride
                    rec = IFetch(pc, TRANSFER_LINK, target)
            elif u < branch_frac + link_frac:
                target = pc_start + rng.randrange(pc_range // instr_stride) * instr_stride
                rec = IFetch(pc, TRANSFER_LINK, target)
            else:
                target = (pc + instr_stride) & mask
                if not in_text(target):
                    target = pc_start
                    rec = IFetch(pc, TRANSFER_LINK, target)
                else:
                    rec = IFetch(pc, TRANSFER_SEQ, 0)
            records.append(rec)
            pc = next_pc(rec, instr_stride, mask)
        else:
            base = pool[rng.randrange(len(pool))]
            if rng.random() < far_disp_frac:
                disp = rng.choice([-1, 1]) * ((1 << 14) + rng.randrange(1 << 14))
            else:
                disp = rng.randrange(-max_small_disp, max_small_disp)
            if rng.random() < store_frac:
                records.append(Store(base, disp))
            else:
                records.append(Load(base, disp))
    return records
