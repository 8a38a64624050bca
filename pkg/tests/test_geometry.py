import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waymemo.geometry import AddressParts, CacheGeometry, compose, decompose, same_line

G32 = CacheGeometry()
G16 = CacheGeometry.from_bits(address_bits=16, offset_bits=3, index_bits=5, ways=2)


def slice_oracle(addr, g):
    # binary-string slicing, independent of the shift/mask implementation
    bits = format(addr, f"0{g.address_bits}b")
    cut1, cut2 = g.tag_bits, g.tag_bits + g.index_bits
    tag = int(bits[:cut1], 2)
    index = int(bits[cut1:cut2], 2) if g.index_bits else 0
    offset = int(bits[cut2:], 2) if g.offset_bits else 0
    return AddressParts(tag, index, offset)


def test_decompose_examples():
    assert decompose(0x00000000, G32) == (0, 0, 0)
    assert decompose(0x00000042, G32) == (0, 2, 2)
    assert decompose(0x00007FFC, G32) == (1, 0x1FF, 0x1C)


def test_decompose_matches_slice_oracle():
    assert decompose(0x00000042, G32) == slice_oracle(0x42, G32)
    assert decompose(0x00007FFC, G32) == slice_oracle(0x7FFC, G32)


def test_compose_examples():
    assert compose(AddressParts(0, 0, 0), G32) == 0x0
    assert compose(AddressParts(0, 2, 2), G32) == 0x42
    assert compose(AddressParts(1, 0x1FF, 0x1C), G32) == 0x7FFC


def test_compose_rejects_wide_fields():
    with pytest.raises(ValueError):
        compose(AddressParts(1 << G32.tag_bits, 0, 0), G32)
    with pytest.raises(ValueError):
        compose(AddressParts(0, 1 << G32.index_bits, 0), G32)
    with pytest.raises(ValueError):
        compose(AddressParts(0, 0, 32), G32)


def test_same_line_examples():
    assert same_line(0x100, 0x11F, G32)
    assert not same_line(0x11C, 0x120, G32)
    # same index, different tag
    assert not same_line(0x100, 0x4100, G32)


def test_exhaustive_16bit_against_oracle():
    for addr in range(1 << 16):
        parts = decompose(addr, G16)
        assert parts == slice_oracle(addr, G16)
        assert compose(parts, G16) == addr


@settings(max_examples=300)
@given(st.integers(min_value=0, max_value=(1 << 32) - 1))
def test_round_trip_32bit(addr):
    assert compose(decompose(addr, G32), G32) == addr


@settings(max_examples=200)
@given(
    st.integers(min_value=0, max_value=5),
    st.integers(min_value=0, max_value=6),
    st.data(),
)
def test_round_trip_small_geometries(offset_bits, index_bits, data):
    bits = offset_bits + index_bits + 4
    g = CacheGeometry.from_bits(bits, offset_bits, index_bits, ways=2, instr_stride_bytes=1)
    addr = data.draw(st.integers(min_value=0, max_value=(1 << bits) - 1))
    assert compose(decompose(addr, g), g) == addr
    assert decompose(addr, g) == slice_oracle(addr, g)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(tag_bits=17),                      # widths do not sum
        dict(line_bytes=16),                    # disagrees with offset_bits
        dict(sets=256),                         # disagrees with index_bits
        dict(ways=0),
        dict(instr_stride_bytes=3),             # does not divide line_bytes
        dict(instr_stride_bytes=64),
    ],
)
def test_invalid_geometry_rejected(kwargs):
    base = dict(
        address_bits=32, offset_bits=5, index_bits=9, tag_bits=18,
        ways=2, line_bytes=32, sets=512, instr_stride_bytes=4,
    )
    base.update(kwargs)
    with pytest.raises(ValueError):
        CacheGeometry(**base)


def test_defaults_describe_32k_2way():
    assert G32.sets == 512
    assert G32.line_bytes == 32
    assert G32.tag_bits == 18
    assert G32.low_bits == 14
    assert G32.sets * G32.line_bytes * G32.ways == 32 * 1024
