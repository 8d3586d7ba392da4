import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import opt_offset, patch_u32
from packscope.corpus import packed_profile, plain_profile, sample_packed, sample_plain, synth_pe
from packscope.errors import MalformedPe, UnmappedRva
from packscope.pe import (
    PE32PLUS_MAGIC, PE32_MAGIC, SectionInfo, entry_bytes, parse_pe, rva_to_offset,
)

PLAIN = synth_pe(plain_profile(), 1)
PACKED = synth_pe(packed_profile(), 1)


def test_roundtrip_section_count():
    prof = plain_profile()
    pe = parse_pe(PLAIN)
    assert pe.coff_header.number_of_sections == len(prof.sections) == len(pe.sections)
    assert [s.name for s in pe.sections] == [s.name for s in prof.sections]
    assert pe.dos_header.e_magic == b"MZ"
    assert pe.optional_header.magic == PE32_MAGIC


def test_pe32_plus():
    pe = parse_pe(synth_pe(plain_profile(pe32_plus=True, image_base=0x140000000), 2))
    assert pe.optional_header.magic == PE32PLUS_MAGIC
    assert pe.optional_header.image_base == 0x140000000


def test_imports_named():
    pe = parse_pe(PLAIN)
    assert "GetProcAddress" in pe.import_table.imported_function_names
    assert pe.import_table.dll_names == ("KERNEL32.dll", "USER32.dll")
    assert not pe.import_table.damaged


def test_resources_and_debug():
    pe = parse_pe(PLAIN)
    assert pe.resource_count == 3
    assert not pe.resources_damaged


@pytest.mark.parametrize("data,reason", [
    (b"", "empty"),
    (b"MZ", "truncated"),
    (b"ZM" + bytes(200), "MZ"),
    (b"MZ" + bytes(0x3A) + struct.pack("<I", 0x40) + b"XX\0\0" + bytes(100), "PE signature"),
])
def test_malformed(data, reason):
    with pytest.raises(MalformedPe) as exc:
        parse_pe(data)
    assert reason in exc.value.reason


def test_section_table_overrun():
    (e_lfanew,) = struct.unpack_from("<I", PLAIN, 0x3C)
    b = bytearray(PLAIN)
    struct.pack_into("<H", b, e_lfanew + 6, 0xFFFF)
    with pytest.raises(MalformedPe, match="section table"):
        parse_pe(bytes(b))


def test_raw_data_outside_file():
    pe = parse_pe(PLAIN)
    with pytest.raises(MalformedPe):
        parse_pe(PLAIN[: pe.sections[-1].pointer_to_raw_data + 1])


def test_rva_to_offset_arithmetic():
    pe = parse_pe(PLAIN)
    text = pe.sections[0]
    assert rva_to_offset(pe, text.virtual_address + 0x10) == text.pointer_to_raw_data + 0x10
    assert rva_to_offset(pe, 0x40) == 0x40
    with pytest.raises(UnmappedRva):
        rva_to_offset(pe, 0xFFFFFF)


def test_rva_spec_example():
    s = SectionInfo(".text", 0x1000, 0x1000, 0x200, 0x400, 0)
    pe = parse_pe(PLAIN)
    from dataclasses import replace
    pe2 = replace(pe, sections=(s,))
    assert rva_to_offset(pe2, 0x1010) == 0x410


def test_entry_bytes_stub():
    prof = plain_profile()
    eb = entry_bytes(parse_pe(PLAIN), 64)
    assert len(eb.data) == 64 and not eb.short_read
    assert eb.data[: len(prof.entry_stub)] == prof.entry_stub


def test_entry_bytes_short_read():
    pe = parse_pe(PLAIN)
    text = pe.sections[0]
    last = text.virtual_address + text.size_of_raw_data - 1
    pe2 = parse_pe(patch_u32(PLAIN, opt_offset(PLAIN) + 16, last))
    eb = entry_bytes(pe2, 64)
    assert eb.short_read
    assert eb.data[0] == PLAIN[text.pointer_to_raw_data + text.size_of_raw_data - 1]
    assert eb.data[1:] == bytes(63)


def test_entry_bytes_unmapped():
    pe = parse_pe(patch_u32(PLAIN, opt_offset(PLAIN) + 16, 0xFFFFFF))
    with pytest.raises(UnmappedRva):
        entry_bytes(pe, 64)


@settings(max_examples=60)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_parse_total_over_generator(seed, packed):
    rng = np.random.default_rng(seed)
    prof = sample_packed(rng, 1_580_000_000) if packed else sample_plain(rng, 1_580_000_000, float(rng.random()))
    pe = parse_pe(synth_pe(prof, seed))
    assert len(pe.sections) == len(prof.sections)
    for s in pe.sections:
        assert s.pointer_to_raw_data + s.size_of_raw_data <= len(pe.raw) or s.size_of_raw_data == 0


@settings(max_examples=300)
@given(st.sampled_from([PLAIN, PACKED]), st.lists(st.tuples(st.integers(0, 2**20), st.integers(0, 255)),
                                                 min_size=1, max_size=12),
       st.integers(0, 2**20))
def test_fuzz_mutations(base, edits, cut):
    """Random byte edits and truncations either parse or raise MalformedPe."""
    b = bytearray(base)
    for pos, val in edits:
        # bias half of the edits into the headers, where they matter most
        i = pos % (0x400 if pos & 1 else len(b))
        b[i] = val
    data = bytes(b[: max(1, len(b) - cut % len(b))])
    try:
        pe = parse_pe(data)
    except MalformedPe:
        return
    from packscope.features import extract_all
    v = extract_all(pe)
    assert v.values.shape == (119,)
    assert np.all(np.isfinite(v.values))
