"""
Minimal PE32 / PE32+ parser.

Only the structures needed for static packing features are decoded: DOS and
COFF headers, the optional header, the section table, the import directory,
the resource tree (leaf count only) and the presence of a debug directory.
Everything is read with :mod:`struct` directly from the input bytes; no read
ever leaves the buffer.

Damage inside the import or resource directories does not abort the parse.
The affected table comes back partial and carries a ``damaged`` flag so that
feature extraction can mark the dependent features as defaulted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

from packscope.errors import MalformedPe, UnmappedRva

MZ_MAGIC = b"MZ"
PE_MAGIC = b"PE\x00\x00"
PE32_MAGIC = 0x10B
PE32PLUS_MAGIC = 0x20B

# section characteristics
SCN_CNT_CODE = 0x00000020
SCN_CNT_INITIALIZED_DATA = 0x00000040
SCN_CNT_UNINITIALIZED_DATA = 0x00000080
SCN_MEM_EXECUTE = 0x20000000
SCN_MEM_READ = 0x40000000
SCN_MEM_WRITE = 0x80000000

# data directory slots
DIR_IMPORT = 1
DIR_RESOURCE = 2
DIR_DEBUG = 6
DIR_IAT = 12

_COFF = struct.Struct("<HHIIIHH")
_OPT32 = struct.Struct("<HBBIIIIIIIIIHHHHHHIIIIHHIIIIII")
_OPT64 = struct.Struct("<HBBIIIIIQIIHHHHHHIIIIHHQQQQII")
_SECTION = struct.Struct("<8sIIIIIIHHI")
_IMPORT_DESC = struct.Struct("<IIIII")
_RES_DIR = struct.Struct("<IIHHHH")
_RES_ENTRY = struct.Struct("<II")

MAX_IMPORT_DESCRIPTORS = 4096
MAX_THUNKS_PER_DLL = 65536
MAX_NAME_LEN = 512
MAX_RESOURCE_DEPTH = 32
MAX_RESOURCE_ENTRIES = 1 << 16


@dataclass(frozen=True)
class DosHeader:
    e_magic: bytes
    e_lfanew: int


@dataclass(frozen=True)
class CoffHeader:
    machine: int
    number_of_sections: int
    time_date_stamp: int
    size_of_optional_header: int
    characteristics: int


@dataclass(frozen=True)
class OptionalHeader:
    magic: int
    size_of_code: int
    size_of_initialized_data: int
    size_of_uninitialized_data: int
    address_of_entry_point: int
    base_of_code: int
    image_base: int
    section_alignment: int
    file_alignment: int
    major_os_version: int
    minor_os_version: int
    size_of_image: int
    size_of_headers: int
    checksum: int
    dll_characteristics: int
    size_of_stack_reserve: int
    size_of_stack_commit: int
    number_of_data_directories: int
    data_directories: tuple[tuple[int, int], ...]

    @property
    def is_pe32_plus(self) -> bool:
        return self.magic == PE32PLUS_MAGIC

    def directory(self, index: int) -> tuple[int, int]:
        if index < len(self.data_directories):
            return self.data_directories[index]
        return (0, 0)


@dataclass(frozen=True)
class SectionInfo:
    name: str
    virtual_size: int
    virtual_address: int
    size_of_raw_data: int
    pointer_to_raw_data: int
    characteristics: int

    @property
    def readable(self) -> bool:
        return bool(self.characteristics & SCN_MEM_READ)

    @property
    def writable(self) -> bool:
        return bool(self.characteristics & SCN_MEM_WRITE)

    @property
    def executable(self) -> bool:
        return bool(self.characteristics & SCN_MEM_EXECUTE)

    @property
    def has_code_flag(self) -> bool:
        return bool(self.characteristics & SCN_CNT_CODE)

    @property
    def has_initialized_data(self) -> bool:
        return bool(self.characteristics & SCN_CNT_INITIALIZED_DATA)

    @property
    def virtual_extent(self) -> int:
        return max(self.virtual_size, self.size_of_raw_data)

    def contains_rva(self, rva: int) -> bool:
        return self.virtual_address <= rva < self.virtual_address + self.virtual_extent


@dataclass(frozen=True)
class ImportTable:
    dll_names: tuple[str, ...] = ()
    # names only; imports by ordinal are counted in function_count
    imported_function_names: tuple[str, ...] = ()
    function_count: int = 0
    iat_entry_count: int = 0
    damaged: bool = False


@dataclass(frozen=True)
class PeFile:
    dos_header: DosHeader
    coff_header: CoffHeader
    optional_header: OptionalHeader
    sections: tuple[SectionInfo, ...]
    import_table: ImportTable
    resource_count: int
    resources_damaged: bool
    debug_directory_present: bool
    raw: bytes = field(repr=False)

    @property
    def entry_point(self) -> int:
        return self.optional_header.address_of_entry_point

    def section_at(self, rva: int) -> SectionInfo | None:
        for s in self.sections:
            if s.contains_rva(rva):
                return s
        return None

    def section_bytes(self, section: SectionInfo) -> bytes:
        start = section.pointer_to_raw_data
        return self.raw[start:start + section.size_of_raw_data]


class EntryBytes(NamedTuple):
    data: bytes
    short_read: bool


def _unpack(st: struct.Struct, buf: bytes, offset: int, what: str):
    if offset < 0 or offset + st.size > len(buf):
        raise MalformedPe(f"truncated headers ({what})")
    return st.unpack_from(buf, offset)


def parse_pe(data: bytes) -> PeFile:
    """Parse ``data`` into a :class:`PeFile`.

    Raises :class:`MalformedPe` when the headers or section table are
    unusable. Import/resource damage degrades to partial tables instead.
    """
    raw = bytes(data)
    if not raw:
        raise MalformedPe("empty input")
    if len(raw) < 64:
        raise MalformedPe("truncated headers (DOS header)")
    if raw[:2] != MZ_MAGIC:
        raise MalformedPe("missing MZ magic")
    (e_lfanew,) = struct.unpack_from("<I", raw, 0x3C)
    if e_lfanew + 4 > len(raw):
        raise MalformedPe("truncated headers (PE signature)")
    if raw[e_lfanew:e_lfanew + 4] != PE_MAGIC:
        raise MalformedPe("missing PE signature")

    coff_off = e_lfanew + 4
    machine, nsec, stamp, _, _, opt_size, chars = _unpack(_COFF, raw, coff_off, "COFF header")
    coff = CoffHeader(machine, nsec, stamp, opt_size, chars)

    opt_off = coff_off + _COFF.size
    if opt_off + 2 > len(raw):
        raise MalformedPe("truncated headers (optional header)")
    (magic,) = struct.unpack_from("<H", raw, opt_off)
    if magic == PE32_MAGIC:
        f = _unpack(_OPT32, raw, opt_off, "optional header")
        (_, _, _, size_code, size_init, size_uninit, entry, base_code, _base_data,
         image_base, sect_align, file_align, os_major, os_minor, _, _, _, _, _,
         size_image, size_headers, checksum, _subsystem, dll_chars,
         stack_reserve, stack_commit, _, _, _, n_dirs) = f
        fixed = _OPT32.size
    elif magic == PE32PLUS_MAGIC:
        f = _unpack(_OPT64, raw, opt_off, "optional header")
        (_, _, _, size_code, size_init, size_uninit, entry, base_code,
         image_base, sect_align, file_align, os_major, os_minor, _, _, _, _, _,
         size_image, size_headers, checksum, _subsystem, dll_chars,
         stack_reserve, stack_commit, _, _, _, n_dirs) = f
        fixed = _OPT64.size
    else:
        raise MalformedPe(f"unknown optional header magic {magic:#x}")

    # directories that do not fit inside the declared optional header are ignored
    room = max(0, (opt_size - fixed) // 8)
    usable_dirs = min(n_dirs, 16, room)
    dirs = []
    for i in range(usable_dirs):
        dirs.append(_unpack(struct.Struct("<II"), raw, opt_off + fixed + 8 * i, "data directories"))
    opt = OptionalHeader(
        magic=magic, size_of_code=size_code, size_of_initialized_data=size_init,
        size_of_uninitialized_data=size_uninit, address_of_entry_point=entry,
        base_of_code=base_code, image_base=image_base, section_alignment=sect_align,
        file_alignment=file_align, major_os_version=os_major, minor_os_version=os_minor,
        size_of_image=size_image, size_of_headers=size_headers, checksum=checksum,
        dll_characteristics=dll_chars, size_of_stack_reserve=stack_reserve,
        size_of_stack_commit=stack_commit, number_of_data_directories=n_dirs,
        data_directories=tuple(tuple(d) for d in dirs),
    )

    sec_off = opt_off + opt_size
    if sec_off + nsec * _SECTION.size > len(raw):
        raise MalformedPe("section table overrun")
    sections = []
    for i in range(nsec):
        name, vsize, va, rsize, rptr, _, _, _, _, schars = _SECTION.unpack_from(raw, sec_off + i * _SECTION.size)
        if rsize and rptr + rsize > len(raw):
            raise MalformedPe(f"section {i} raw data outside file")
        sections.append(SectionInfo(
            name=name.rstrip(b"\x00").decode("latin-1"),
            virtual_size=vsize, virtual_address=va, size_of_raw_data=rsize,
            pointer_to_raw_data=rptr, characteristics=schars,
        ))
    sections = tuple(sections)

    partial = _Layout(raw, sections, size_headers)
    imports = _parse_imports(partial, opt)
    res_count, res_damaged = _parse_resources(partial, opt)
    debug = _debug_present(partial, opt)

    return PeFile(
        dos_header=DosHeader(MZ_MAGIC, e_lfanew), coff_header=coff, optional_header=opt,
        sections=sections, import_table=imports, resource_count=res_count,
        resources_damaged=res_damaged, debug_directory_present=debug, raw=raw,
    )


class _Layout:
    """Just enough of a PE to resolve RVAs while the full object is being built."""

    def __init__(self, raw: bytes, sections, size_of_headers: int):
        self.raw = raw
        self.sections = sections
        self.size_of_headers = size_of_headers

    def offset(self, rva: int) -> int:
        return _rva_to_offset(self.sections, self.size_of_headers, rva)

    def read(self, rva: int, n: int) -> bytes:
        off = self.offset(rva)
        if off + n > len(self.raw):
            raise MalformedPe("read past end of file")
        return self.raw[off:off + n]

    def cstring(self, rva: int) -> str:
        off = self.offset(rva)
        end = self.raw.find(b"\x00", off, off + MAX_NAME_LEN)
        if end < 0:
            raise MalformedPe("unterminated string")
        return self.raw[off:end].decode("latin-1")


def _rva_to_offset(sections, size_of_headers: int, rva: int) -> int:
    for s in sections:
        if s.contains_rva(rva):
            return s.pointer_to_raw_data + (rva - s.virtual_address)
    if 0 <= rva < size_of_headers:
        return rva
    raise UnmappedRva(rva)


def rva_to_offset(pe: PeFile, rva: int) -> int:
    """Map ``rva`` to a file offset using the section table."""
    return _rva_to_offset(pe.sections, pe.optional_header.size_of_headers, rva)


def entry_bytes(pe: PeFile, n: int) -> EntryBytes:
    """The ``n`` bytes at the entry point, zero padded past the end of the
    entry section's raw data (or the file, for header-resident entry points).

    Raises :class:`UnmappedRva` if the entry point maps nowhere.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rva = pe.entry_point
    off = rva_to_offset(pe, rva)
    sec = pe.section_at(rva)
    limit = sec.pointer_to_raw_data + sec.size_of_raw_data if sec else len(pe.raw)
    limit = min(limit, len(pe.raw))
    chunk = pe.raw[off:max(off, min(off + n, limit))]
    short = len(chunk) < n
    return EntryBytes(chunk + b"\x00" * (n - len(chunk)), short)


def _parse_imports(lay: _Layout, opt: OptionalHeader) -> ImportTable:
    rva, size = opt.directory(DIR_IMPORT)
    if rva == 0 or size == 0:
        return ImportTable()
    thunk_fmt = "<Q" if opt.is_pe32_plus else "<I"
    thunk_size = 8 if opt.is_pe32_plus else 4
    ordinal_flag = 1 << (63 if opt.is_pe32_plus else 31)

    dlls: list[str] = []
    names: list[str] = []
    count = 0
    iat = 0
    damaged = False
    try:
        for i in range(MAX_IMPORT_DESCRIPTORS):
            desc = _IMPORT_DESC.unpack(lay.read(rva + i * _IMPORT_DESC.size, _IMPORT_DESC.size))
            if not any(desc):
                break
            oft, _, _, name_rva, ft = desc
            dlls.append(lay.cstring(name_rva))
            lookup = oft or ft
            for j in range(MAX_THUNKS_PER_DLL):
                (thunk,) = struct.unpack(thunk_fmt, lay.read(lookup + j * thunk_size, thunk_size))
                if thunk == 0:
                    break
                count += 1
                if not thunk & ordinal_flag:
                    names.append(lay.cstring((thunk & 0x7FFFFFFF) + 2))
            else:
                damaged = True
            if ft:
                for j in range(MAX_THUNKS_PER_DLL):
                    (slot,) = struct.unpack(thunk_fmt, lay.read(ft + j * thunk_size, thunk_size))
                    if slot == 0:
                        break
                    iat += 1
                else:
                    damaged = True
        else:
            damaged = True
    except (MalformedPe, UnmappedRva, struct.error):
        damaged = True
    return ImportTable(tuple(dlls), tuple(names), count, iat, damaged)


def _parse_resources(lay: _Layout, opt: OptionalHeader) -> tuple[int, bool]:
    rva, size = opt.directory(DIR_RESOURCE)
    if rva == 0 or size == 0:
        return 0, False
    leaves = [0]
    visited: set[int] = set()
    budget = [MAX_RESOURCE_ENTRIES]

    def walk(dir_off: int, depth: int) -> None:
        if depth > MAX_RESOURCE_DEPTH or dir_off in visited:
            raise MalformedPe("resource tree cycle or too deep")
        visited.add(dir_off)
        *_, n_named, n_ids = _RES_DIR.unpack(lay.read(rva + dir_off, _RES_DIR.size))
        for k in range(n_named + n_ids):
            budget[0] -= 1
            if budget[0] < 0:
                raise MalformedPe("too many resource entries")
            _, target = _RES_ENTRY.unpack(lay.read(rva + dir_off + _RES_DIR.size + 8 * k, 8))
            if target & 0x80000000:
                walk(target & 0x7FFFFFFF, depth + 1)
            else:
                lay.read(rva + target, 16)
                leaves[0] += 1

    try:
        walk(0, 0)
    except (MalformedPe, UnmappedRva, struct.error):
        return leaves[0], True
    return leaves[0], False


def _debug_present(lay: _Layout, opt: OptionalHeader) -> bool:
    rva, size = opt.directory(DIR_DEBUG)
    if rva == 0 or size == 0:
        return False
    try:
        lay.read(rva, min(size, 28))
    except (MalformedPe, UnmappedRva):
        return False
    return True
