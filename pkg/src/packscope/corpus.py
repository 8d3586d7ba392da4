"""
Synthetic PE corpus generation.

:func:`synth_pe` lays out a structurally valid (but not executable) PE image
from a :class:`SynthProfile`. Profiles are either hand-written or drawn by the
samplers below, which produce plain and packed families with enough spread in
sizes, names, imports and header fields to make classification non-trivial.

Every generated file is checked against the packing cues of its profile:
plain files show at most one, packed files show at least three.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from packscope.errors import BadProfile
from packscope.pe import (
    SCN_CNT_CODE, SCN_CNT_INITIALIZED_DATA, SCN_CNT_UNINITIALIZED_DATA,
    SCN_MEM_EXECUTE, SCN_MEM_READ, SCN_MEM_WRITE, PeFile, parse_pe,
)

PACKER_SECTION_NAMES = frozenset({
    "UPX0", "UPX1", "UPX2", "UPX!", ".aspack", ".adata", ".petite", "petite",
    "MPRESS1", "MPRESS2", ".MPRESS1", ".MPRESS2", "kkrunchy", ".nsp0", ".nsp1",
    ".nsp2", "PEC2", "pec1", ".perplex", ".yP", ".packed", "FSG!", ".MaskPE",
})

CONTENT_KINDS = ("zeros", "text", "strings", "random", "lowent")
_FLAG_BITS = {
    "r": SCN_MEM_READ, "w": SCN_MEM_WRITE, "x": SCN_MEM_EXECUTE,
    "c": SCN_CNT_CODE, "d": SCN_CNT_INITIALIZED_DATA, "u": SCN_CNT_UNINITIALIZED_DATA,
}
_DOS_STUB = (b"\x0e\x1f\xba\x0e\x00\xb4\x09\xcd\x21\xb8\x01\x4c\xcd\x21"
             b"This program cannot be run in DOS mode.\r\r\n$")

# plain entry sections stay below this to keep the built-in detector quiet
PLAIN_MAX_ENTRY_ENTROPY = 7.0
PACKED_ENTROPY_CUE = 7.5


@dataclass(frozen=True)
class SectionPlan:
    name: str
    size: int = 0x1000
    content: str = "text"
    flags: str = "r"
    virtual_size: int | None = None
    # False: no raw data at all (``size`` is then the virtual size)
    has_raw: bool = True
    holds: tuple[str, ...] = ()
    resource_payload: str = "text"


@dataclass(frozen=True)
class SynthProfile:
    class_hint: str
    sections: tuple[SectionPlan, ...]
    entry_section: int = 0
    entry_offset: int = 0
    entry_stub: bytes = b"\x55\x8b\xec"
    imports: tuple[tuple[str, tuple[str, ...]], ...] = ()
    n_resources: int = 0
    stack_reserve: int = 0x100000
    stack_commit: int = 0x1000
    section_alignment: int = 0x1000
    file_alignment: int = 0x200
    image_base: int = 0x400000
    dll_characteristics: int = 0x8140
    os_version: tuple[int, int] = (6, 0)
    checksum: int = 0
    timestamp: int = 1_570_000_000
    pe32_plus: bool = False
    text_spread: float = 24.0
    family: str = ""


@dataclass(frozen=True)
class Cues:
    packer_name: bool
    rwx: bool
    entry_nonstandard: bool
    entry_entropy: float
    virtual_gt_raw: bool

    @property
    def count(self) -> int:
        return sum((self.packer_name, self.rwx, self.entry_nonstandard,
                    self.entry_entropy >= PACKED_ENTROPY_CUE, self.virtual_gt_raw))


@dataclass(frozen=True)
class SyntheticSample:
    name: str
    data: bytes = field(repr=False)
    class_hint: str
    timestamp: int
    family: str
    seed: int


def _align(v: int, a: int) -> int:
    return (v + a - 1) // a * a if a else v


def _flags(spec: str) -> int:
    out = 0
    for ch in spec:
        if ch not in _FLAG_BITS:
            raise BadProfile(f"unknown section flag {ch!r}")
        out |= _FLAG_BITS[ch]
    return out


_TEXT_ALPHABET = np.random.default_rng(0x5EED).permutation(256).astype(np.uint8)


def _fill(kind: str, n: int, rng: np.random.Generator, spread: float) -> bytes:
    if n <= 0:
        return b""
    if kind == "zeros":
        return bytes(n)
    if kind == "random":
        return rng.bytes(n)
    if kind == "text":
        # skewed byte distribution, roughly code-like entropy
        w = np.exp(-np.arange(256) / spread)
        idx = rng.choice(256, size=n, p=w / w.sum())
        return _TEXT_ALPHABET[idx].tobytes()
    if kind == "strings":
        alphabet = np.frombuffer(b"etaoinshrdlucmfwypvbgkqjxz ETAOINSHRDLU_.0123456789\x00", dtype=np.uint8)
        w = np.exp(-np.arange(len(alphabet)) / 12.0)
        return alphabet[rng.choice(len(alphabet), size=n, p=w / w.sum())].tobytes()
    if kind == "lowent":
        # random bytes diluted with zero runs to hold entropy down
        out = np.frombuffer(rng.bytes(n), dtype=np.uint8).copy()
        out[rng.random(n) < 0.55] = 0
        return out.tobytes()
    raise BadProfile(f"unknown content kind {kind!r}")


def _import_blob(imports, base: int, pe32_plus: bool) -> tuple[bytes, int, int, int]:
    """Build an import directory at RVA ``base``.

    Returns (blob, descriptor_table_size, iat_rva, iat_size).
    """
    tsz = 8 if pe32_plus else 4
    tfmt = "<Q" if pe32_plus else "<I"
    ordinal_flag = 1 << (63 if pe32_plus else 31)
    n = len(imports)
    desc_size = (n + 1) * 20
    counts = [len(funcs) + 1 for _, funcs in imports]
    ilt_off = desc_size
    iat_off = ilt_off + sum(counts) * tsz
    names_off = iat_off + sum(counts) * tsz

    names = bytearray()
    hint_rvas: list[list[int]] = []
    for _, funcs in imports:
        rvas = []
        for f in funcs:
            if f.startswith("#"):
                rvas.append(ordinal_flag | int(f[1:]))
                continue
            if (names_off + len(names)) % 2:
                names += b"\x00"
            rvas.append(base + names_off + len(names))
            names += struct.pack("<H", 0) + f.encode("latin-1") + b"\x00"
        hint_rvas.append(rvas)
    dll_rvas = []
    for dll, _ in imports:
        dll_rvas.append(base + names_off + len(names))
        names += dll.encode("latin-1") + b"\x00"

    blob = bytearray(names_off) + names
    pos = 0
    for i, rvas in enumerate(hint_rvas):
        ilt = base + ilt_off + pos * tsz
        iat = base + iat_off + pos * tsz
        struct.pack_into("<IIIII", blob, i * 20, ilt, 0, 0, dll_rvas[i], iat)
        for j, r in enumerate(rvas):
            struct.pack_into(tfmt, blob, ilt_off + (pos + j) * tsz, r)
            struct.pack_into(tfmt, blob, iat_off + (pos + j) * tsz, r)
        pos += len(rvas) + 1
    return bytes(blob), desc_size, base + iat_off, sum(counts) * tsz


def _resource_blob(n: int, base: int, payload: str, rng: np.random.Generator, spread: float) -> bytes:
    # type dir -> id dir (n entries) -> language dir -> data entry -> data
    def directory(entries: int) -> bytes:
        return struct.pack("<IIHHHH", 0, 0, 4, 0, 0, entries)

    root_size = 16 + 8 * (1 if n else 0)
    id_dir_off = root_size
    id_dir_size = 16 + 8 * n
    lang_off = id_dir_off + id_dir_size
    lang_size = 16 + 8
    data_entry_off = lang_off + lang_size * n
    data_off = data_entry_off + 16 * n

    blob = bytearray(directory(1 if n else 0))
    if n:
        blob += struct.pack("<II", 10, 0x80000000 | id_dir_off)
        blob += directory(n)
        for k in range(n):
            blob += struct.pack("<II", k + 1, 0x80000000 | (lang_off + k * lang_size))
        payloads = [_fill(payload, int(rng.integers(64, 768)), rng, spread) for _ in range(n)]
        cursor = data_off
        entries = bytearray()
        for k in range(n):
            blob += directory(1) + struct.pack("<II", 0x409, data_entry_off + 16 * k)
            entries += struct.pack("<IIII", base + cursor, len(payloads[k]), 0, 0)
            cursor += _align(len(payloads[k]), 4)
        blob += entries
        for p in payloads:
            blob += p + bytes(_align(len(p), 4) - len(p))
    return bytes(blob)


def _validate(profile: SynthProfile) -> None:
    if profile.class_hint not in ("plain", "packed"):
        raise BadProfile(f"class_hint must be plain or packed, not {profile.class_hint!r}")
    if not profile.sections:
        raise BadProfile("at least one section is required")
    if not 0 <= profile.entry_section < len(profile.sections):
        raise BadProfile("entry_section out of range")
    for a in (profile.file_alignment, profile.section_alignment):
        if a < 16 or a & (a - 1):
            raise BadProfile("alignments must be powers of two >= 16")
    held: list[str] = []
    for s in profile.sections:
        if len(s.name.encode("latin-1")) > 8:
            raise BadProfile(f"section name {s.name!r} longer than 8 bytes")
        if s.content not in CONTENT_KINDS or s.resource_payload not in CONTENT_KINDS:
            raise BadProfile(f"unknown content kind in section {s.name!r}")
        if not s.has_raw and s.holds:
            raise BadProfile("sections without raw data cannot hold directories")
        if s.size < 0:
            raise BadProfile("negative section size")
        _flags(s.flags)
        held.extend(s.holds)
    for h in held:
        if h not in ("imports", "resources", "debug"):
            raise BadProfile(f"unknown directory {h!r}")
    if len(held) != len(set(held)):
        raise BadProfile("each directory may be held by one section only")
    if profile.imports and "imports" not in held:
        raise BadProfile("imports given but no section holds them")
    if profile.n_resources and "resources" not in held:
        raise BadProfile("resources given but no section holds them")
    ent = profile.sections[profile.entry_section]
    if profile.entry_stub and ent.has_raw and profile.entry_offset + len(profile.entry_stub) > ent.size:
        raise BadProfile("entry stub does not fit in the entry section filler")


def synth_pe(profile: SynthProfile, seed: int = 0) -> bytes:
    """Lay out a PE image for ``profile``; deterministic in (profile, seed)."""
    _validate(profile)
    rng = np.random.default_rng(seed)
    p = profile
    fa, sa = p.file_alignment, p.section_alignment
    opt_size = 240 if p.pe32_plus else 224
    n = len(p.sections)
    e_lfanew = 0x80
    headers_size = _align(e_lfanew + 4 + 20 + opt_size + 40 * n, fa)

    fillers = [_fill(s.content, s.size, rng, p.text_spread) if s.has_raw else b"" for s in p.sections]
    fillers = [bytearray(f) for f in fillers]
    if p.entry_stub and p.sections[p.entry_section].has_raw:
        f = fillers[p.entry_section]
        f[p.entry_offset:p.entry_offset + len(p.entry_stub)] = p.entry_stub

    # blob sizes do not depend on their base RVA, so lay out once with base 0
    def blobs_for(i: int, base: int) -> tuple[bytes, dict]:
        s = p.sections[i]
        out = bytearray(fillers[i])
        dirs: dict = {}
        for what in s.holds:
            out += bytes(_align(len(out), 4) - len(out))
            at = base + len(out)
            if what == "resources":
                rrng = np.random.default_rng([seed, 7, i])
                blob = _resource_blob(p.n_resources, at, s.resource_payload, rrng, p.text_spread)
                dirs["resources"] = (at, len(blob))
            elif what == "imports":
                blob, dsize, iat_rva, iat_size = _import_blob(p.imports, at, p.pe32_plus)
                dirs["imports"] = (at, dsize if p.imports else 0)
                dirs["iat"] = (iat_rva, iat_size if p.imports else 0)
                if not p.imports:
                    blob = bytes(20)
            else:
                blob = struct.pack("<IIHHIIII", 0, p.timestamp, 0, 0, 2, 0, 0, 0)
                dirs["debug"] = (at, 28)
            out += blob
        return bytes(out), dirs

    sizes = [len(blobs_for(i, 0)[0]) for i in range(n)]

    vas, ptrs, raws, vsizes = [], [], [], []
    va = _align(headers_size, sa)
    ptr = headers_size
    for s, size in zip(p.sections, sizes):
        raw = _align(size, fa) if s.has_raw else 0
        vsize = s.virtual_size if s.virtual_size is not None else (size if s.has_raw else s.size)
        vas.append(va)
        ptrs.append(ptr if raw else 0)
        raws.append(raw)
        vsizes.append(vsize)
        va += _align(max(vsize, raw, 1), sa)
        ptr += raw
    size_of_image = va

    contents, dirs = [], {}
    for i in range(n):
        body, d = blobs_for(i, vas[i])
        contents.append(body + bytes(raws[i] - len(body)) if raws[i] else b"")
        dirs.update(d)

    chars = [_flags(s.flags) for s in p.sections]
    code_idx = [i for i, c in enumerate(chars) if c & SCN_CNT_CODE]
    size_code = sum(raws[i] for i in code_idx)
    size_init = sum(r for r, c in zip(raws, chars) if c & SCN_CNT_INITIALIZED_DATA)
    size_uninit = sum(v for v, c in zip(vsizes, chars) if c & SCN_CNT_UNINITIALIZED_DATA)
    base_of_code = vas[code_idx[0]] if code_idx else vas[0]
    entry_rva = vas[p.entry_section] + p.entry_offset

    ddirs = [(0, 0)] * 16
    slots = {"imports": 1, "resources": 2, "debug": 6, "iat": 12}
    for k, v in dirs.items():
        ddirs[slots[k]] = v

    out = bytearray(headers_size)
    out[0:2] = b"MZ"
    struct.pack_into("<H", out, 2, 0x90)
    struct.pack_into("<I", out, 0x3C, e_lfanew)
    out[0x40:0x40 + len(_DOS_STUB)] = _DOS_STUB
    out[e_lfanew:e_lfanew + 4] = b"PE\x00\x00"
    machine = 0x8664 if p.pe32_plus else 0x14C
    coff_chars = 0x0022 if p.pe32_plus else 0x0102
    struct.pack_into("<HHIIIHH", out, e_lfanew + 4, machine, n, p.timestamp & 0xFFFFFFFF, 0, 0, opt_size, coff_chars)
    o = e_lfanew + 24
    major, minor = p.os_version
    if p.pe32_plus:
        struct.pack_into(
            "<HBBIIIIIQIIHHHHHHIIIIHHQQQQII", out, o, 0x20B, 14, 0, size_code, size_init, size_uninit,
            entry_rva, base_of_code, p.image_base, sa, fa, major, minor, 0, 0, major, minor, 0,
            size_of_image, headers_size, p.checksum, 2, p.dll_characteristics,
            p.stack_reserve, p.stack_commit, 0x100000, 0x1000, 0, 16)
        dd = o + 112
    else:
        struct.pack_into(
            "<HBBIIIIIIIIIHHHHHHIIIIHHIIIIII", out, o, 0x10B, 14, 0, size_code, size_init, size_uninit,
            entry_rva, base_of_code, 0, p.image_base, sa, fa, major, minor, 0, 0, major, minor, 0,
            size_of_image, headers_size, p.checksum, 2, p.dll_characteristics,
            p.stack_reserve, p.stack_commit, 0x100000, 0x1000, 0, 16)
        dd = o + 96
    for k, (rva, size) in enumerate(ddirs):
        struct.pack_into("<II", out, dd + 8 * k, rva, size)
    st = o + opt_size
    for i, s in enumerate(p.sections):
        struct.pack_into("<8sIIIIIIHHI", out, st + 40 * i, s.name.encode("latin-1"), vsizes[i], vas[i],
                         raws[i], ptrs[i], 0, 0, 0, 0, chars[i])
    for c in contents:
        out += c
    data = bytes(out)

    cues = measure_cues(parse_pe(data))
    if p.class_hint == "plain" and (cues.count > 1 or cues.entry_entropy >= PLAIN_MAX_ENTRY_ENTROPY):
        raise BadProfile(f"plain profile shows packing cues: {cues}")
    if p.class_hint == "packed" and cues.count < 3:
        raise BadProfile(f"packed profile shows fewer than three cues: {cues}")
    return data


def measure_cues(pe: PeFile) -> Cues:
    from packscope.features import STANDARD_SECTIONS, shannon_entropy

    entry = pe.section_at(pe.entry_point)
    return Cues(
        packer_name=any(s.name in PACKER_SECTION_NAMES for s in pe.sections),
        rwx=any(s.writable and s.executable for s in pe.sections),
        entry_nonstandard=entry is None or entry.name not in STANDARD_SECTIONS,
        entry_entropy=shannon_entropy(pe.section_bytes(entry)) if entry else -1.0,
        virtual_gt_raw=any(s.virtual_size > s.size_of_raw_data for s in pe.sections),
    )


# ---------------------------------------------------------------------------
# default and sampled profiles
# ---------------------------------------------------------------------------

KERNEL32 = ("GetModuleHandleA", "GetProcAddress", "ExitProcess", "CreateFileA", "ReadFile",
            "WriteFile", "CloseHandle", "GetLastError", "HeapAlloc", "HeapFree", "GetCommandLineA",
            "GetStartupInfoA", "GetStdHandle", "Sleep", "GetTickCount", "QueryPerformanceCounter",
            "GetCurrentProcessId", "GetSystemTimeAsFileTime", "InitializeCriticalSection",
            "EnterCriticalSection", "LeaveCriticalSection", "MultiByteToWideChar",
            "WideCharToMultiByte", "GetModuleFileNameA", "SetUnhandledExceptionFilter")
USER32 = ("MessageBoxA", "GetMessageA", "DispatchMessageA", "TranslateMessage", "CreateWindowExA",
          "DefWindowProcA", "RegisterClassExA", "ShowWindow", "UpdateWindow", "LoadIconA",
          "LoadCursorA", "PostQuitMessage", "SendMessageA")
ADVAPI32 = ("RegOpenKeyExA", "RegQueryValueExA", "RegCloseKey", "RegSetValueExA",
            "OpenProcessToken", "GetUserNameA")
MSVCRT = ("malloc", "free", "printf", "memcpy", "memset", "strlen", "exit", "_initterm",
          "__getmainargs", "_controlfp", "fopen", "fclose")
GDI32 = ("CreateFontA", "SelectObject", "DeleteObject", "BitBlt", "GetStockObject")
WS2_32 = ("#3", "#4", "#9", "#16", "#19", "#23", "#115")
PLAIN_DLLS = {"KERNEL32.dll": KERNEL32, "USER32.dll": USER32, "ADVAPI32.dll": ADVAPI32,
              "msvcrt.dll": MSVCRT, "GDI32.dll": GDI32, "WS2_32.dll": WS2_32}

PLAIN_ENTRY_STUBS = (
    b"\x55\x8b\xec\x83\xec\x10\x53\x56\x57",          # push ebp; mov ebp,esp; sub esp,..
    b"\xe8\x5a\x04\x00\x00\xe9\x89\xfe\xff\xff",      # call __security_init_cookie; jmp
    b"\x6a\x60\x68\x70\x21\x40\x00\xe8",              # push 60h; push ...; call
    b"\x48\x83\xec\x28\xe8\x1b\x05\x00\x00",          # sub rsp,28h; call
)
UPX_STUB = b"\x60\xbe\x00\x60\x40\x00\x8d\xbe\x00\xb0\xff\xff\x57\x83\xcd\xff"
PACKED_STUBS = (
    UPX_STUB,
    b"\x60\xe8\x03\x00\x00\x00\xe9\xeb\x04\x5d\x45\x55\xc3\xe8\x01",   # aspack-like
    b"\x60\xe8\x00\x00\x00\x00\x58\x05\x5a\x0b\x00\x00\x8b\x30",       # mpress-like
    b"\xb8\x00\x50\x40\x00\x6a\x00\x68\xf0\x1e\x40\x00\x64\xff\x35",   # petite-like
    b"\xbe\x90\x01\x40\x00\xad\x93\xad\x97\xad\x56\x96\xb2\x80",       # kkrunchy-like
    b"\xeb\x02\xcd\x20\xe8\x00\x00\x00\x00\x5d\x81\xed\x10\x10",       # generic crypter
)


def plain_profile(**overrides) -> SynthProfile:
    """Deterministic plain executable: .text/.rdata/.data/.idata/.rsrc."""
    base = SynthProfile(
        class_hint="plain",
        sections=(
            SectionPlan(".text", 0x3000, "text", "rxc"),
            SectionPlan(".rdata", 0x800, "strings", "rd", holds=("debug",)),
            SectionPlan(".data", 0x400, "strings", "rwd"),
            SectionPlan(".idata", 0, "zeros", "rwd", holds=("imports",)),
            SectionPlan(".rsrc", 0, "zeros", "rd", holds=("resources",)),
        ),
        entry_section=0, entry_offset=0x120, entry_stub=PLAIN_ENTRY_STUBS[0],
        imports=(("KERNEL32.dll", ("GetModuleHandleA", "GetProcAddress", "ExitProcess", "Sleep",
                                   "CreateFileA", "CloseHandle")),
                 ("USER32.dll", ("MessageBoxA", "GetMessageA"))),
        n_resources=3, checksum=0x0001A2B3, family="plain",
    )
    return replace(base, **overrides)


def packed_profile(**overrides) -> SynthProfile:
    """Deterministic UPX-style packed executable."""
    base = SynthProfile(
        class_hint="packed",
        sections=(
            SectionPlan("UPX0", 0x10000, "zeros", "rwxcu", has_raw=False),
            SectionPlan("UPX1", 0x3000, "random", "rwxcd"),
            SectionPlan(".rsrc", 0, "zeros", "rwd", holds=("resources", "imports")),
        ),
        entry_section=1, entry_offset=0x2E00, entry_stub=UPX_STUB,
        imports=(("KERNEL32.DLL", ("LoadLibraryA", "GetProcAddress", "VirtualProtect",
                                   "VirtualAlloc", "VirtualFree", "ExitProcess")),
                 ("USER32.dll", ("MessageBoxA",))),
        n_resources=1, dll_characteristics=0, checksum=0, family="upx",
    )
    return replace(base, **overrides)


def _pick(rng: np.random.Generator, seq, k: int) -> tuple:
    k = max(0, min(k, len(seq)))
    idx = np.sort(rng.choice(len(seq), size=k, replace=False))
    return tuple(seq[i] for i in idx)


def _plain_imports(rng: np.random.Generator) -> tuple:
    dlls = ["KERNEL32.dll"] + list(_pick(rng, [d for d in PLAIN_DLLS if d != "KERNEL32.dll"],
                                         int(rng.integers(0, 5))))
    out = []
    for d in dlls:
        pool = PLAIN_DLLS[d]
        out.append((d, _pick(rng, pool, int(rng.integers(2, len(pool) + 1)))))
    return tuple(out)


def sample_plain(rng: np.random.Generator, timestamp: int, drift: float = 0.0) -> SynthProfile:
    """A randomized plain executable.

    ``drift`` in [0, 1] moves the population towards newer toolchains:
    extra non-standard (but harmless) sections, compressed resources,
    larger stack reservations and one packer-like quirk (an uninitialized
    section, a writable code section or an entry point in a loader stub).
    """
    spread = float(rng.uniform(14, 30))
    text_size = int(rng.integers(0x800, 0x6000))
    secs = [SectionPlan(".text", text_size, "text", "rxc")]
    secs.append(SectionPlan(".rdata", int(rng.integers(0x100, 0x1800)), "strings", "rd",
                            holds=("debug",) if rng.random() < 0.6 else ()))
    secs.append(SectionPlan(".data", int(rng.integers(0x80, 0x1000)), str(rng.choice(["strings", "zeros", "text"])), "rwd"))
    import_host = rng.random() < 0.6
    if import_host:
        secs.append(SectionPlan(".idata", 0, "zeros", "rwd", holds=("imports",)))
    else:
        secs[1] = replace(secs[1], holds=secs[1].holds + ("imports",))
    if rng.random() < drift:
        name = str(rng.choice([".00cfg", ".gfids", "_RDATA", ".didat", ".voltbl"]))
        secs.append(SectionPlan(name, int(rng.integers(0x20, 0x200)), "strings", "rd"))
    entry_section = 0
    if drift > 0 and rng.random() < drift:
        quirk = str(rng.choice(["bss", "jit", "loader"]))
        if quirk == "bss":
            secs.append(SectionPlan(".bss", int(rng.integers(0x100, 0x4000)), "zeros", "rwu", has_raw=False))
        elif quirk == "jit":
            secs.append(SectionPlan(".jit", int(rng.integers(0x200, 0x1000)), "text", "rwxc"))
        else:
            entry_section = len(secs)
            secs.append(SectionPlan(".boot", int(rng.integers(0x200, 0x600)), "text", "rxc"))
    n_res = int(rng.integers(0, 12)) if rng.random() < 0.7 else 0
    if n_res:
        payload = "random" if rng.random() < 0.3 + 0.5 * drift else "text"
        secs.append(SectionPlan(".rsrc", 0, "zeros", "rd", holds=("resources",), resource_payload=payload))
    if rng.random() < 0.5:
        secs.append(SectionPlan(".reloc", int(rng.integers(0x40, 0x400)), "text", "rd"))
    if rng.random() < 0.15:
        secs.append(SectionPlan(".tls", 0x20, "zeros", "rwd"))
    stack = int(rng.choice([0x100000, 0x100000, 0x100000, 0x200000, 0x40000]))
    if rng.random() < drift * 0.6:
        stack = int(rng.choice([0x400000, 0x800000]))
    stub = PLAIN_ENTRY_STUBS[int(rng.integers(len(PLAIN_ENTRY_STUBS)))]
    entry_off = int(rng.integers(0, (text_size - len(stub)) // 16)) * 16
    if entry_section:
        entry_off = 0
    pe32p = bool(rng.random() < 0.25)
    return SynthProfile(
        class_hint="plain", sections=tuple(secs), entry_section=entry_section, entry_offset=entry_off,
        entry_stub=stub, imports=_plain_imports(rng), n_resources=n_res,
        stack_reserve=stack, stack_commit=int(rng.choice([0x1000, 0x2000, 0x4000])),
        file_alignment=int(rng.choice([0x200, 0x200, 0x200, 0x1000])),
        image_base=0x140000000 if pe32p else int(rng.choice([0x400000, 0x10000000])),
        dll_characteristics=int(rng.choice([0x8140, 0x8160, 0x0140, 0x0000, 0x8100, 0x0540])),
        os_version=[(4, 0), (5, 1), (6, 0), (6, 1), (10, 0)][int(rng.integers(5))],
        checksum=int(rng.integers(0, 1 << 20)) if rng.random() < 0.5 else 0,
        timestamp=timestamp, pe32_plus=pe32p, text_spread=spread, family="plain",
    )


PACKED_FAMILIES = ("upx", "aspack", "mpress", "petite", "kkrunchy", "generic")


def _packer_imports(rng: np.random.Generator) -> tuple:
    core = ("LoadLibraryA", "GetProcAddress", "VirtualProtect", "VirtualAlloc", "VirtualFree", "ExitProcess")
    k32 = _pick(rng, core, int(rng.integers(2, len(core) + 1)))
    out = [("KERNEL32.DLL", k32)]
    for d in _pick(rng, ["USER32.dll", "ADVAPI32.dll", "msvcrt.dll", "GDI32.dll"], int(rng.integers(0, 4))):
        out.append((d, (PLAIN_DLLS[d][int(rng.integers(len(PLAIN_DLLS[d])))],)))
    return tuple(out)


def sample_packed(rng: np.random.Generator, timestamp: int, family: str | None = None) -> SynthProfile:
    """A randomized packed executable from one of :data:`PACKED_FAMILIES`
    (or the low-entropy ``stealth`` family used by the drift scenario)."""
    family = family or str(rng.choice(PACKED_FAMILIES))
    body = int(rng.integers(0x1000, 0x6000))
    n_res = int(rng.integers(0, 4))
    stub_i = PACKED_FAMILIES.index(family) if family in PACKED_FAMILIES else 5
    stub = PACKED_STUBS[stub_i]
    imports = _packer_imports(rng)
    res_payload = "random" if rng.random() < 0.7 else "text"
    if family == "upx":
        secs = (
            SectionPlan("UPX0", int(rng.integers(0x4000, 0x40000)), "zeros", "rwxcu", has_raw=False),
            SectionPlan("UPX1", body, "random", "rwxcd"),
            SectionPlan(".rsrc", 0, "zeros", "rwd", holds=("resources", "imports"), resource_payload=res_payload),
        )
        entry, off = 1, body - 0x200
    elif family == "aspack":
        stub_size = int(rng.integers(0x400, 0x1200))
        secs = (
            SectionPlan(".text", body, "random", "rwxc", virtual_size=body * int(rng.integers(2, 4))),
            SectionPlan(".data", int(rng.integers(0x200, 0x800)), "random", "rwd"),
            SectionPlan(".rsrc", 0, "zeros", "rwd", holds=("resources",), resource_payload=res_payload),
            SectionPlan(".aspack", stub_size, "text", "rwxc", holds=("imports",)),
            SectionPlan(".adata", 0x10, "zeros", "rwd"),
        )
        entry, off = 3, 0
    elif family == "mpress":
        secs = (
            SectionPlan(".MPRESS1", body, "random", "rwxc", virtual_size=body * 3),
            SectionPlan(".MPRESS2", int(rng.integers(0x400, 0xC00)), "text", "rwxc", holds=("imports",)),
            SectionPlan(".rsrc", 0, "zeros", "rd", holds=("resources",), resource_payload=res_payload),
        )
        entry, off = 1, 0
    elif family == "petite":
        secs = (
            SectionPlan(".petite", body, "random", "rwxc", holds=("imports",)),
            SectionPlan(".rsrc", 0, "zeros", "rwd", holds=("resources",), resource_payload=res_payload),
            SectionPlan("", int(rng.integers(0x10, 0x100)), "zeros", "rwd", virtual_size=0x2000),
        )
        entry, off = 0, int(rng.integers(0, body // 2 // 16)) * 16
    elif family == "kkrunchy":
        secs = (
            SectionPlan("", 0x1000, "zeros", "rwxcu", has_raw=False),
            SectionPlan("kkrunchy", body, "random", "rwxc", holds=("imports",)),
        )
        n_res = 0
        entry, off = 1, int(rng.integers(0, body // 2 // 16)) * 16
    elif family == "generic":
        names = [".%s%d" % ("".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), 3)), i) for i in range(3)]
        secs = (
            SectionPlan(names[0], body, "random", "rwxc", virtual_size=body + 0x1000),
            SectionPlan(names[1], int(rng.integers(0x200, 0x1000)), "random", "rwd"),
            SectionPlan(names[2], int(rng.integers(0x200, 0x800)), "zeros", "rwd", holds=("imports", "resources"),
                        resource_payload=res_payload),
        )
        entry, off = 0, int(rng.integers(0, body // 2 // 16)) * 16
    elif family == "stealth":
        # low-entropy crypter: standard-looking layout, RWX stub section
        text_size = int(rng.integers(0x800, 0x4000))
        secs = [
            SectionPlan(".text", text_size, "lowent", "rwxc", virtual_size=text_size * 2),
            SectionPlan(".rdata", int(rng.integers(0x100, 0x1000)), "strings", "rd", holds=("imports",)),
            SectionPlan(".data", int(rng.integers(0x80, 0x800)), "strings", "rwd"),
            SectionPlan(".init", int(rng.integers(0x200, 0x600)), "text", "rxc"),
        ]
        if n_res:
            secs.append(SectionPlan(".rsrc", 0, "zeros", "rd", holds=("resources",)))
        secs = tuple(secs)
        imports = _plain_imports(rng)
        stub = PLAIN_ENTRY_STUBS[int(rng.integers(len(PLAIN_ENTRY_STUBS)))]
        entry, off = 3, 0
    else:
        raise BadProfile(f"unknown packer family {family!r}")
    has_res = any("resources" in s.holds for s in secs)
    pe32p = bool(rng.random() < 0.15) and family != "kkrunchy"
    return SynthProfile(
        class_hint="packed", sections=secs, entry_section=entry, entry_offset=off, entry_stub=stub,
        imports=imports, n_resources=n_res if has_res else 0,
        stack_reserve=int(rng.choice([0x100000, 0x100000, 0x200000, 0x10000])),
        stack_commit=int(rng.choice([0x1000, 0x4000])),
        file_alignment=0x200,
        image_base=0x140000000 if pe32p else 0x400000,
        dll_characteristics=int(rng.choice([0x0000, 0x0000, 0x8100, 0x0040])),
        os_version=[(4, 0), (5, 0), (5, 1), (6, 0)][int(rng.integers(4))],
        checksum=0 if rng.random() < 0.8 else int(rng.integers(0, 1 << 20)),
        timestamp=timestamp, pe32_plus=pe32p, text_spread=float(rng.uniform(14, 30)), family=family,
    )


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _epoch(day: str) -> int:
    return int(datetime.fromisoformat(day).replace(tzinfo=timezone.utc).timestamp())


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    start: str
    end: str  # inclusive day
    n_plain: int
    n_packed: int
    family_weights: dict = field(default_factory=dict)
    plain_drift: float = 0.0

    @property
    def time_range(self) -> tuple[int, int]:
        return _epoch(self.start), _epoch(self.end) + 86399


def _sample_profile(spec: DatasetSpec, cls: str, rng: np.random.Generator) -> SynthProfile:
    lo, hi = spec.time_range
    ts = int(rng.integers(lo, hi + 1))
    if cls == "plain":
        return sample_plain(rng, ts, spec.plain_drift)
    fams = spec.family_weights or {f: 1.0 for f in PACKED_FAMILIES}
    names = list(fams)
    w = np.array([fams[f] for f in names], dtype=float)
    fam = names[int(rng.choice(len(names), p=w / w.sum()))]
    return sample_packed(rng, ts, fam)


def generate_dataset(spec: DatasetSpec, seed: int) -> list[SyntheticSample]:
    """Draw ``spec.n_plain`` plain and ``spec.n_packed`` packed samples.

    Sample ``i`` depends only on (seed, dataset name, i), so datasets can be
    regenerated piecemeal.
    """
    out = []
    tag = sum(spec.name.encode())
    classes = ["plain"] * spec.n_plain + ["packed"] * spec.n_packed
    for i, cls in enumerate(classes):
        rng = np.random.default_rng([seed, tag, i])
        prof = _sample_profile(spec, cls, rng)
        sample_seed = int(rng.integers(0, 2**31))
        data = synth_pe(prof, sample_seed)
        out.append(SyntheticSample(f"{spec.name}-{i:05d}", data, cls, prof.timestamp, prof.family, sample_seed))
    return out


def default_scenario(n_per_class: int = 1000) -> list[DatasetSpec]:
    return [DatasetSpec("default", "2019-10-01", "2020-02-28", n_per_class, n_per_class)]


def drift_scenario(n_train: int = 600, n_baseline: int = 200, n_period: int = 200) -> list[DatasetSpec]:
    """Training window, an in-distribution baseline, then four two-week periods
    in which a low-entropy packer family spreads and plain files gain newer
    toolchain quirks."""
    early = {"upx": 4.0, "aspack": 1.0, "mpress": 1.0, "petite": 1.0, "kkrunchy": 0.5, "generic": 1.5}
    h = n_train // 2
    hb = n_baseline // 2
    hp = n_period // 2
    specs = [
        DatasetSpec("train", "2019-10-01", "2020-02-28", h, n_train - h, early),
        DatasetSpec("baseline", "2019-10-01", "2020-02-28", hb, n_baseline - hb, early),
    ]
    periods = [("2020-04-01", "2020-04-14"), ("2020-04-15", "2020-04-28"),
               ("2020-04-29", "2020-05-12"), ("2020-05-13", "2020-05-26")]
    for k, (a, b) in enumerate(periods, start=1):
        stealth = 9.0 * [0.08, 0.2, 0.4, 0.65][k - 1] / (1 - [0.08, 0.2, 0.4, 0.65][k - 1])
        w = dict(early, stealth=stealth)
        specs.append(DatasetSpec(f"period{k}", a, b, hp, n_period - hp, w, plain_drift=0.25 * k))
    return specs


def hard_scenario(n: int = 2000) -> list[DatasetSpec]:
    return [DatasetSpec("hard", "2019-06-15", "2019-07-28", n // 2, n - n // 2)]


SCENARIOS = {"default": default_scenario, "drift": drift_scenario, "hard": hard_scenario}
VOTE_ERROR = {"default": 0.1, "drift": 0.1, "hard": 0.3}


def simulate_votes(sample: SyntheticSample, rng: np.random.Generator,
                   detectors: Sequence[str] = ("sig-a", "sig-b", "heur-a", "heur-b", "vendor"),
                   error_rate: float = 0.1):
    """Noisy detector verdicts around the generator's class hint."""
    from packscope.labeling import DetectorVote

    truth = sample.class_hint
    digest = _digest(sample.data)
    votes = []
    for d in detectors:
        r = rng.random()
        if r < 0.03:
            verdict = "abstain"
        elif r < 0.03 + error_rate:
            verdict = "not_packed" if truth == "packed" else "packed"
        else:
            verdict = "packed" if truth == "packed" else "not_packed"
        votes.append(DetectorVote(d, digest, verdict))
    return votes


def hard_dataset(n: int, seed: int, error_rate: float = 0.3) -> tuple[list[SyntheticSample], list[str]]:
    """Samples whose labels come from a majority vote of noisy detectors.

    The vote noise makes some labels disagree with the generating profile,
    so no classifier can be perfect on this set.
    """
    from packscope.labeling import majority_vote

    samples = generate_dataset(hard_scenario(n)[0], seed)
    rng = np.random.default_rng([seed, 99])
    labels = []
    for s in samples:
        gt = majority_vote(simulate_votes(s, rng, error_rate=error_rate))
        labels.append(gt.label)
    return samples, labels


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def iter_profiles_cues(samples: Iterable[SyntheticSample]):
    for s in samples:
        yield s, measure_cues(parse_pe(s.data))


def to_dataset(samples: Sequence[SyntheticSample], labels: Sequence[str] | None = None):
    """Parse and featurize samples; labels default to each sample's class hint."""
    from packscope.classifiers.data import Dataset
    from packscope.features import N_FEATURES, extract_all

    rows, digests = [], []
    for s in samples:
        v = extract_all(parse_pe(s.data), s.timestamp)
        rows.append(v.values)
        digests.append(v.sample_digest)
    names = labels if labels is not None else [s.class_hint for s in samples]
    y = [1 if str(n) == "packed" else 0 for n in names]
    ts = [s.timestamp for s in samples]
    matrix = np.vstack(rows) if rows else np.zeros((0, N_FEATURES))
    return Dataset(matrix, y, ts, tuple(digests), tuple(range(1, N_FEATURES + 1)))
