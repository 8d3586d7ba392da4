"""The 119 static packing features.

Feature ids are 1-based throughout the package, so ``vector.values[fid - 1]``
holds feature ``fid``. Extraction never raises once a file has parsed: when a
value cannot be computed it falls back to 0 and the feature's status is set to
``DEFAULTED``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from packscope.errors import UnmappedRva
from packscope.pe import PeFile, SectionInfo, entry_bytes

N_FEATURES = 119
ENTRY_BYTE_COUNT = 64
ABSENT = -1.0

STANDARD_SECTIONS = frozenset({
    ".text", ".code", ".data", ".rdata", ".bss", ".idata", ".edata",
    ".rsrc", ".reloc", ".tls", ".debug",
})

MALICIOUS_APIS = (
    "GetProcAddress", "LoadLibraryA", "LoadLibrary", "ExitProcess",
    "GetModuleHandleA", "VirtualAlloc", "VirtualFree", "GetModuleFileNameA",
    "CreateFileA", "RegQueryValueExA", "MessageBoxA", "GetCommandLineA",
    "VirtualProtect", "GetStartupInfoA", "GetStdHandle", "RegOpenKeyExA",
)

# features 1..8, in order
DLL_CHARACTERISTIC_BITS = (0x0040, 0x0080, 0x0100, 0x0200, 0x0400, 0x0800, 0x2000, 0x8000)


class Status(IntEnum):
    OK = 0
    DEFAULTED = 1


class Category:
    METADATA = "Metadata"
    SECTION = "Section"
    ENTROPY = "Entropy"
    ENTRY_BYTES = "EntryBytes"
    IMPORTS = "Imports"
    RESOURCE = "Resource"


@dataclass(frozen=True)
class FeatureSpec:
    id: int
    category: str
    description: str
    kind: str  # "bool", "int", "float", "entropy", "byte"


def _catalog() -> tuple[FeatureSpec, ...]:
    rows: list[tuple[str, str, str]] = [
        (Category.METADATA, "dll characteristics: dynamic base", "bool"),
        (Category.METADATA, "dll characteristics: force integrity", "bool"),
        (Category.METADATA, "dll characteristics: NX compatible", "bool"),
        (Category.METADATA, "dll characteristics: no isolation", "bool"),
        (Category.METADATA, "dll characteristics: no SEH", "bool"),
        (Category.METADATA, "dll characteristics: no bind", "bool"),
        (Category.METADATA, "dll characteristics: WDM driver", "bool"),
        (Category.METADATA, "dll characteristics: terminal server aware", "bool"),
        (Category.METADATA, "header checksum field", "int"),
        (Category.METADATA, "image base", "int"),
        (Category.METADATA, "base of code RVA", "int"),
        (Category.METADATA, "major OS version", "int"),
        (Category.METADATA, "minor OS version", "int"),
        (Category.METADATA, "size of image", "int"),
        (Category.METADATA, "size of code", "int"),
        (Category.METADATA, "size of headers", "int"),
        (Category.METADATA, "size of initialized data", "int"),
        (Category.METADATA, "size of uninitialized data", "int"),
        (Category.METADATA, "stack reserve size", "int"),
        (Category.METADATA, "stack commit size", "int"),
        (Category.METADATA, "section alignment", "int"),
        (Category.SECTION, "standard section count", "int"),
        (Category.SECTION, "non-standard section count", "int"),
        (Category.SECTION, "standard / all sections", "float"),
        (Category.SECTION, "executable section count", "int"),
        (Category.SECTION, "writable section count", "int"),
        (Category.SECTION, "writable+executable section count", "int"),
        (Category.SECTION, "readable+executable section count", "int"),
        (Category.SECTION, "readable+writable section count", "int"),
        (Category.SECTION, "readable+writable+executable section count", "int"),
        (Category.SECTION, "a code section is not executable", "bool"),
        (Category.SECTION, "an executable section is not a code section", "bool"),
        (Category.SECTION, "no code section", "bool"),
        (Category.SECTION, "entry point outside code sections", "bool"),
        (Category.SECTION, "entry point outside standard sections", "bool"),
        (Category.SECTION, "entry point outside executable sections", "bool"),
        (Category.SECTION, "raw / virtual size of the entry section", "float"),
        (Category.SECTION, "sections with zero raw size", "int"),
        (Category.SECTION, "sections with virtual size > raw size", "int"),
        (Category.SECTION, "max raw / virtual size over sections", "float"),
        (Category.SECTION, "min raw / virtual size over sections", "float"),
        (Category.SECTION, "raw pointer not file-aligned", "bool"),
        (Category.ENTROPY, "entropy of code sections", "entropy"),
        (Category.ENTROPY, "entropy of data sections", "entropy"),
        (Category.ENTROPY, "entropy of resource section", "entropy"),
        (Category.ENTROPY, "entropy of headers", "entropy"),
        (Category.ENTROPY, "entropy of whole file", "entropy"),
        (Category.ENTROPY, "entropy of entry section", "entropy"),
    ]
    rows += [(Category.ENTRY_BYTES, f"entry point byte {i}", "byte") for i in range(ENTRY_BYTE_COUNT)]
    rows += [
        (Category.IMPORTS, "imported DLL count", "int"),
        (Category.IMPORTS, "imported function count (IDT)", "int"),
        (Category.IMPORTS, "suspicious API import count", "int"),
        (Category.IMPORTS, "suspicious / all imported functions", "float"),
        (Category.IMPORTS, "IAT entry count", "int"),
        (Category.RESOURCE, "debug directory present", "bool"),
        (Category.RESOURCE, "resource count", "int"),
    ]
    assert len(rows) == N_FEATURES
    return tuple(FeatureSpec(i + 1, c, d, k) for i, (c, d, k) in enumerate(rows))


CATALOG: tuple[FeatureSpec, ...] = _catalog()


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    status: np.ndarray
    sample_digest: str = ""
    timestamp: float = 0.0

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,) or self.status.shape != (N_FEATURES,):
            raise ValueError("feature vectors hold exactly 119 values")

    def __getitem__(self, fid: int) -> float:
        return float(self.values[fid - 1])

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.status == Status.OK))

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (np.array_equal(self.values, other.values) and np.array_equal(self.status, other.status)
                and self.sample_digest == other.sample_digest and self.timestamp == other.timestamp)

    __hash__ = None


def shannon_entropy(data: bytes) -> float:
    """Byte-level Shannon entropy in bits, 0 for empty input."""
    if not data:
        return 0.0
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / len(data)
    h = float(-(p * np.log2(p)).sum())
    return max(0.0, h)


def is_standard(section: SectionInfo, standard=STANDARD_SECTIONS) -> bool:
    return section.name in standard


def is_code(section: SectionInfo) -> bool:
    return section.has_code_flag or section.name == ".text"


def is_resource(pe: PeFile, section: SectionInfo) -> bool:
    rva, size = pe.optional_header.directory(2)
    return section.name == ".rsrc" or (size > 0 and section.contains_rva(rva))


def is_data(pe: PeFile, section: SectionInfo) -> bool:
    return (section.has_initialized_data and not is_code(section) and not section.executable
            and not is_resource(pe, section))


def _ratio(section: SectionInfo) -> float | None:
    if section.virtual_size == 0:
        return None
    return section.size_of_raw_data / section.virtual_size


def extract_metadata(pe: PeFile) -> np.ndarray:
    """Features 1-21."""
    oh = pe.optional_header
    bits = [1.0 if oh.dll_characteristics & b else 0.0 for b in DLL_CHARACTERISTIC_BITS]
    rest = [
        oh.checksum, oh.image_base, oh.base_of_code, oh.major_os_version, oh.minor_os_version,
        oh.size_of_image, oh.size_of_code, oh.size_of_headers, oh.size_of_initialized_data,
        oh.size_of_uninitialized_data, oh.size_of_stack_reserve, oh.size_of_stack_commit,
        oh.section_alignment,
    ]
    return np.array(bits + [float(v) for v in rest])


def extract_section_features(pe: PeFile, standard=STANDARD_SECTIONS) -> np.ndarray:
    """Features 22-42."""
    secs = pe.sections
    n_std = sum(is_standard(s, standard) for s in secs)
    n_other = len(secs) - n_std
    ratio_std = n_std / len(secs) if secs else 0.0

    def count(pred):
        return float(sum(1 for s in secs if pred(s)))

    f25 = count(lambda s: s.executable)
    f26 = count(lambda s: s.writable)
    f27 = count(lambda s: s.writable and s.executable)
    f28 = count(lambda s: s.readable and s.executable)
    f29 = count(lambda s: s.readable and s.writable)
    f30 = count(lambda s: s.readable and s.writable and s.executable)

    code = [s for s in secs if is_code(s)]
    f31 = float(any(not s.executable for s in code))
    f32 = float(any(s.executable and not is_code(s) for s in secs))
    f33 = float(not code)
    entry = pe.section_at(pe.entry_point)
    f34 = float(entry is None or not is_code(entry))
    f35 = float(entry is None or not is_standard(entry, standard))
    f36 = float(entry is None or not entry.executable)
    f37 = (_ratio(entry) or 0.0) if entry is not None else 0.0
    f38 = count(lambda s: s.size_of_raw_data == 0)
    f39 = count(lambda s: s.virtual_size > s.size_of_raw_data)
    ratios = [r for r in map(_ratio, secs) if r is not None]
    f40 = max(ratios) if ratios else 0.0
    f41 = min(ratios) if ratios else 0.0
    fa = pe.optional_header.file_alignment
    f42 = float(fa > 0 and any(s.pointer_to_raw_data % fa for s in secs))
    return np.array([n_std, n_other, ratio_std, f25, f26, f27, f28, f29, f30, f31, f32, f33,
                     f34, f35, f36, f37, f38, f39, f40, f41, f42], dtype=float)


def extract_entropy_features(pe: PeFile) -> np.ndarray:
    """Features 43-48; -1 marks an absent region."""

    def group(pred) -> float:
        chosen = [s for s in pe.sections if pred(s)]
        if not chosen:
            return ABSENT
        return shannon_entropy(b"".join(pe.section_bytes(s) for s in chosen))

    entry = pe.section_at(pe.entry_point)
    return np.array([
        group(is_code),
        group(lambda s: is_data(pe, s)),
        group(lambda s: is_resource(pe, s)),
        shannon_entropy(pe.raw[:pe.optional_header.size_of_headers]),
        shannon_entropy(pe.raw),
        shannon_entropy(pe.section_bytes(entry)) if entry is not None else ABSENT,
    ])


def extract_entry_import_resource(pe: PeFile) -> tuple[np.ndarray, np.ndarray]:
    """Features 49-119 plus their status flags."""
    values = np.zeros(71)
    status = np.full(71, Status.OK, dtype=np.int8)
    try:
        data, _ = entry_bytes(pe, ENTRY_BYTE_COUNT)
        values[:64] = np.frombuffer(data, dtype=np.uint8)
    except UnmappedRva:
        status[:64] = Status.DEFAULTED

    imp = pe.import_table
    names = imp.imported_function_names
    suspicious = sum(1 for n in names if n in MALICIOUS_APIS)
    values[64] = len(imp.dll_names)
    values[65] = imp.function_count
    values[66] = suspicious
    values[67] = suspicious / imp.function_count if imp.function_count else 0.0
    values[68] = imp.iat_entry_count
    if imp.damaged:
        status[64:69] = Status.DEFAULTED
    values[69] = float(pe.debug_directory_present)
    values[70] = pe.resource_count
    if pe.resources_damaged:
        status[70] = Status.DEFAULTED
    return values, status


def extract_all(pe: PeFile, timestamp: float | None = None) -> FeatureVector:
    """All 119 features. ``timestamp`` defaults to the COFF time stamp."""
    tail, tail_status = extract_entry_import_resource(pe)
    values = np.concatenate([
        extract_metadata(pe), extract_section_features(pe), extract_entropy_features(pe), tail,
    ])
    status = np.concatenate([np.zeros(48, dtype=np.int8), tail_status])
    if timestamp is None:
        timestamp = float(pe.coff_header.time_date_stamp)
    return FeatureVector(values, status, hashlib.sha256(pe.raw).hexdigest(), float(timestamp))
