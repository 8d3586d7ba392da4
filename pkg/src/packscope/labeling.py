"""Ground truth by detector majority vote, plus a built-in heuristic detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from packscope.corpus import PACKER_SECTION_NAMES
from packscope.errors import CorruptRow, DuplicateVote, NoVotes
from packscope.features import FeatureVector, shannon_entropy
from packscope.pe import PeFile

PACKED = "packed"
NOT_PACKED = "not_packed"
ABSTAIN = "abstain"
VERDICTS = (PACKED, NOT_PACKED, ABSTAIN)

HEURISTIC_NAME = "heuristic"
ENTROPY_CUTOFF = 7.0
RULES_TO_FIRE = 2


@dataclass(frozen=True)
class DetectorVote:
    detector_name: str
    sample_digest: str
    verdict: str

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")


@dataclass(frozen=True)
class GroundTruth:
    sample_digest: str
    label: str
    votes_for: int
    votes_total: int
    threshold: int

    @property
    def is_packed(self) -> bool:
        return self.label == PACKED


def default_threshold(n_voting: int) -> int:
    """Strict-majority-or-half: 3 of 5, 2 of 4, 2 of 3."""
    return max(1, math.ceil(n_voting / 2))


def majority_vote(votes, threshold: int | None = None) -> GroundTruth:
    votes = list(votes)
    seen = set()
    for v in votes:
        if v.detector_name in seen:
            raise DuplicateVote(f"detector {v.detector_name!r} voted twice")
        seen.add(v.detector_name)
    digests = {v.sample_digest for v in votes}
    if len(digests) > 1:
        raise ValueError("votes refer to more than one sample")
    cast = [v for v in votes if v.verdict != ABSTAIN]
    if not cast:
        raise NoVotes("every detector abstained")
    if threshold is None:
        threshold = default_threshold(len(cast))
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    n_packed = sum(v.verdict == PACKED for v in cast)
    label = PACKED if n_packed >= threshold else NOT_PACKED
    return GroundTruth(cast[0].sample_digest, label, n_packed, len(cast), threshold)


@dataclass(frozen=True)
class HeuristicConfig:
    packer_names: frozenset = PACKER_SECTION_NAMES
    entropy_cutoff: float = ENTROPY_CUTOFF
    rules_to_fire: int = RULES_TO_FIRE


def heuristic_rules(pe: PeFile, v: FeatureVector, config: HeuristicConfig = HeuristicConfig()) -> dict[str, bool]:
    entry = pe.section_at(pe.entry_point)
    # feature 48 is the entry-section entropy; recompute if the vector lacks it
    ent = v[48] if v[48] >= 0 else (shannon_entropy(pe.section_bytes(entry)) if entry else -1.0)
    return {
        "packer_section_name": any(s.name in config.packer_names for s in pe.sections),
        "writable_executable": v[27] >= 1 or v[30] >= 1,
        "entry_not_standard": v[35] == 1,
        "entry_high_entropy": ent >= config.entropy_cutoff,
        "virtual_exceeds_raw": v[39] >= 1,
    }


def heuristic_detect(pe: PeFile, v: FeatureVector, config: HeuristicConfig = HeuristicConfig()) -> DetectorVote:
    fired = sum(heuristic_rules(pe, v, config).values())
    verdict = PACKED if fired >= config.rules_to_fire else NOT_PACKED
    return DetectorVote(HEURISTIC_NAME, v.sample_digest, verdict)


def write_votes(votes, path) -> None:
    from packscope.store import _write_atomic

    lines = []
    for v in votes:
        for cell in (v.detector_name, v.sample_digest):
            if "\t" in cell or "\n" in cell:
                raise ValueError("vote fields may not contain tabs or newlines")
        lines.append(f"{v.detector_name}\t{v.sample_digest}\t{v.verdict}\n")
    _write_atomic(Path(path), "".join(lines))


def read_votes(path) -> list[DetectorVote]:
    out, seen = [], set()
    text = Path(path).read_text(encoding="utf-8")
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != 3 or cells[2] not in VERDICTS:
            raise CorruptRow(n, "expected detector<TAB>digest<TAB>verdict")
        key = (cells[0], cells[1])
        if key in seen:
            raise DuplicateVote(f"line {n}: second vote by {cells[0]!r} for {cells[1]}")
        seen.add(key)
        out.append(DetectorVote(*cells))
    return out


def group_votes(votes) -> dict[str, list[DetectorVote]]:
    by_sample: dict[str, list[DetectorVote]] = {}
    for v in votes:
        by_sample.setdefault(v.sample_digest, []).append(v)
    return by_sample
