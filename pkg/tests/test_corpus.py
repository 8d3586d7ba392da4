import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packscope.corpus import (
    PACKED_FAMILIES, DatasetSpec, SectionPlan, drift_scenario, generate_dataset, hard_dataset, measure_cues,
    packed_profile, plain_profile, sample_packed, sample_plain, synth_pe, to_dataset,
)
from packscope.errors import BadProfile
from packscope.features import extract_all
from packscope.labeling import heuristic_detect
from packscope.pe import parse_pe


def test_default_profiles():
    pe = parse_pe(synth_pe(plain_profile(), 4))
    assert heuristic_detect(pe, extract_all(pe)).verdict == "not_packed"
    pe = parse_pe(synth_pe(packed_profile(), 4))
    v = extract_all(pe)
    assert v[30] >= 1 and v[48] >= 7.5


def test_determinism():
    assert synth_pe(plain_profile(), 9) == synth_pe(plain_profile(), 9)
    assert synth_pe(plain_profile(), 9) != synth_pe(plain_profile(), 10)


@pytest.mark.parametrize("bad", [
    dict(sections=()),
    dict(entry_section=9),
    dict(file_alignment=300),
    dict(class_hint="other"),
    dict(sections=(SectionPlan("averyverylongname", 0x100),)),
])
def test_bad_profiles(bad):
    with pytest.raises(BadProfile):
        synth_pe(plain_profile(**bad), 0)


def test_plain_profile_with_packer_cues_rejected():
    secs = (SectionPlan("UPX1", 0x1000, "random", "rwxc"),)
    with pytest.raises(BadProfile):
        synth_pe(plain_profile(sections=secs, imports=(), n_resources=0, entry_offset=0), 0)


@settings(max_examples=80)
@given(st.integers(0, 2**31 - 1), st.sampled_from(PACKED_FAMILIES + ("stealth",)))
def test_packed_families_show_three_cues(seed, family):
    rng = np.random.default_rng(seed)
    pe = parse_pe(synth_pe(sample_packed(rng, 1_580_000_000, family), seed))
    assert measure_cues(pe).count >= 3
    assert extract_all(pe).all_ok


@settings(max_examples=80)
@given(st.integers(0, 2**31 - 1), st.floats(0, 1))
def test_plain_cues(seed, drift):
    rng = np.random.default_rng(seed)
    pe = parse_pe(synth_pe(sample_plain(rng, 1_580_000_000, drift), seed))
    cues = measure_cues(pe)
    assert cues.count <= 1
    if drift == 0:
        assert cues.count == 0


def test_generate_dataset_shape_and_times():
    spec = DatasetSpec("x", "2020-04-01", "2020-04-14", 5, 7)
    samples = generate_dataset(spec, 1)
    assert [s.class_hint for s in samples] == ["plain"] * 5 + ["packed"] * 7
    lo, hi = spec.time_range
    assert all(lo <= s.timestamp <= hi for s in samples)
    again = generate_dataset(spec, 1)
    assert [s.data for s in again] == [s.data for s in samples]


def test_drift_scenario_layout():
    names = [s.name for s in drift_scenario()]
    assert names == ["train", "baseline", "period1", "period2", "period3", "period4"]
    specs = drift_scenario()
    for a, b in zip(specs[2:], specs[3:]):
        assert a.time_range[1] < b.time_range[0]
    assert specs[0].time_range[1] < specs[2].time_range[0]


def test_hard_dataset_has_label_noise():
    samples, labels = hard_dataset(200, 3)
    hints = ["packed" if s.class_hint == "packed" else "not_packed" for s in samples]
    disagree = sum(h != lab for h, lab in zip(hints, labels))
    assert 0 < disagree < 100


def test_hard_dataset_is_hard():
    from packscope.classifiers import cross_validate, preset
    samples, labels = hard_dataset(300, 4)
    accs, _ = cross_validate(preset("KNN"), to_dataset(samples, labels), 5, 0)
    assert 0.5 < np.mean(accs) < 1.0


def test_to_dataset(small_corpus, small_data):
    assert small_data.matrix.shape == (len(small_corpus), 119)
    assert small_data.labels.sum() == 200
