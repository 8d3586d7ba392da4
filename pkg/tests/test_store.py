import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from packscope.errors import CorruptRow, FormatVersionMismatch
from packscope.features import N_FEATURES
from packscope.store import (
    FeatureStore, ManifestRecord, StoreRow, dumps_store, load_store, loads_store, parse_time_range,
    read_manifest, save_store, write_manifest,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def stores(draw):
    n = draw(st.integers(0, 5))
    rows = []
    for i in range(n):
        vals = draw(arrays(np.float64, N_FEATURES, elements=finite))
        rows.append(StoreRow(f"{i:064x}", draw(st.floats(0, 2e9)), draw(st.sampled_from([None, 0, 1])), vals))
    return FeatureStore(rows)


@settings(max_examples=50)
@given(stores())
def test_roundtrip_bit_exact(store):
    back = loads_store(dumps_store(store))
    assert back.rows == store.rows
    assert dumps_store(back) == dumps_store(store)


def test_file_roundtrip(tmp_path, small_corpus):
    from packscope.features import extract_all
    from packscope.pe import parse_pe
    vecs = [extract_all(parse_pe(s.data), s.timestamp) for s in small_corpus[:10]]
    store = FeatureStore.from_vectors(vecs, [0] * 10)
    save_store(store, tmp_path / "s.csv")
    back = load_store(tmp_path / "s.csv")
    assert back.rows == store.rows
    np.testing.assert_array_equal(back.matrix(), np.vstack([v.values for v in vecs]))
    assert back.vector(0).values.tolist() == vecs[0].values.tolist()


def _row(d="a", ts=0.0, lab=1):
    return StoreRow(d, ts, lab, np.zeros(N_FEATURES))


def test_version_mismatch():
    text = dumps_store(FeatureStore([_row()]))
    with pytest.raises(FormatVersionMismatch):
        loads_store(text.replace("v1", "v2", 1))


def test_corrupt_rows():
    text = dumps_store(FeatureStore([_row("a"), _row("b")]))
    lines = text.splitlines()
    bad = lines[:3] + [lines[3].replace(",0,", ",x,", 1)]
    with pytest.raises(CorruptRow) as exc:
        loads_store("\n".join(bad) + "\n")
    assert exc.value.line == 4
    with pytest.raises(CorruptRow):
        loads_store("\n".join(lines[:3] + [lines[2]]) + "\n")  # duplicate digest
    with pytest.raises(CorruptRow):
        loads_store("\n".join(lines[:3] + [lines[3] + ",1"]) + "\n")
    with pytest.raises(CorruptRow):
        loads_store("\n".join(lines[:2] + [lines[2].replace(",0,", ",nan,", 1)]) + "\n")
    r = _row()
    r.values[3] = np.inf
    with pytest.raises(CorruptRow):
        dumps_store(FeatureStore([r]))


def test_query_inclusive_end_day():
    lo, hi = parse_time_range("2020-04-01..2020-04-14")
    rows = [_row("a", lo), _row("b", hi), _row("c", hi + 1), _row("d", lo - 1)]
    got = FeatureStore(rows).query("2020-04-01..2020-04-14")
    assert got.digests() == ["a", "b"]
    with pytest.raises(ValueError):
        parse_time_range("2020-04-02..2020-04-01")


def test_atomic_write_leaves_no_partial(tmp_path):
    r = _row()
    r.values[0] = np.nan
    path = tmp_path / "s.csv"
    with pytest.raises(CorruptRow):
        save_store(FeatureStore([r]), path)
    assert not path.exists()
    assert list(tmp_path.iterdir()) == []


def test_unlabeled_rows():
    with pytest.raises(ValueError):
        FeatureStore([_row(lab=None)]).labels()


def test_manifest_roundtrip(tmp_path):
    recs = [ManifestRecord("train", 3, {"upx": 1.0}, "2019-10-01", "2020-02-28", 10, {"n_plain": 5})]
    write_manifest(recs, tmp_path / "m.jsonl")
    back = read_manifest(tmp_path / "m.jsonl")
    assert back == recs
    assert back[0].time_range == "2019-10-01..2020-02-28"
