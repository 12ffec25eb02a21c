import numpy as np
import pytest

from glove.config import SplitSpec
from glove.data import (
    Recording,
    class_counts,
    discover_corpus,
    load_corpus,
    load_recording,
    quality_filter,
    stratified_split,
    write_recording,
)
from glove.errors import (
    AllRowsRemoved,
    EmptyFile,
    InsufficientClassData,
    MalformedRow,
    TooFewColumns,
    UnknownLabel,
)
from glove.labels import SYMBOLS, ClassLabel, labels_from_indices, resolve_label


def write_csv(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def build_recordings(per_class, symbols=SYMBOLS, frames=10):
    rng = np.random.default_rng(0)
    return [
        Recording(id=f"{s}/{i}", label=ClassLabel(s), samples=rng.uniform(0.1, 1.0, (frames, 5)))
        for s in symbols
        for i in range(per_class)
    ]


def test_load_three_rows(tmp_path):
    path = write_csv(
        tmp_path / "r.csv",
        "0.1,0.2,0.3,0.4,0.5\n0.2,0.3,0.4,0.5,0.6\n0.3,0.4,0.5,0.6,0.7\n",
    )
    recording = load_recording(path, ClassLabel("A"))
    assert recording.n_frames == 3
    assert recording.samples[0].tolist() == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert not recording.had_header


def test_header_skipped_and_extra_columns_ignored(tmp_path):
    path = write_csv(
        tmp_path / "r.csv",
        "thumb,index,middle,ring,little,ts\n1,2,3,4,5,99\n6,7,8,9,10,100\n",
    )
    recording = load_recording(path, ClassLabel("1"))
    assert recording.had_header
    assert recording.samples.tolist() == [[1, 2, 3, 4, 5], [6, 7, 8, 9, 10]]


def test_malformed_row_names_row_index(tmp_path):
    path = write_csv(tmp_path / "r.csv", "1,2,3,4,5\na,b,c,d,e\n")
    with pytest.raises(MalformedRow) as excinfo:
        load_recording(path, ClassLabel("1"))
    assert excinfo.value.row_index == 1


def test_blank_cell_is_malformed_not_short(tmp_path):
    path = write_csv(tmp_path / "r.csv", "1,2,3,4,5\n1,,3,4,5\n")
    with pytest.raises(MalformedRow) as excinfo:
        load_recording(path, ClassLabel("1"))
    assert excinfo.value.row_index == 1
    assert excinfo.value.line == 2


def test_short_row_and_empty_file(tmp_path):
    with pytest.raises(TooFewColumns):
        load_recording(write_csv(tmp_path / "a.csv", "1,2,3,4,5\n1,2,3\n"), ClassLabel("1"))
    with pytest.raises(EmptyFile):
        load_recording(write_csv(tmp_path / "b.csv", ""), ClassLabel("1"))


def test_write_then_load_is_bit_exact(tmp_path):
    original = build_recordings(1, symbols=("C",))[0]
    loaded = load_recording(write_recording(original, tmp_path / "c.csv"), ClassLabel("C"))
    assert np.array_equal(loaded.samples, original.samples)


def test_quality_filter_rule():
    samples = np.array(
        [[0, 0, 0, 0, 0.2], [0, 0, 0, 1.1, 0.2]] + [[0.5] * 5] * 8,
        dtype=float,
    )
    samples[5] = [0, 0, 0, 0, 0]
    filtered = quality_filter(Recording("r", ClassLabel("1"), samples))
    assert filtered.n_frames == 8
    assert filtered.qc_removed == 2
    assert filtered.samples[0].tolist() == [0, 0, 0, 1.1, 0.2]


def test_quality_filter_everything_removed():
    with pytest.raises(AllRowsRemoved):
        quality_filter(Recording("r", ClassLabel("1"), np.zeros((4, 5))))


def test_split_counts_and_partition():
    recordings = build_recordings(20, symbols=("A",))
    train, val, test = stratified_split(recordings, SplitSpec(), seed=3)
    assert (len(train), len(val), len(test)) == (14, 3, 3)
    ids = [r.id for r in train + val + test]
    assert sorted(ids) == sorted(r.id for r in recordings)
    assert len(set(ids)) == len(ids)


def test_split_deterministic_and_seed_sensitive():
    recordings = build_recordings(20)
    first = stratified_split(recordings, SplitSpec(), seed=1)
    second = stratified_split(recordings, SplitSpec(), seed=1)
    other = stratified_split(recordings, SplitSpec(), seed=2)
    assert [[r.id for r in part] for part in first] == [[r.id for r in part] for part in second]
    assert [r.id for r in first[0]] != [r.id for r in other[0]]
    assert [len(p) for p in first] == [len(p) for p in other]


def test_every_class_in_every_split():
    train, val, test = stratified_split(build_recordings(3), SplitSpec(), seed=0)
    for part in (train, val, test):
        assert all(count == 1 for count in class_counts(part))


def test_split_needs_three_per_class():
    with pytest.raises(InsufficientClassData):
        stratified_split(build_recordings(2), SplitSpec())


def test_label_aliases():
    assert resolve_label("digit_1").symbol == "1"
    assert resolve_label("Letter-A").symbol == "A"
    assert resolve_label("sign_f").symbol == "F"
    assert resolve_label("three").symbol == "3"
    assert [label.symbol for label in labels_from_indices(np.array([0, 4, 10]))] == ["1", "5", "F"]
    with pytest.raises(UnknownLabel):
        resolve_label("zebra")
    with pytest.raises(UnknownLabel):
        ClassLabel("Z")


def test_corpus_from_directories_with_qc(tmp_path):
    write_csv(tmp_path / "digit_1" / "a.csv", "1,1,1,1,1\n0,0,0,0,1\n2,2,2,2,2\n")
    write_csv(tmp_path / "letter_b" / "b.csv", "0,0,0,0,0\n")
    write_csv(tmp_path / "letter_b" / "c.csv", "1,2,3,4,5\n")
    entries = discover_corpus(tmp_path)
    assert [label.symbol for _, label in entries] == ["1", "B", "B"]
    recordings, summary = load_corpus(tmp_path)
    assert [r.id for r in recordings] == ["digit_1/a", "letter_b/c"]
    assert summary.rows_removed == {"digit_1/a": 1}
    assert summary.dropped == ["letter_b/b"]


def test_manifest_wins_over_directory_names(tmp_path):
    write_csv(tmp_path / "misc" / "x.csv", "1,2,3,4,5\n")
    write_csv(tmp_path / "manifest.csv", "misc/x.csv,letter_d\n")
    recordings, _ = load_corpus(tmp_path)
    assert recordings[0].label.symbol == "D"
