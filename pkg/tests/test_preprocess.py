import numpy as np
import pytest

from glove.container import (
    CHECKPOINT_MAGIC,
    WINDOWS_MAGIC,
    Container,
    fingerprint,
    read_container,
    write_container,
)
from glove.data import Recording
from glove.errors import ContainerFormatError, NotFitted
from glove.labels import ClassLabel
from glove.preprocess import (
    SequenceWindow,
    apply_scaler,
    fit_scaler,
    flatten_windows,
    load_windows,
    per_sequence_normalize,
    save_windows,
    segment,
)


def ramp_recording(n, label="A"):
    samples = np.repeat(np.arange(n, dtype=float)[:, None], 5, axis=1)
    return Recording(id="r", label=ClassLabel(label), samples=samples)


def window_of(columns, label="1"):
    return SequenceWindow(data=np.asarray(columns, dtype=float).T, label=ClassLabel(label), source_id="w")


def test_segment_drops_leading_remainder():
    windows = segment(ramp_recording(1028), 50)
    assert len(windows) == 20
    assert windows[0].data[0, 0] == 28.0
    assert windows[-1].data[-1, 0] == 1027.0
    assert all(w.w == 50 and w.label.symbol == "A" for w in windows)
    assert windows[3].source_id == "r#3"


def test_segment_edges():
    assert len(segment(ramp_recording(50), 50)) == 1
    assert segment(ramp_recording(50), 50)[0].data[0, 0] == 0.0
    assert segment(ramp_recording(49), 50) == []


def test_segment_count_property():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(1, 400))
        w = int(rng.integers(1, 120))
        recording = Recording("r", ClassLabel("1"), np.zeros((n, 5)))
        assert len(segment(recording, w)) == n // w


def test_per_sequence_normalize():
    win = window_of([[1, 2, 3], [5, 5, 5], [0, 1, 2], [2, 4, 6], [1, 1, 2]])
    out = per_sequence_normalize(win)
    assert np.allclose(out.data[:, 0], [-1.22474487, 0.0, 1.22474487])
    assert np.array_equal(out.data[:, 1], [0.0, 0.0, 0.0])
    again = per_sequence_normalize(out)
    assert np.allclose(again.data, out.data, atol=1e-9)
    assert out.label == win.label


def test_scaler_standardizes_fit_set(rng):
    windows = [
        SequenceWindow(rng.normal(3.0, 2.0, (10, 5)), ClassLabel("B"), f"w{i}") for i in range(20)
    ]
    params = fit_scaler(windows)
    transformed = apply_scaler(params, flatten_windows(windows))
    assert np.all(np.abs(transformed.mean(axis=0)) < 1e-9)


def test_scaler_hand_example_and_degenerate():
    a = SequenceWindow(np.full((1, 5), 1.0), ClassLabel("1"), "a")
    b = SequenceWindow(np.full((1, 5), 3.0), ClassLabel("1"), "b")
    params = fit_scaler([a, b])
    assert apply_scaler(params, a).tolist() == [-1.0] * 5
    assert apply_scaler(params, b).tolist() == [1.0] * 5
    single = fit_scaler([a])
    assert np.array_equal(apply_scaler(single, a), np.zeros(5))


def test_scaler_requires_fit():
    with pytest.raises(NotFitted):
        apply_scaler(None, np.zeros(5))


def test_window_cache_roundtrip(tmp_path, rng):
    windows = [
        SequenceWindow(rng.normal(size=(8, 5)), ClassLabel(s), f"rec/{i}#0")
        for i, s in enumerate("1A5F")
    ]
    path = save_windows(tmp_path / "w.gsw", windows, {"part": "train"})
    loaded = load_windows(path)
    assert [w.source_id for w in loaded] == [w.source_id for w in windows]
    assert [w.label for w in loaded] == [w.label for w in windows]
    assert all(np.array_equal(a.data, b.data) for a, b in zip(loaded, windows))
    assert read_container(path, WINDOWS_MAGIC).metadata["part"] == "train"


def test_container_rejects_wrong_magic(tmp_path):
    path = write_container(
        tmp_path / "x.bin",
        Container(magic=WINDOWS_MAGIC, fingerprint=fingerprint("x"), tensors={"a": np.ones(3)}),
    )
    with pytest.raises(ContainerFormatError):
        read_container(path, CHECKPOINT_MAGIC)
    path.write_bytes(path.read_bytes()[:20])
    with pytest.raises(ContainerFormatError):
        read_container(path)
