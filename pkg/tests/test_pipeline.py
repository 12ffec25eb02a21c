import numpy as np
import pytest

from glove.config import load_run_config
from glove.errors import DataError, MissingArtifact, StaleArtifact
from glove.pipeline import (
    ABLATION_COLUMNS,
    Pipeline,
    ablation_summary,
    path_digest,
    run_ablation,
)
from glove.synth import generate_corpus

TINY = [
    "synth.recordings_per_class=3",
    "synth.min_length=120",
    "synth.max_length=160",
    "window.size=56",
    "augment.variants_per_sample=1",
    "train.max_epochs=2",
    "train.early_stop_patience=2",
    "simplenn.max_epochs=3",
    "simplenn.early_stop_patience=3",
    "knn.cv_folds=3",
]


def tiny_config(*extra):
    return load_run_config(None, TINY + list(extra))


@pytest.fixture
def windowed(tmp_path):
    pipeline = Pipeline(tmp_path / "run", tiny_config())
    pipeline.synth()
    pipeline.split()
    pipeline.segment()
    pipeline.augment()
    return pipeline


def test_stage_chain_counts(windowed):
    split = windowed.require("split").summary
    assert (split["train"], split["val"], split["test"]) == (11, 11, 11)
    segment = windowed.require("segment").summary
    augment = windowed.require("augment").summary
    assert segment["window"] == 56
    assert augment["train"] == 2 * segment["train"]
    assert augment["val"] == 2 * segment["val"]
    assert augment["test"] == segment["test"]


def test_multibranch_train_evaluate_report(windowed):
    mfcc = windowed.mfcc(dump=True)
    assert mfcc.summary["shapes"]["test"][1:] == [5, 4, 12]
    assert (mfcc.directory / "blocks" / "test" / "00000.mfc").exists()
    trained = windowed.train("multibranch")
    assert trained.summary["epochs"] <= 2
    evaluated = windowed.evaluate()
    assert evaluated.summary["model"] == "multibranch"
    assert 0.0 <= evaluated.summary["accuracy"] <= 1.0
    assert (evaluated.directory / "predictions.csv").exists()
    report = windowed.report()
    names = report.summary["figures"]
    assert "confusion.svg" in names and "training_curves.svg" in names


def test_knn_pipeline(windowed):
    trained = windowed.train("knn")
    assert len(trained.summary["cv_accuracies"]) == 3
    evaluated = windowed.evaluate()
    assert evaluated.summary["model"] == "knn"
    figures = windowed.report().summary["figures"]
    assert "training_curves.svg" not in figures


def test_simplenn_training_is_reproducible(windowed):
    first = windowed.train("simplenn")
    history = (first.directory / "history.csv").read_bytes()
    checkpoint = (first.directory / "checkpoint.gsc").read_bytes()
    second = windowed.train("simplenn")
    assert (second.directory / "history.csv").read_bytes() == history
    assert (second.directory / "checkpoint.gsc").read_bytes() == checkpoint


def test_stale_and_missing_artifacts(windowed, tmp_path):
    changed = Pipeline(windowed.run_dir, tiny_config("window.size=64"))
    with pytest.raises(StaleArtifact):
        changed.augment()
    # sections after the split do not invalidate it
    changed.segment()

    with pytest.raises(MissingArtifact):
        Pipeline(tmp_path / "empty", tiny_config()).segment()

    train_file = windowed.stage_dir("augment") / "train.gsw"
    train_file.write_bytes(train_file.read_bytes() + b"\0")
    with pytest.raises(StaleArtifact):
        windowed.mfcc()


def test_corpus_change_after_split_is_detected(tmp_path):
    pipeline = Pipeline(tmp_path / "run", tiny_config())
    pipeline.synth()
    pipeline.split()
    corpus = pipeline.stage_dir("synth") / "corpus"
    before = path_digest(corpus)
    first = sorted(corpus.rglob("*.csv"))[0]
    first.write_text(first.read_text(encoding="utf-8") + "0.5,0.5,0.5,0.5,0.5\n", encoding="utf-8")
    assert path_digest(corpus) != before
    with pytest.raises(StaleArtifact):
        pipeline.segment()


def test_window_larger_than_every_recording(tmp_path):
    pipeline = Pipeline(tmp_path / "run", tiny_config("window.size=500"))
    pipeline.synth()
    pipeline.split()
    with pytest.raises(DataError):
        pipeline.segment()


def test_ablation_chunks_shrink_with_window():
    cfg = tiny_config(
        "synth.recordings_per_class=4",
        "synth.min_length=160",
        "synth.max_length=200",
        "augment.variants_per_sample=2",
    )
    recordings = generate_corpus(cfg.synth, seed=3)
    table = run_ablation(recordings, cfg, windows=[40, 80], model="knn", seeds=2)
    assert list(table.columns) == ABLATION_COLUMNS
    assert len(table) == 4
    summary = ablation_summary(table)
    assert summary["window"].tolist() == [40, 80]
    chunks = summary["chunks"].to_numpy()
    assert chunks[0] > chunks[1]
    assert np.all(table["accuracy"].between(0.0, 1.0))
    assert set(table["epochs"]) == {0}
    # seeds are derived per repetition, not per window
    by_window = table.groupby("window")["seed"].apply(list)
    assert by_window[40] == by_window[80]


def test_ablation_rejects_too_few_frames_for_multibranch():
    cfg = tiny_config("synth.recordings_per_class=3")
    recordings = generate_corpus(cfg.synth, seed=1)
    with pytest.raises(DataError):
        run_ablation(recordings, cfg, windows=[50], model="multibranch", seeds=1)


@pytest.mark.slow
def test_shorter_windows_give_more_chunks_and_no_worse_accuracy():
    cfg = load_run_config(None, [])
    recordings = generate_corpus(cfg.synth, seed=cfg.seed)
    table = run_ablation(recordings, cfg, windows=[50, 100], model="simplenn", seeds=3)
    summary = ablation_summary(table).set_index("window")
    assert 1.9 <= summary.loc[50, "chunks"] / summary.loc[100, "chunks"] <= 2.3
    assert summary.loc[50, "accuracy"] >= summary.loc[100, "accuracy"]
