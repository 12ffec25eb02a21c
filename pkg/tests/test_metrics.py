import numpy as np
import pytest

from glove.errors import EmptyMatrix, LengthMismatch
from glove.labels import ClassLabel
from glove.metrics import (
    ConfusionMatrix,
    MetricsReport,
    classification_report_text,
    confusion,
    metrics,
)


def tally(true, predicted, n):
    counts = [[0] * n for _ in range(n)]
    for t, p in zip(true, predicted):
        counts[t][p] += 1
    return counts


def test_two_class_example():
    true = [0] * 10 + [1] * 10
    predicted = [0] * 8 + [1] * 2 + [0] * 3 + [1] * 7
    cm = confusion(true, predicted, n_classes=2)
    assert cm.to_list() == [[8, 2], [3, 7]]
    report = metrics(cm)
    assert report.accuracy == pytest.approx(0.75)
    assert report.per_class[0].precision == pytest.approx(8 / 11)
    assert report.per_class[0].recall == pytest.approx(0.8)
    assert report.per_class[1].precision == pytest.approx(7 / 9)
    assert report.per_class[1].support == 10
    assert report.warnings == 0


def test_weighted_precision_can_exceed_accuracy():
    cm = confusion([0] * 10 + [1] * 2, [0] * 5 + [1] * 5 + [1] * 2, n_classes=2)
    assert cm.to_list() == [[5, 5], [0, 2]]
    report = metrics(cm)
    assert report.accuracy == pytest.approx(7 / 12)
    assert report.precision_weighted == pytest.approx((10 * 1.0 + 2 * 2 / 7) / 12)
    assert report.precision_weighted > report.accuracy
    assert report.recall_weighted == pytest.approx(report.accuracy)


def test_confusion_matches_tally(rng):
    true = rng.integers(0, 11, size=300).tolist()
    predicted = rng.integers(0, 11, size=300).tolist()
    cm = confusion(true, predicted)
    assert cm.to_list() == tally(true, predicted, 11)
    assert cm.total == 300
    assert cm.labels[0] == "1" and cm.labels[-1] == "F"


def test_accepts_symbols_and_labels():
    cm = confusion([ClassLabel("A"), "A", 0], ["A", ClassLabel("B"), "1"])
    a, b = ClassLabel("A").index, ClassLabel("B").index
    assert cm.counts[a, a] == 1
    assert cm.counts[a, b] == 1
    assert cm.counts[0, 0] == 1


def test_weighted_recall_equals_accuracy(rng):
    for _ in range(20):
        counts = rng.integers(0, 6, size=(11, 11))
        counts[0, 0] += 1
        report = metrics(ConfusionMatrix(counts=counts))
        assert report.recall_weighted == pytest.approx(report.accuracy, abs=1e-12)


def test_perfect_predictions():
    labels = list(range(11)) * 3
    report = metrics(confusion(labels, labels))
    assert report.accuracy == 1.0
    assert report.f1_macro == 1.0
    assert report.precision_weighted == 1.0


def test_permuting_classes_keeps_summary_scores(rng):
    counts = rng.integers(0, 8, size=(11, 11)) + np.eye(11, dtype=int)
    perm = rng.permutation(11)
    base = metrics(ConfusionMatrix(counts=counts))
    permuted = metrics(ConfusionMatrix(counts=counts[np.ix_(perm, perm)]))
    assert permuted.accuracy == pytest.approx(base.accuracy)
    assert permuted.f1_macro == pytest.approx(base.f1_macro)
    assert permuted.f1_weighted == pytest.approx(base.f1_weighted)
    assert [c.f1 for c in permuted.per_class] == pytest.approx(
        [base.per_class[i].f1 for i in perm]
    )


def test_absent_class_scores_zero_with_warnings():
    report = metrics(confusion([0, 0, 1], [0, 0, 0], n_classes=3))
    assert report.per_class[1].recall == 0.0
    assert report.per_class[2].precision == 0.0
    assert report.per_class[2].support == 0
    assert report.warnings > 0
    assert report.precision_macro == pytest.approx((2 / 3) / 3)


def test_matches_scikit_learn(rng):
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    true = rng.integers(0, 11, size=200)
    predicted = np.where(rng.random(200) < 0.6, true, rng.integers(0, 11, size=200))
    report = metrics(confusion(true.tolist(), predicted.tolist()))
    labels = list(range(11))
    for average in ("macro", "weighted"):
        p, r, f, _ = sklearn_metrics.precision_recall_fscore_support(
            true, predicted, labels=labels, average=average, zero_division=0
        )
        assert getattr(report, f"precision_{average}") == pytest.approx(p)
        assert getattr(report, f"recall_{average}") == pytest.approx(r)
        assert getattr(report, f"f1_{average}") == pytest.approx(f)


def test_errors():
    with pytest.raises(EmptyMatrix):
        metrics(ConfusionMatrix(counts=np.zeros((11, 11), dtype=np.int64)))
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0])


def test_report_round_trip_and_text(tmp_path):
    report = metrics(confusion([0, 1, 2, 2], [0, 2, 2, 2]))
    loaded = MetricsReport.read(report.write(tmp_path / "metrics.json"))
    assert loaded == report
    text = classification_report_text(report)
    assert text.splitlines()[0].split() == ["class", "precision", "recall", "f1", "support"]
    assert "accuracy" in text and "weighted" in text
