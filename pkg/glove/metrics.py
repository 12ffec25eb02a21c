from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from .errors import EmptyMatrix, LengthMismatch
from .labels import N_CLASSES, SYMBOLS, ClassLabel

logger = logging.getLogger(__name__)

LabelLike = Union[ClassLabel, int, str]


def _as_index(label: LabelLike) -> int:
    if isinstance(label, ClassLabel):
        return label.index
    if isinstance(label, str):
        return ClassLabel(label).index
    return int(label)


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns are predictions."""

    counts: np.ndarray
    labels: List[str] = field(default_factory=lambda: list(SYMBOLS))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    def to_list(self) -> List[List[int]]:
        return self.counts.astype(int).tolist()


def confusion(
    true_labels: Sequence[LabelLike],
    predicted: Sequence[LabelLike],
    n_classes: int = N_CLASSES,
) -> ConfusionMatrix:
    if len(true_labels) != len(predicted):
        raise LengthMismatch(f"{len(true_labels)} true labels but {len(predicted)} predictions")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    t = np.array([_as_index(x) for x in true_labels], dtype=np.int64)
    p = np.array([_as_index(x) for x in predicted], dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    labels = list(SYMBOLS) if n_classes == N_CLASSES else [str(i) for i in range(n_classes)]
    return ConfusionMatrix(counts=counts, labels=labels)


@dataclass
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    precision_macro: float
    precision_weighted: float
    recall_macro: float
    recall_weighted: float
    f1_macro: float
    f1_weighted: float
    per_class: List[ClassMetrics]
    confusion: List[List[int]]
    warnings: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: Path | str) -> "MetricsReport":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        raw["per_class"] = [ClassMetrics(**row) for row in raw["per_class"]]
        return cls(**raw)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, int]:
    out = np.zeros(num.shape, dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out, int((~ok).sum())


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus macro and support-weighted precision, recall and F1.

    Classes whose denominator is zero score 0 and are counted in ``warnings``.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyMatrix("confusion matrix has no samples")
    tp = np.diag(counts)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    precision, warn_p = _safe_ratio(tp, predicted)
    recall, warn_r = _safe_ratio(tp, support)
    f1, warn_f = _safe_ratio(2.0 * precision * recall, precision + recall)
    weights = support / total
    warnings = warn_p + warn_r + warn_f
    if warnings:
        logger.warning("%d zero-denominator class scores reported as 0", warnings)
    per_class = [
        ClassMetrics(
            label=cm.labels[i],
            precision=float(precision[i]),
            recall=float(recall[i]),
            f1=float(f1[i]),
            support=int(support[i]),
        )
        for i in range(cm.n_classes)
    ]
    return MetricsReport(
        accuracy=float(tp.sum() / total),
        precision_macro=float(precision.mean()),
        precision_weighted=float(weights @ precision),
        recall_macro=float(recall.mean()),
        recall_weighted=float(weights @ recall),
        f1_macro=float(f1.mean()),
        f1_weighted=float(weights @ f1),
        per_class=per_class,
        confusion=cm.to_list(),
        warnings=warnings,
    )


def classification_report_text(report: MetricsReport) -> str:
    """Fixed-width table for terminals."""
    lines = [f"{'class':>8} {'precision':>10} {'recall':>10} {'f1':>10} {'support':>8}"]
    for row in report.per_class:
        lines.append(
            f"{row.label:>8} {row.precision:>10.4f} {row.recall:>10.4f} {row.f1:>10.4f} {row.support:>8d}"
        )
    total = sum(row.support for row in report.per_class)
    lines.append("")
    lines.append(f"{'accuracy':>8} {'':>10} {'':>10} {report.accuracy:>10.4f} {total:>8d}")
    lines.append(
        f"{'macro':>8} {report.precision_macro:>10.4f} {report.recall_macro:>10.4f} "
        f"{report.f1_macro:>10.4f} {total:>8d}"
    )
    lines.append(
        f"{'weighted':>8} {report.precision_weighted:>10.4f} {report.recall_weighted:>10.4f} "
        f"{report.f1_weighted:>10.4f} {total:>8d}"
    )
    return "\n".join(lines)


__all__ = [
    "ConfusionMatrix",
    "confusion",
    "ClassMetrics",
    "MetricsReport",
    "metrics",
    "classification_report_text",
]
