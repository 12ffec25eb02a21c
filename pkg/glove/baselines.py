"""Reference models on raw windows: distance-weighted kNN and the dense SimpleNN."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .config import KnnConfig, TrainConfig, simplenn_defaults
from .container import KNN_MAGIC, Container, fingerprint, read_container, write_container
from .errors import DataError, InsufficientClassData, LengthMismatch, NotFitted
from .labels import N_CLASSES, ClassLabel
from .model import Checkpoint, Network, SimpleNN, SimpleNNSpec, predict, predict_batch
from .preprocess import (
    NORM_EPS,
    ScalerParams,
    SequenceWindow,
    WindowScaler,
    flatten_windows,
    per_sequence_normalize,
    window_labels,
)
from .training import TrainResult, fit
from .utils import root_seed

logger = logging.getLogger(__name__)

WindowsOrMatrix = Union[Sequence[SequenceWindow], np.ndarray]

# Upper bound on query x train x feature elements held at once.
_DISTANCE_BLOCK = 4_000_000


def _design(data: WindowsOrMatrix) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.atleast_2d(np.asarray(data, dtype=np.float64))
    return flatten_windows(list(data))


class KnnModel:
    """k nearest neighbours on standardized flat windows, weighted by inverse distance.

    A query at distance zero from stored vectors takes their label outright.
    """

    def __init__(self, k: int = 5, weighting: str = "distance", eps: float = NORM_EPS):
        if k < 1:
            raise DataError("k must be >= 1")
        self.k = k
        self.weighting = weighting
        self.scaler = WindowScaler(eps)
        self.vectors: Optional[np.ndarray] = None
        self.labels: Optional[np.ndarray] = None

    @classmethod
    def from_config(cls, cfg: KnnConfig, eps: float = NORM_EPS) -> "KnnModel":
        return cls(k=cfg.k, weighting=cfg.weighting, eps=eps)

    @property
    def fitted(self) -> bool:
        return self.vectors is not None

    def fit(self, data: WindowsOrMatrix, labels: Optional[Sequence[int]] = None) -> "KnnModel":
        matrix = _design(data)
        if labels is None:
            if isinstance(data, np.ndarray):
                raise DataError("labels are required when fitting on a matrix")
            labels = window_labels(list(data))
        y = np.asarray(labels, dtype=np.int64)
        if len(y) != len(matrix):
            raise LengthMismatch(f"{len(matrix)} vectors but {len(y)} labels")
        if self.k > len(matrix):
            raise DataError(f"k={self.k} exceeds the {len(matrix)} training vectors")
        self.vectors = self.scaler.fit_transform(matrix)
        self.labels = y
        return self

    def _distances(self, queries: np.ndarray) -> np.ndarray:
        assert self.vectors is not None
        n, d = self.vectors.shape
        step = max(1, _DISTANCE_BLOCK // max(1, n * d))
        blocks = []
        for start in range(0, len(queries), step):
            diff = queries[start:start + step, None, :] - self.vectors[None, :, :]
            blocks.append(np.sqrt(np.einsum("qnd,qnd->qn", diff, diff)))
        return np.concatenate(blocks) if blocks else np.zeros((0, n))

    def _vote(self, distances: np.ndarray) -> np.ndarray:
        assert self.labels is not None
        nearest = np.argsort(distances, kind="stable")[: self.k]
        d = distances[nearest]
        scores = np.zeros(N_CLASSES)
        exact = d == 0.0
        if exact.any():
            np.add.at(scores, self.labels[nearest[exact]], 1.0)
        elif self.weighting == "distance":
            np.add.at(scores, self.labels[nearest], 1.0 / d)
        else:
            np.add.at(scores, self.labels[nearest], 1.0)
        return scores / scores.sum()

    def predict_scores(self, data: WindowsOrMatrix) -> np.ndarray:
        """(n, 11) normalized vote shares."""
        if not self.fitted:
            raise NotFitted("kNN model has not been fitted")
        queries = self.scaler.transform(_design(data))
        if len(queries) == 0:
            return np.zeros((0, N_CLASSES))
        return np.stack([self._vote(row) for row in self._distances(queries)])

    def predict_indices(self, data: WindowsOrMatrix) -> np.ndarray:
        scores = self.predict_scores(data)
        return scores.argmax(axis=1) if len(scores) else np.zeros(0, dtype=np.int64)

    def predict(self, query: Union[SequenceWindow, np.ndarray]) -> Tuple[ClassLabel, np.ndarray]:
        """Label and per-class scores for one window or flat vector."""
        raw = query.data if isinstance(query, SequenceWindow) else np.asarray(query)
        scores = self.predict_scores(raw.reshape(1, -1))[0]
        return ClassLabel.from_index(int(scores.argmax())), scores

    def save(self, path: Path | str) -> Path:
        if not self.fitted or self.scaler.params is None:
            raise NotFitted("cannot save an unfitted kNN model")
        assert self.vectors is not None and self.labels is not None
        spec = f"knn:k={self.k}:weighting={self.weighting}:dim={self.vectors.shape[1]}"
        container = Container(
            magic=KNN_MAGIC,
            fingerprint=fingerprint(spec),
            tensors={
                "vectors": self.vectors,
                "labels": self.labels.astype(np.float64),
                "scaler_mean": self.scaler.params.mean,
                "scaler_std": self.scaler.params.std,
            },
            metadata={"k": self.k, "weighting": self.weighting, "eps": self.scaler.eps},
        )
        return write_container(path, container)

    @classmethod
    def load(cls, path: Path | str) -> "KnnModel":
        container = read_container(path, KNN_MAGIC)
        meta = container.metadata
        model = cls(k=int(meta["k"]), weighting=str(meta["weighting"]), eps=float(meta["eps"]))
        model.scaler.params = ScalerParams(
            mean=container.tensors["scaler_mean"], std=container.tensors["scaler_std"]
        )
        model.vectors = container.tensors["vectors"]
        model.labels = container.tensors["labels"].astype(np.int64)
        return model


@dataclass
class FoldResult:
    index: int
    train_size: int
    test_size: int
    accuracy: float


@dataclass
class CrossValidationResult:
    folds: List[FoldResult] = field(default_factory=list)
    predictions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    targets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean()) if self.folds else 0.0

    @property
    def std_accuracy(self) -> float:
        return float(self.accuracies.std()) if self.folds else 0.0


def stratified_folds(labels: Sequence[int], n_folds: int, seed: int) -> List[np.ndarray]:
    """Test-index arrays of a shuffled stratified K-fold partition."""
    y = np.asarray(labels, dtype=np.int64)
    present, counts = np.unique(y, return_counts=True)
    short = [ClassLabel.from_index(int(c)).symbol for c, n in zip(present, counts) if n < n_folds]
    if short:
        raise InsufficientClassData(f"classes {short} have fewer than {n_folds} windows")
    splitter = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed % (2**32))
    return [test for _, test in splitter.split(np.zeros(len(y)), y)]


def knn_cross_validate(
    data: WindowsOrMatrix,
    labels: Optional[Sequence[int]] = None,
    cfg: Optional[KnnConfig] = None,
    seed: Optional[int] = None,
) -> CrossValidationResult:
    """Stratified K-fold accuracy; the scaler is refitted inside every training fold."""
    cfg = cfg or KnnConfig()
    matrix = _design(data)
    if labels is None:
        if isinstance(data, np.ndarray):
            raise DataError("labels are required for a feature matrix")
        labels = window_labels(list(data))
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(matrix):
        raise LengthMismatch(f"{len(matrix)} vectors but {len(y)} labels")
    folds = stratified_folds(y, cfg.cv_folds, root_seed(seed))
    result = CrossValidationResult(predictions=np.full(len(y), -1, dtype=np.int64), targets=y)
    for index, test in enumerate(folds):
        train = np.setdiff1d(np.arange(len(y)), test)
        model = KnnModel.from_config(cfg).fit(matrix[train], y[train])
        predicted = model.predict_indices(matrix[test])
        result.predictions[test] = predicted
        accuracy = float((predicted == y[test]).mean())
        result.folds.append(FoldResult(index, len(train), len(test), accuracy))
        logger.debug(
            "fold %d: %d train / %d test, accuracy %.4f", index, len(train), len(test), accuracy
        )
    logger.info(
        "kNN k=%d %d-fold accuracy %.4f +/- %.4f",
        cfg.k, cfg.cv_folds, result.mean_accuracy, result.std_accuracy,
    )
    return result


def simplenn_inputs(windows: Sequence[SequenceWindow], normalize: bool = True) -> np.ndarray:
    """Flattened 5w vectors, each window standardized per channel first when ``normalize``."""
    if normalize:
        windows = [per_sequence_normalize(win) for win in windows]
    return flatten_windows(windows)


def simplenn_train(
    train: Sequence[SequenceWindow],
    val: Sequence[SequenceWindow],
    cfg: Optional[TrainConfig] = None,
    seed: Optional[int] = None,
    normalize: bool = True,
) -> TrainResult:
    cfg = cfg or simplenn_defaults()
    if not train:
        raise DataError("SimpleNN needs training windows")
    train_x = simplenn_inputs(train, normalize)
    model = SimpleNN(SimpleNNSpec(input_dim=train_x.shape[1]), seed=root_seed(seed))
    return fit(
        model,
        train_x,
        window_labels(train),
        simplenn_inputs(val, normalize),
        window_labels(val),
        cfg,
        seed=seed,
        metadata={"input": "raw_windows", "per_sequence_normalize": normalize},
    )


def simplenn_predict(
    checkpoint: Union[Checkpoint, Network],
    window: SequenceWindow,
    normalize: bool = True,
) -> Tuple[ClassLabel, np.ndarray]:
    return predict(checkpoint, simplenn_inputs([window], normalize)[0])


def simplenn_predict_batch(
    checkpoint: Union[Checkpoint, Network],
    windows: Sequence[SequenceWindow],
    normalize: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    return predict_batch(checkpoint, simplenn_inputs(windows, normalize))


__all__ = [
    "KnnModel",
    "FoldResult",
    "CrossValidationResult",
    "stratified_folds",
    "knn_cross_validate",
    "simplenn_inputs",
    "simplenn_train",
    "simplenn_predict",
    "simplenn_predict_batch",
]
