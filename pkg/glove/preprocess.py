from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .container import WINDOWS_MAGIC, Container, fingerprint, read_container, write_container
from .data import Recording
from .errors import DataError, NotFitted
from .labels import N_CHANNELS, ClassLabel

logger = logging.getLogger(__name__)

NORM_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class SequenceWindow:
    """A w x 5 block of consecutive frames, the unit of classification."""

    data: np.ndarray
    label: ClassLabel
    source_id: str

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != N_CHANNELS:
            raise DataError(f"{self.source_id}: window must be w x {N_CHANNELS}")

    @property
    def w(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray


def segment(recording: Recording, w: int) -> List[SequenceWindow]:
    """Cut floor(N/w) contiguous windows; the N mod w leading frames are dropped."""
    if w < 1:
        raise DataError(f"window size must be >= 1, got {w}")
    n = recording.n_frames
    count = n // w
    start = n - count * w
    windows = [
        SequenceWindow(
            data=recording.samples[start + i * w:start + (i + 1) * w].copy(),
            label=recording.label,
            source_id=f"{recording.id}#{i}",
        )
        for i in range(count)
    ]
    return windows


def segment_all(recordings: Sequence[Recording], w: int) -> List[SequenceWindow]:
    windows: List[SequenceWindow] = []
    for recording in recordings:
        windows.extend(segment(recording, w))
    logger.info(
        "segmented %d recordings into %d windows of %d frames", len(recordings), len(windows), w
    )
    return windows


def normalize_channels(data: np.ndarray, eps: float = NORM_EPS) -> np.ndarray:
    mean = data.mean(axis=0, keepdims=True)
    std = data.std(axis=0, keepdims=True)
    return (data - mean) / np.maximum(std, eps)


def per_sequence_normalize(window: SequenceWindow, eps: float = NORM_EPS) -> SequenceWindow:
    """Zero mean / unit population variance per channel; constant channels become zeros."""
    return replace(window, data=normalize_channels(window.data, eps))


def flatten_windows(windows: Sequence[SequenceWindow]) -> np.ndarray:
    if not windows:
        return np.zeros((0, 0))
    return np.stack([win.data.reshape(-1) for win in windows])


def window_labels(windows: Sequence[SequenceWindow]) -> np.ndarray:
    return np.array([win.label.index for win in windows], dtype=np.int64)


def fit_scaler(train: Sequence[SequenceWindow] | np.ndarray, eps: float = NORM_EPS) -> ScalerParams:
    matrix = train if isinstance(train, np.ndarray) else flatten_windows(train)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise DataError("scaler needs a non-empty training set")
    return ScalerParams(mean=matrix.mean(axis=0), std=np.maximum(matrix.std(axis=0), eps))


def apply_scaler(params: Optional[ScalerParams], window: SequenceWindow | np.ndarray) -> np.ndarray:
    """Standardize a window (or rows of flat vectors) with training statistics."""
    if params is None:
        raise NotFitted("apply_scaler called before fit_scaler")
    flat = window.data.reshape(-1) if isinstance(window, SequenceWindow) else np.asarray(window)
    if flat.shape[-1] != params.mean.shape[0]:
        raise DataError(f"scaler fitted on {params.mean.shape[0]} features, got {flat.shape[-1]}")
    return (flat - params.mean) / params.std


class WindowScaler:
    """Stateful wrapper so the classical pipeline can fit once and transform many."""

    def __init__(self, eps: float = NORM_EPS):
        self.eps = eps
        self.params: Optional[ScalerParams] = None

    def fit(self, matrix: np.ndarray) -> "WindowScaler":
        self.params = fit_scaler(matrix, self.eps)
        return self

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return apply_scaler(self.params, matrix)

    def fit_transform(self, matrix: np.ndarray) -> np.ndarray:
        return self.fit(matrix).transform(matrix)


def save_windows(
    path: Path | str, windows: Sequence[SequenceWindow], metadata: Optional[dict] = None
) -> Path:
    w = windows[0].w if windows else 0
    data = np.stack([win.data for win in windows]) if windows else np.zeros((0, w, N_CHANNELS))
    meta = {
        "window": w,
        "source_ids": [win.source_id for win in windows],
        **(metadata or {}),
    }
    container = Container(
        magic=WINDOWS_MAGIC,
        fingerprint=fingerprint(f"windows:w={w}:channels={N_CHANNELS}"),
        tensors={"data": data, "labels": window_labels(windows).astype(np.float64)},
        metadata=meta,
    )
    return write_container(path, container)


def load_windows(path: Path | str) -> List[SequenceWindow]:
    container = read_container(path, WINDOWS_MAGIC)
    data = container.tensors["data"]
    labels = container.tensors["labels"].astype(np.int64)
    ids = container.metadata.get("source_ids", [])
    return [
        SequenceWindow(data=data[i].copy(), label=ClassLabel.from_index(int(labels[i])), source_id=ids[i])
        for i in range(data.shape[0])
    ]


__all__ = [
    "NORM_EPS",
    "SequenceWindow",
    "ScalerParams",
    "segment",
    "segment_all",
    "normalize_channels",
    "per_sequence_normalize",
    "flatten_windows",
    "window_labels",
    "fit_scaler",
    "apply_scaler",
    "WindowScaler",
    "save_windows",
    "load_windows",
]
