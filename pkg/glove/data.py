from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import SplitSpec
from .errors import (
    AllRowsRemoved,
    DataError,
    EmptyFile,
    InsufficientClassData,
    MalformedRow,
    TooFewColumns,
)
from .labels import N_CHANNELS, N_CLASSES, ClassLabel, LabelResolver
from .utils import counter_rng

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"


@dataclass(frozen=True, eq=False)
class Recording:
    """One gesture execution: time-ordered frames of 5 finger voltages."""

    id: str
    label: ClassLabel
    samples: np.ndarray
    qc_removed: int = 0
    had_header: bool = False

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[1] != N_CHANNELS:
            raise DataError(f"{self.id}: frames must have exactly {N_CHANNELS} channels")

    @property
    def n_frames(self) -> int:
        return int(self.samples.shape[0])


@dataclass
class CorpusSummary:
    recordings: int = 0
    rows_removed: Dict[str, int] = field(default_factory=dict)
    dropped: List[str] = field(default_factory=list)


def _is_numeric_row(cells: Sequence[str]) -> bool:
    try:
        [float(c) for c in cells]
    except ValueError:
        return False
    return True


def load_recording(
    path: Path | str, label: ClassLabel, recording_id: Optional[str] = None
) -> Recording:
    """Parse a CSV of voltages; the 5 leading columns are thumb..little, extras are ignored."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if any(c.strip() for c in row)
        ]
    if not rows:
        raise EmptyFile(f"{path}: file is empty")

    had_header = not _is_numeric_row([c.strip() for c in rows[0][1][:N_CHANNELS]])
    if had_header:
        rows = rows[1:]
    if not rows:
        raise EmptyFile(f"{path}: no data rows after the header")

    values = np.empty((len(rows), N_CHANNELS), dtype=np.float64)
    for row_index, (lineno, row) in enumerate(rows):
        cells = [c.strip() for c in row[:N_CHANNELS]]
        if any(c == "" for c in cells):
            raise MalformedRow(str(path), row_index, lineno, "blank cell")
        if len(cells) < N_CHANNELS:
            raise TooFewColumns(str(path), row_index, len(cells))
        try:
            parsed = [float(c) for c in cells]
        except ValueError as exc:
            raise MalformedRow(str(path), row_index, lineno, str(exc)) from exc
        if not all(math.isfinite(v) for v in parsed):
            raise MalformedRow(str(path), row_index, lineno, "non-finite value")
        values[row_index] = parsed

    recording = Recording(
        id=recording_id or path.stem,
        label=label,
        samples=values,
        had_header=had_header,
    )
    logger.debug("loaded %s: %d frames (label %s)", path, recording.n_frames, label)
    return recording


def write_recording(recording: Recording, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr formatting keeps every float64 bit-exact through a reload.
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for frame in recording.samples:
            fh.write(",".join(repr(float(v)) for v in frame))
            fh.write("\n")
    return path


def quality_filter(recording: Recording, zero_eps: float = 0.0) -> Recording:
    """Drop frames with more than three dead (zero) channels."""
    zeros = np.abs(recording.samples) <= zero_eps
    keep = zeros.sum(axis=1) <= 3
    removed = int((~keep).sum())
    if not keep.any():
        raise AllRowsRemoved(f"{recording.id}: every frame failed quality control")
    if removed:
        logger.debug("%s: quality filter removed %d frames", recording.id, removed)
    return replace(
        recording,
        samples=recording.samples[keep],
        qc_removed=recording.qc_removed + removed,
    )


def _largest_remainder(n: int, fractions: Sequence[float]) -> List[int]:
    quotas = [n * f for f in fractions]
    counts = [int(np.floor(q)) for q in quotas]
    leftover = n - sum(counts)
    # Stable sort: equal remainders go to the earlier split.
    order = sorted(range(len(fractions)), key=lambda i: -(quotas[i] - counts[i]))
    for i in order[:leftover]:
        counts[i] += 1
    if n >= len(fractions):
        for i, count in enumerate(counts):
            if count == 0 and fractions[i] > 0:
                donor = int(np.argmax(counts))
                counts[donor] -= 1
                counts[i] += 1
    return counts


def stratified_split(
    recordings: Sequence[Recording],
    spec: SplitSpec,
    seed: Optional[int] = None,
) -> Tuple[List[Recording], List[Recording], List[Recording]]:
    """Disjoint per-class 70/15/15 partition, deterministic for a fixed seed."""
    rng_seed = spec.rng_seed if spec.rng_seed is not None else (seed or 0)
    by_class: Dict[int, List[Recording]] = {}
    for recording in recordings:
        by_class.setdefault(recording.label.index, []).append(recording)

    fractions = (spec.train_frac, spec.val_frac, spec.test_frac)
    parts: Tuple[List[Recording], List[Recording], List[Recording]] = ([], [], [])
    for class_index in sorted(by_class):
        members = by_class[class_index]
        if len(members) < 3:
            raise InsufficientClassData(
                f"class {ClassLabel.from_index(class_index)} has {len(members)} recordings, need >= 3"
            )
        order = counter_rng(rng_seed, class_index).permutation(len(members))
        counts = _largest_remainder(len(members), fractions)
        start = 0
        for part, count in zip(parts, counts):
            part.extend(members[i] for i in order[start:start + count])
            start += count

    logger.info(
        "stratified split: train=%d val=%d test=%d over %d classes",
        len(parts[0]),
        len(parts[1]),
        len(parts[2]),
        len(by_class),
    )
    return parts


def read_manifest(root: Path) -> List[Tuple[Path, str]]:
    entries: List[Tuple[Path, str]] = []
    manifest = root / MANIFEST_NAME
    for lineno, raw in enumerate(manifest.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "," not in line:
            raise DataError(f"{manifest}:{lineno}: expected 'relative_path,label'")
        rel, label = (part.strip() for part in line.rsplit(",", 1))
        entries.append((root / rel, label))
    return entries


def write_manifest(root: Path, entries: Sequence[Tuple[Path, ClassLabel]]) -> Path:
    path = root / MANIFEST_NAME
    lines = [f"{Path(p).relative_to(root).as_posix()},{label.symbol}" for p, label in entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def discover_corpus(root: Path | str) -> List[Tuple[Path, ClassLabel]]:
    """List (file, label) pairs; the manifest wins over directory names when present."""
    root = Path(root)
    resolver = LabelResolver()
    if (root / MANIFEST_NAME).exists():
        return [(path, resolver.resolve(label)) for path, label in read_manifest(root)]
    entries: List[Tuple[Path, ClassLabel]] = []
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        label = resolver.resolve(directory.name)
        entries.extend((path, label) for path in sorted(directory.glob("*.csv")))
    if not entries:
        raise EmptyFile(f"{root}: no recordings found")
    return entries


def load_corpus(root: Path | str, zero_eps: float = 0.0) -> Tuple[List[Recording], CorpusSummary]:
    root = Path(root)
    summary = CorpusSummary()
    recordings: List[Recording] = []
    for path, label in discover_corpus(root):
        rec_id = path.relative_to(root).with_suffix("").as_posix()
        recording = load_recording(path, label, recording_id=rec_id)
        try:
            recording = quality_filter(recording, zero_eps)
        except AllRowsRemoved:
            logger.warning("%s: dropped, every frame failed quality control", rec_id)
            summary.dropped.append(rec_id)
            continue
        if recording.qc_removed:
            summary.rows_removed[rec_id] = recording.qc_removed
        recordings.append(recording)
    summary.recordings = len(recordings)
    logger.info(
        "loaded %d recordings from %s (%d rows removed by QC, %d recordings dropped)",
        len(recordings),
        root,
        sum(summary.rows_removed.values()),
        len(summary.dropped),
    )
    return recordings, summary


def class_counts(recordings: Sequence[Recording]) -> List[int]:
    counts = [0] * N_CLASSES
    for recording in recordings:
        counts[recording.label.index] += 1
    return counts


__all__ = [
    "Recording",
    "CorpusSummary",
    "MANIFEST_NAME",
    "load_recording",
    "write_recording",
    "quality_filter",
    "stratified_split",
    "read_manifest",
    "write_manifest",
    "discover_corpus",
    "load_corpus",
    "class_counts",
]
