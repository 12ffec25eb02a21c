"""Stage runner: each stage reads the previous stage's artifacts from a run directory
and writes its own, together with a manifest of inputs, outputs, config hash and
wall time."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .augment import augment_dataset
from .baselines import KnnModel, knn_cross_validate, simplenn_predict_batch, simplenn_train
from .config import STAGE_SECTIONS, RunConfig, config_hash, dump_config, flatten_config
from .container import (
    FEATURES_MAGIC,
    Container,
    fingerprint,
    read_container,
    write_container,
    write_mfcc_block,
)
from .data import Recording, load_corpus, stratified_split
from .errors import DataError, MissingArtifact, StaleArtifact
from .labels import labels_from_indices
from .metrics import ConfusionMatrix, MetricsReport, classification_report_text, confusion, metrics
from .mfcc import mfcc_batch
from .model import Checkpoint, MultiBranchNet, predict_batch
from .preprocess import (
    SequenceWindow,
    flatten_windows,
    load_windows,
    per_sequence_normalize,
    save_windows,
    segment_all,
    window_labels,
)
from .synth import generate_corpus, write_corpus
from .training import History, fit
from .utils import derive_seed, file_digest, section_seed, text_digest

logger = logging.getLogger(__name__)

PARTS = ("train", "val", "test")
MANIFEST_FILE = "stage_manifest.json"
CONFIG_ECHO = "config.txt"
MODEL_KINDS = ("multibranch", "simplenn", "knn")

Parts = Dict[str, List[SequenceWindow]]


# -- in-memory building blocks --------------------------------------------


def split_recordings(recordings: Sequence[Recording], cfg: RunConfig) -> Dict[str, List[Recording]]:
    seed = section_seed(cfg.split.rng_seed, cfg.seed, "split")
    return dict(zip(PARTS, stratified_split(recordings, cfg.split, seed=seed)))


def segment_parts(parts: Dict[str, List[Recording]], w: int) -> Parts:
    return {name: segment_all(recs, w) for name, recs in parts.items()}


def ensure_windows(parts: Parts) -> None:
    for name in PARTS:
        if not parts.get(name):
            raise DataError(f"no {name} windows; the window size may exceed every recording")


def augment_parts(parts: Parts, cfg: RunConfig) -> Parts:
    """Training windows always get variants; validation only with ``augment_validation``."""
    seed = section_seed(cfg.augment.rng_seed, cfg.seed, "augment")
    out = dict(parts)
    out["train"] = augment_dataset(parts["train"], cfg.augment, rng=derive_seed(seed, "train"))
    if cfg.augment.augment_validation:
        out["val"] = augment_dataset(parts["val"], cfg.augment, rng=derive_seed(seed, "val"))
    return out


def mfcc_features(windows: Sequence[SequenceWindow], cfg: RunConfig) -> np.ndarray:
    if cfg.window.per_sequence_normalize:
        windows = [per_sequence_normalize(win, cfg.window.scaler_eps) for win in windows]
    return mfcc_batch(windows, cfg.mfcc)


def train_seed(cfg: RunConfig, kind: str) -> int:
    explicit = cfg.simplenn.rng_seed if kind == "simplenn" else cfg.train.rng_seed
    return section_seed(explicit, cfg.seed, "train")


@dataclass
class TrainedModel:
    kind: str
    checkpoint: Optional[Checkpoint] = None
    knn: Optional[KnnModel] = None
    history: Optional[History] = None
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.history) if self.history is not None else 0


def train_model(
    kind: str,
    parts: Parts,
    cfg: RunConfig,
    features: Optional[Dict[str, np.ndarray]] = None,
) -> TrainedModel:
    """Fit one of the three model kinds on the train/val windows of ``parts``."""
    seed = train_seed(cfg, kind)
    if kind == "multibranch":
        features = features or {name: mfcc_features(parts[name], cfg) for name in ("train", "val")}
        model = MultiBranchNet(seed=seed)
        result = fit(
            model,
            features["train"],
            window_labels(parts["train"]),
            features["val"],
            window_labels(parts["val"]),
            cfg.train,
            seed=seed,
            metadata={"input": "mfcc", "window": cfg.window.size},
        )
        return TrainedModel(kind, checkpoint=result.checkpoint, history=result.history)
    if kind == "simplenn":
        result = simplenn_train(
            parts["train"],
            parts["val"],
            cfg.simplenn,
            seed=seed,
            normalize=cfg.window.per_sequence_normalize,
        )
        return TrainedModel(kind, checkpoint=result.checkpoint, history=result.history)
    if kind == "knn":
        knn = KnnModel.from_config(cfg.knn, eps=cfg.window.scaler_eps).fit(parts["train"])
        pool = list(parts["train"]) + list(parts["val"])
        cv = knn_cross_validate(pool, cfg=cfg.knn, seed=derive_seed(cfg.seed, "knn"))
        summary = {
            "cv_folds": cfg.knn.cv_folds,
            "cv_accuracies": cv.accuracies.tolist(),
            "cv_mean_accuracy": cv.mean_accuracy,
            "cv_std_accuracy": cv.std_accuracy,
        }
        return TrainedModel(kind, knn=knn, summary=summary)
    raise DataError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")


def predict_windows(
    trained: TrainedModel,
    windows: Sequence[SequenceWindow],
    cfg: RunConfig,
    features: Optional[np.ndarray] = None,
) -> np.ndarray:
    if trained.kind == "knn":
        assert trained.knn is not None
        return trained.knn.predict_indices(flatten_windows(list(windows)))
    assert trained.checkpoint is not None
    if trained.kind == "simplenn":
        indices, _ = simplenn_predict_batch(
            trained.checkpoint, windows, cfg.window.per_sequence_normalize
        )
        return indices
    x = features if features is not None else mfcc_features(windows, cfg)
    indices, _ = predict_batch(trained.checkpoint, x)
    return indices


def evaluate_windows(
    trained: TrainedModel,
    windows: Sequence[SequenceWindow],
    cfg: RunConfig,
    features: Optional[np.ndarray] = None,
) -> Tuple[MetricsReport, np.ndarray]:
    if not windows:
        raise DataError("test set has no windows")
    predicted = predict_windows(trained, windows, cfg, features)
    report = metrics(confusion(window_labels(windows), predicted))
    return report, predicted


# -- artifacts and manifests ----------------------------------------------


def path_digest(path: Path) -> str:
    """sha256 of a file, or of every file under a directory (bookkeeping files excluded)."""
    if path.is_file():
        return file_digest(path)
    parts = []
    for child in sorted(p for p in path.rglob("*") if p.is_file()):
        if child.name in (MANIFEST_FILE, CONFIG_ECHO):
            continue
        parts.append(f"{child.relative_to(path).as_posix()}:{file_digest(child)}\n")
    return text_digest(parts)


@dataclass
class ArtifactRef:
    path: str
    sha256: str


@dataclass
class StageManifest:
    stage: str
    config_hash: str
    inputs: List[ArtifactRef]
    outputs: List[ArtifactRef]
    wall_time: float
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StageManifest":
        raw = json.loads(text)
        raw["inputs"] = [ArtifactRef(**ref) for ref in raw["inputs"]]
        raw["outputs"] = [ArtifactRef(**ref) for ref in raw["outputs"]]
        return cls(**raw)


@dataclass
class StageResult:
    stage: str
    directory: Path
    manifest: StageManifest

    @property
    def summary(self) -> Dict[str, Any]:
        return self.manifest.summary


def save_features(
    path: Path,
    features: np.ndarray,
    windows: Sequence[SequenceWindow],
    cfg: RunConfig,
) -> Path:
    spec = "mfcc:" + "".join(f"{k}={v};" for k, v in flatten_config(cfg.mfcc))
    container = Container(
        magic=FEATURES_MAGIC,
        fingerprint=fingerprint(spec),
        tensors={"features": features, "labels": window_labels(windows).astype(np.float64)},
        metadata={"source_ids": [win.source_id for win in windows], "shape": list(features.shape)},
    )
    return write_container(path, container)


def load_features(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    container = read_container(path, FEATURES_MAGIC)
    return container.tensors["features"], container.tensors["labels"].astype(np.int64)


class Pipeline:
    """Runs stages against one run directory, refusing stale or missing inputs."""

    def __init__(self, run_dir: Path | str, cfg: RunConfig):
        self.run_dir = Path(run_dir)
        self.cfg = cfg
        self.run_dir.mkdir(parents=True, exist_ok=True)

    # -- bookkeeping ---------------------------------------------------

    def stage_dir(self, stage: str) -> Path:
        return self.run_dir / stage

    def _ref(self, path: Path) -> ArtifactRef:
        try:
            shown = path.relative_to(self.run_dir).as_posix()
        except ValueError:
            shown = str(path)
        return ArtifactRef(path=shown, sha256=path_digest(path))

    def _resolve(self, ref: ArtifactRef) -> Path:
        path = Path(ref.path)
        return path if path.is_absolute() else self.run_dir / path

    def _finish(
        self,
        stage: str,
        inputs: Sequence[Path],
        outputs: Sequence[Path],
        started: float,
        summary: Dict[str, Any],
    ) -> StageResult:
        directory = self.stage_dir(stage)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = StageManifest(
            stage=stage,
            config_hash=config_hash(self.cfg, STAGE_SECTIONS[stage]),
            inputs=[self._ref(p) for p in inputs],
            outputs=[self._ref(p) for p in outputs],
            wall_time=round(time.perf_counter() - started, 3),
            summary=summary,
        )
        (directory / MANIFEST_FILE).write_text(manifest.to_json() + "\n", encoding="utf-8")
        (directory / CONFIG_ECHO).write_text(dump_config(self.cfg), encoding="utf-8")
        logger.info("stage %s finished in %.2fs", stage, manifest.wall_time)
        return StageResult(stage, directory, manifest)

    def require(self, stage: str) -> StageManifest:
        """Manifest of a finished stage whose outputs and config still match."""
        path = self.stage_dir(stage) / MANIFEST_FILE
        if not path.exists():
            raise MissingArtifact(f"stage '{stage}' has not been run in {self.run_dir}")
        manifest = StageManifest.from_json(path.read_text(encoding="utf-8"))
        expected = config_hash(self.cfg, STAGE_SECTIONS[stage])
        if manifest.config_hash != expected:
            raise StaleArtifact(
                f"stage '{stage}' was produced with a different configuration; rerun it"
            )
        for ref in manifest.outputs:
            target = self._resolve(ref)
            if not target.exists():
                raise MissingArtifact(f"{target} listed by stage '{stage}' is missing")
            if path_digest(target) != ref.sha256:
                raise StaleArtifact(f"{target} changed after stage '{stage}' wrote it")
        return manifest

    def _windows_of(self, stage: str) -> Tuple[Parts, List[Path]]:
        self.require(stage)
        paths = [self.stage_dir(stage) / f"{name}.gsw" for name in PARTS]
        return {name: load_windows(p) for name, p in zip(PARTS, paths)}, paths

    # -- stages --------------------------------------------------------

    def synth(self) -> StageResult:
        started = time.perf_counter()
        seed = section_seed(self.cfg.synth.rng_seed, self.cfg.seed, "synth")
        recordings = generate_corpus(self.cfg.synth, seed=seed)
        directory = self.stage_dir("synth")
        corpus = directory / "corpus"
        write_corpus(recordings, corpus)
        summary = {
            "recordings": len(recordings),
            "frames": int(sum(r.n_frames for r in recordings)),
            "corpus": str(corpus),
        }
        return self._finish("synth", [], [corpus], started, summary)

    def split(self, corpus: Optional[Path] = None) -> StageResult:
        """Stratified recording-level split of ``corpus`` (default: this run's synthetic corpus)."""
        started = time.perf_counter()
        if corpus is None:
            self.require("synth")
            corpus = self.stage_dir("synth") / "corpus"
        corpus = Path(corpus)
        if not corpus.is_dir():
            raise MissingArtifact(f"corpus directory {corpus} does not exist")
        recordings, qc = load_corpus(corpus, self.cfg.data.zero_eps)
        parts = split_recordings(recordings, self.cfg)
        rows = [
            {"recording_id": r.id, "label": r.label.symbol, "part": name, "frames": r.n_frames}
            for name in PARTS
            for r in parts[name]
        ]
        out = self.stage_dir("split") / "split.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows, columns=["recording_id", "label", "part", "frames"]).to_csv(out, index=False)
        summary = {
            "corpus": str(corpus.resolve()),
            **{name: len(parts[name]) for name in PARTS},
            "qc_rows_removed": int(sum(qc.rows_removed.values())),
            "qc_dropped": qc.dropped,
        }
        return self._finish("split", [corpus], [out], started, summary)

    def _load_split(self) -> Tuple[Dict[str, List[Recording]], List[Path]]:
        manifest = self.require("split")
        corpus = Path(manifest.summary["corpus"])
        if not corpus.is_dir():
            raise MissingArtifact(f"corpus directory {corpus} used by the split is gone")
        if path_digest(corpus) != manifest.inputs[0].sha256:
            raise StaleArtifact(f"corpus {corpus} changed after it was split; rerun split")
        split_csv = self.stage_dir("split") / "split.csv"
        table = pd.read_csv(split_csv, dtype=str)
        recordings, _ = load_corpus(corpus, self.cfg.data.zero_eps)
        by_id = {r.id: r for r in recordings}
        parts: Dict[str, List[Recording]] = {name: [] for name in PARTS}
        for row in table.itertuples(index=False):
            parts[row.part].append(by_id[row.recording_id])
        return parts, [split_csv, corpus]

    def segment(self) -> StageResult:
        started = time.perf_counter()
        recordings, inputs = self._load_split()
        parts = segment_parts(recordings, self.cfg.window.size)
        ensure_windows(parts)
        outputs = [
            save_windows(self.stage_dir("segment") / f"{name}.gsw", parts[name], {"part": name})
            for name in PARTS
        ]
        summary = {"window": self.cfg.window.size, **{name: len(parts[name]) for name in PARTS}}
        return self._finish("segment", inputs, outputs, started, summary)

    def augment(self) -> StageResult:
        started = time.perf_counter()
        parts, inputs = self._windows_of("segment")
        augmented = augment_parts(parts, self.cfg)
        outputs = [
            save_windows(self.stage_dir("augment") / f"{name}.gsw", augmented[name], {"part": name})
            for name in PARTS
        ]
        summary = {name: len(augmented[name]) for name in PARTS}
        return self._finish("augment", inputs, outputs, started, summary)

    def mfcc(self, dump: bool = False) -> StageResult:
        started = time.perf_counter()
        parts, inputs = self._windows_of("augment")
        directory = self.stage_dir("mfcc")
        outputs: List[Path] = []
        shapes: Dict[str, List[int]] = {}
        echo = dict(flatten_config(self.cfg.mfcc))
        for name in PARTS:
            features = mfcc_features(parts[name], self.cfg)
            outputs.append(save_features(directory / f"{name}.gsf", features, parts[name], self.cfg))
            shapes[name] = list(features.shape)
            if dump:
                blocks = directory / "blocks" / name
                for i, tensor in enumerate(features):
                    write_mfcc_block(blocks / f"{i:05d}.mfc", tensor, echo)
                outputs.append(blocks)
        return self._finish("mfcc", inputs, outputs, started, {"shapes": shapes, "dumped": dump})

    def train(self, model: str = "multibranch") -> StageResult:
        started = time.perf_counter()
        directory = self.stage_dir("train")
        directory.mkdir(parents=True, exist_ok=True)
        parts, inputs = self._windows_of("augment")
        features = None
        if model == "multibranch":
            self.require("mfcc")
            feature_paths = [self.stage_dir("mfcc") / f"{name}.gsf" for name in ("train", "val")]
            features = {name: load_features(p)[0] for name, p in zip(("train", "val"), feature_paths)}
            inputs = inputs + feature_paths
        trained = train_model(model, parts, self.cfg, features)
        outputs: List[Path] = []
        summary: Dict[str, Any] = {"model": model, **trained.summary}
        if trained.knn is not None:
            outputs.append(trained.knn.save(directory / "knn.gsk"))
            cv_path = directory / "cv.json"
            cv_path.write_text(json.dumps(trained.summary, indent=2) + "\n", encoding="utf-8")
            outputs.append(cv_path)
        else:
            assert trained.checkpoint is not None and trained.history is not None
            outputs.append(trained.checkpoint.save(directory / "checkpoint.gsc"))
            outputs.append(trained.history.to_csv(directory / "history.csv"))
            summary.update(
                epochs=len(trained.history),
                best_epoch=trained.history.best_epoch,
                stopped_early=trained.history.stopped_early,
                best_val_acc=trained.checkpoint.metadata["best_val_acc"],
                generalization_gap=trained.history.generalization_gap,
            )
        return self._finish("train", inputs, outputs, started, summary)

    def load_trained(self) -> TrainedModel:
        manifest = self.require("train")
        kind = manifest.summary["model"]
        directory = self.stage_dir("train")
        if kind == "knn":
            knn = KnnModel.load(directory / "knn.gsk")
            return TrainedModel(kind, knn=knn, summary=manifest.summary)
        return TrainedModel(
            kind,
            checkpoint=Checkpoint.load(directory / "checkpoint.gsc"),
            history=History.from_csv(directory / "history.csv"),
            summary=manifest.summary,
        )

    def evaluate(self) -> StageResult:
        started = time.perf_counter()
        trained = self.load_trained()
        parts, inputs = self._windows_of("augment")
        inputs = inputs + [Path(self._resolve(ref)) for ref in self.require("train").outputs]
        features = None
        if trained.kind == "multibranch":
            self.require("mfcc")
            test_path = self.stage_dir("mfcc") / "test.gsf"
            features = load_features(test_path)[0]
            inputs.append(test_path)
        report, predicted = evaluate_windows(trained, parts["test"], self.cfg, features)
        directory = self.stage_dir("evaluate")
        metrics_path = report.write(directory / "metrics.json")
        predictions_path = directory / "predictions.csv"
        pd.DataFrame(
            {
                "source_id": [win.source_id for win in parts["test"]],
                "true": [win.label.symbol for win in parts["test"]],
                "predicted": [label.symbol for label in labels_from_indices(predicted)],
            }
        ).to_csv(predictions_path, index=False)
        text_path = directory / "report.txt"
        text_path.write_text(classification_report_text(report) + "\n", encoding="utf-8")
        summary = {
            "model": trained.kind,
            "test_windows": len(parts["test"]),
            "accuracy": report.accuracy,
            "precision_macro": report.precision_macro,
            "precision_weighted": report.precision_weighted,
            "recall_macro": report.recall_macro,
            "f1_macro": report.f1_macro,
            "f1_weighted": report.f1_weighted,
        }
        outputs = [metrics_path, predictions_path, text_path]
        return self._finish("evaluate", inputs, outputs, started, summary)

    def report(self) -> StageResult:
        """SVG figures and a text summary from an evaluated run."""
        from .plots import plot_confusion, plot_history

        started = time.perf_counter()
        evaluated = self.require("evaluate")
        metrics_path = self.stage_dir("evaluate") / "metrics.json"
        report = MetricsReport.read(metrics_path)
        directory = self.stage_dir("report")
        cm = ConfusionMatrix(counts=np.asarray(report.confusion, dtype=np.int64))
        title = f"{evaluated.summary['model']} test set"
        outputs = [plot_confusion(cm, directory / "confusion.svg", title=title)]
        inputs = [metrics_path]
        history_path = self.stage_dir("train") / "history.csv"
        if evaluated.summary["model"] != "knn" and history_path.exists():
            history = History.from_csv(history_path)
            outputs.append(plot_history(history, directory / "training_curves.svg"))
            inputs.append(history_path)
        summary_path = directory / "summary.txt"
        summary_path.write_text(
            f"model: {evaluated.summary['model']}\n"
            f"test windows: {evaluated.summary['test_windows']}\n\n"
            + classification_report_text(report)
            + "\n",
            encoding="utf-8",
        )
        outputs.append(summary_path)
        return self._finish("report", inputs, outputs, started, {"figures": [p.name for p in outputs]})


# -- window-size ablation --------------------------------------------------


ABLATION_COLUMNS = [
    "window", "seed", "model", "chunks", "epochs", "accuracy", "precision", "recall", "f1",
]


def run_ablation(
    recordings: Sequence[Recording],
    cfg: RunConfig,
    windows: Optional[Sequence[int]] = None,
    model: Optional[str] = None,
    seeds: Optional[int] = None,
) -> pd.DataFrame:
    """Full split/segment/augment/train/evaluate per (window, seed); one row each."""
    windows = list(windows or cfg.ablation.windows)
    model = model or cfg.ablation.model
    seeds = seeds or cfg.ablation.seeds
    rows = []
    for w in windows:
        for s in range(seeds):
            run_seed = derive_seed(cfg.seed, "ablation", s)
            window_cfg = cfg.window.model_copy(update={"size": w})
            run_cfg = cfg.model_copy(update={"seed": run_seed, "window": window_cfg})
            parts = segment_parts(split_recordings(recordings, run_cfg), w)
            ensure_windows(parts)
            chunks = sum(len(parts[name]) for name in PARTS)
            augmented = augment_parts(parts, run_cfg)
            trained = train_model(model, augmented, run_cfg)
            report, _ = evaluate_windows(trained, augmented["test"], run_cfg)
            logger.info(
                "ablation w=%d seed=%d: %d chunks, accuracy %.4f", w, s, chunks, report.accuracy
            )
            rows.append(
                {
                    "window": w,
                    "seed": run_seed,
                    "model": model,
                    "chunks": chunks,
                    "epochs": trained.epochs,
                    "accuracy": report.accuracy,
                    "precision": report.precision_macro,
                    "recall": report.recall_macro,
                    "f1": report.f1_macro,
                }
            )
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)


def ablation_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Per-window means over seeds."""
    return (
        table.groupby("window", sort=True)[["chunks", "accuracy", "precision", "recall", "f1"]]
        .mean()
        .reset_index()
    )


__all__ = [
    "PARTS",
    "MODEL_KINDS",
    "split_recordings",
    "segment_parts",
    "ensure_windows",
    "augment_parts",
    "mfcc_features",
    "TrainedModel",
    "train_model",
    "predict_windows",
    "evaluate_windows",
    "path_digest",
    "ArtifactRef",
    "StageManifest",
    "StageResult",
    "save_features",
    "load_features",
    "Pipeline",
    "ABLATION_COLUMNS",
    "run_ablation",
    "ablation_summary",
]
