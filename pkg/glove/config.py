from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


@dataclass
class Settings:
    run_root: Path = field(default_factory=lambda: Path("runs"))
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        run_root = Path(os.getenv("GLOVE_RUN_ROOT", "runs"))
        log_level = os.getenv("GLOVE_LOG_LEVEL", cls.log_level).upper()
        settings = cls(run_root=run_root, log_level=log_level)
        settings.run_root.mkdir(parents=True, exist_ok=True)
        return settings


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_env()


_NONE_STRINGS = {"none", "null", ""}


class Section(BaseModel):
    """Common base: frozen, unknown keys rejected, ``none`` strings mean ``None``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _none_strings(cls, data: Any) -> Any:
        if isinstance(data, Mapping):
            return {
                key: None if isinstance(value, str) and value.strip().lower() in _NONE_STRINGS else value
                for key, value in data.items()
            }
        return data


def _probability(value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    return value


class DataConfig(Section):
    zero_eps: float = Field(0.0, ge=0.0)


class SplitSpec(Section):
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    rng_seed: Optional[int] = None

    @model_validator(mode="after")
    def _fractions(self) -> "SplitSpec":
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fracs) or not math.isclose(sum(fracs), 1.0, abs_tol=1e-9):
            raise ValueError("split fractions must be non-negative and sum to 1.0")
        return self


class WindowConfig(Section):
    size: int = Field(200, ge=1)
    per_sequence_normalize: bool = True
    scaler_eps: float = Field(1e-8, gt=0.0)


class MfccConfig(Section):
    frame_len: int = Field(32, ge=1)
    hop: int = Field(8, ge=1)
    n_fft: int = 32
    n_mels: int = Field(40, ge=1)
    n_mfcc: int = Field(12, ge=1)
    f_min: float = Field(0.0, ge=0.0)
    f_max: float = 50.0
    sample_rate: float = Field(100.0, gt=0.0)
    eps: float = Field(1e-10, gt=0.0)
    dct_axis: Literal["temporal", "mel"] = "temporal"

    @model_validator(mode="after")
    def _consistent(self) -> "MfccConfig":
        if self.n_fft < self.frame_len:
            raise ValueError("n_fft must be >= frame_len")
        if self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two")
        if self.f_max > self.sample_rate / 2:
            raise ValueError("f_max must not exceed the Nyquist frequency")
        if self.f_max <= self.f_min:
            raise ValueError("f_max must be greater than f_min")
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc must be <= n_mels")
        return self

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def n_frames(self, length: int) -> int:
        if length < self.frame_len:
            return 0
        return 1 + (length - self.frame_len) // self.hop


class AugmentConfig(Section):
    noise_sigma: float = Field(0.02, ge=0.0)
    noise_p: float = 0.7
    warp_sigma: float = Field(0.2, ge=0.0)
    warp_p: float = 0.6
    warp_knots: int = Field(4, ge=1)
    scale_lo: float = 0.9
    scale_hi: float = 1.1
    scale_p: float = 0.7
    shift_max: int = Field(10, ge=0)
    shift_p: float = 0.5
    variants_per_sample: int = Field(2, ge=0)
    augment_validation: bool = True
    rng_seed: Optional[int] = None

    @field_validator("noise_p", "warp_p", "scale_p", "shift_p")
    @classmethod
    def _check_p(cls, value: float) -> float:
        return _probability(value)

    @model_validator(mode="after")
    def _scale_range(self) -> "AugmentConfig":
        if self.scale_lo > self.scale_hi:
            raise ValueError("scale_lo must be <= scale_hi")
        return self

    def disabled(self) -> "AugmentConfig":
        return self.model_copy(update={"noise_p": 0.0, "warp_p": 0.0, "scale_p": 0.0, "shift_p": 0.0})


class FocalLossParams(Section):
    alpha: float = Field(1.0, gt=0.0)
    gamma: float = Field(2.0, ge=0.0)


class AdamWParams(Section):
    lr: float = Field(1e-3, gt=0.0)
    weight_decay: float = Field(1e-4, ge=0.0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = Field(1e-8, gt=0.0)

    @model_validator(mode="after")
    def _betas(self) -> "AdamWParams":
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        return self


class CosineRestartSchedule(Section):
    T0: int = Field(10, ge=1)
    Tmult: int = Field(2, ge=1)
    eta_min: float = Field(0.0, ge=0.0)


class TrainConfig(Section):
    batch_size: int = Field(64, ge=1)
    max_epochs: int = Field(150, ge=1)
    early_stop_patience: int = Field(30, ge=0)
    optimizer: AdamWParams = AdamWParams()
    optimizer_kind: Literal["adamw", "adam"] = "adamw"
    schedule: Optional[CosineRestartSchedule] = CosineRestartSchedule()
    loss: FocalLossParams = FocalLossParams()
    loss_kind: Literal["focal", "cross_entropy"] = "focal"
    clip_max_norm: Optional[float] = 1.0
    rng_seed: Optional[int] = None

    @model_validator(mode="after")
    def _patience(self) -> "TrainConfig":
        if self.early_stop_patience > self.max_epochs:
            raise ValueError("early_stop_patience must be <= max_epochs")
        return self


def simplenn_defaults() -> TrainConfig:
    return TrainConfig(
        max_epochs=200,
        early_stop_patience=20,
        optimizer=AdamWParams(weight_decay=0.0),
        optimizer_kind="adam",
        schedule=None,
        loss_kind="cross_entropy",
        clip_max_norm=None,
    )


class KnnConfig(Section):
    k: int = Field(5, ge=1)
    weighting: Literal["distance", "uniform"] = "distance"
    cv_folds: int = Field(5, ge=2)


class SynthConfig(Section):
    sample_rate: float = Field(100.0, gt=0.0)
    min_length: int = Field(200, ge=1)
    max_length: int = Field(500, ge=1)
    recordings_per_class: int = Field(20, ge=3)
    noise_sigma: float = Field(0.05, ge=0.0)
    amplitude_mean: float = Field(1.0, gt=0.0)
    amplitude_jitter: float = Field(0.1, ge=0.0, lt=1.0)
    timing_jitter: float = Field(0.05, ge=0.0, lt=0.5)
    pulse_width: float = Field(2.5, gt=0.0)
    undershoot: float = Field(0.35, ge=0.0, le=1.0)
    random_phase: bool = False
    rng_seed: Optional[int] = None

    @model_validator(mode="after")
    def _lengths(self) -> "SynthConfig":
        if self.min_length > self.max_length:
            raise ValueError("min_length must be <= max_length")
        return self

    @property
    def amplitude_bound(self) -> float:
        return self.amplitude_mean * (1.0 + self.amplitude_jitter)


# Harder corpus: random pulse phase, drifting pulse timing and a heavier noise floor
# pull raw-window kNN down to roughly 0.6-0.85 while the spectra stay class-specific.
SYNTH_PRESETS: Dict[str, Dict[str, Any]] = {
    "default": {},
    "calibrated": {
        "noise_sigma": 0.12,
        "amplitude_jitter": 0.2,
        "timing_jitter": 0.08,
        "random_phase": True,
    },
}


class AblationConfig(Section):
    windows: List[int] = Field(default_factory=lambda: [50, 75, 100])
    model: Literal["simplenn", "knn", "multibranch"] = "simplenn"
    seeds: int = Field(3, ge=1)

    @field_validator("windows", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value


class RunConfig(Section):
    seed: int = 7
    data: DataConfig = DataConfig()
    split: SplitSpec = SplitSpec()
    window: WindowConfig = WindowConfig()
    mfcc: MfccConfig = MfccConfig()
    augment: AugmentConfig = AugmentConfig()
    train: TrainConfig = TrainConfig()
    simplenn: TrainConfig = Field(default_factory=simplenn_defaults)
    knn: KnnConfig = KnnConfig()
    synth: SynthConfig = SynthConfig()
    ablation: AblationConfig = AblationConfig()


# Sections each stage depends on, cumulative along the pipeline.
STAGE_SECTIONS: Dict[str, Sequence[str]] = {
    "synth": ("seed", "synth"),
    "split": ("seed", "data", "split"),
    "segment": ("seed", "data", "split", "window"),
    "augment": ("seed", "data", "split", "window", "augment"),
    "mfcc": ("seed", "data", "split", "window", "augment", "mfcc"),
    "train": ("seed", "data", "split", "window", "augment", "mfcc", "train", "simplenn", "knn"),
    "evaluate": ("seed", "data", "split", "window", "augment", "mfcc", "train", "simplenn", "knn"),
    "report": ("seed", "data", "split", "window", "augment", "mfcc", "train", "simplenn", "knn"),
}


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse flat ``a.b = value`` lines into a nested dict of strings."""
    tree: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        set_dotted(tree, key, value)
    return tree


def set_dotted(tree: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def flatten_config(cfg: BaseModel) -> List[tuple[str, str]]:
    items: List[tuple[str, str]] = []

    def walk(prefix: str, node: Any) -> None:
        if isinstance(node, BaseModel):
            for name in type(node).model_fields:
                walk(f"{prefix}.{name}" if prefix else name, getattr(node, name))
        else:
            items.append((prefix, _format_value(node)))

    walk("", cfg)
    return items


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{key} = {value}\n" for key, value in flatten_config(cfg))


def load_run_config(
    path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    extra: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Resolve file values, then ``key=value`` overrides, then dedicated CLI flags."""
    tree: Dict[str, Any] = {}
    if path is not None:
        tree = parse_config_text(Path(path).read_text(encoding="utf-8"))
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        set_dotted(tree, key, value)
    for key, value in (extra or {}).items():
        if value is not None:
            set_dotted(tree, key, value)
    return RunConfig.model_validate(tree)


def config_hash(cfg: RunConfig, sections: Sequence[str] = ()) -> str:
    lines = flatten_config(cfg)
    if sections:
        wanted = tuple(sections)
        lines = [(k, v) for k, v in lines if k.split(".", 1)[0] in wanted]
    digest = hashlib.sha256()
    for key, value in lines:
        digest.update(f"{key}={value}\n".encode("utf-8"))
    return digest.hexdigest()


__all__ = [
    "Settings",
    "get_settings",
    "DataConfig",
    "SplitSpec",
    "WindowConfig",
    "MfccConfig",
    "AugmentConfig",
    "FocalLossParams",
    "AdamWParams",
    "CosineRestartSchedule",
    "TrainConfig",
    "simplenn_defaults",
    "KnnConfig",
    "SynthConfig",
    "SYNTH_PRESETS",
    "AblationConfig",
    "RunConfig",
    "STAGE_SECTIONS",
    "parse_config_text",
    "dump_config",
    "flatten_config",
    "load_run_config",
    "config_hash",
]
