"""Synthetic five-finger pulse recordings with class-specific finger patterns and rhythms."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import SYNTH_PRESETS, SynthConfig
from .data import Recording, write_manifest, write_recording
from .labels import N_CHANNELS, SYMBOLS, ClassLabel
from .utils import counter_rng, root_seed

logger = logging.getLogger(__name__)

# thumb, index, middle, ring, little
PATTERNS: Dict[str, str] = {
    "1": "01000",
    "2": "01100",
    "3": "11100",
    "4": "01111",
    "5": "11111",
    "A": "10000",
    "B": "10011",
    "C": "00110",
    "D": "01001",
    "E": "00011",
    "F": "10111",
}

# The negative lobe trails the positive one by this many pulse widths.
_UNDERSHOOT_DELAY = 2.5
_UNDERSHOOT_SPREAD = 1.5


@dataclass(frozen=True)
class SignTemplate:
    symbol: str
    active: Tuple[bool, ...]
    period_s: float
    finger_lag: float

    @property
    def label(self) -> ClassLabel:
        return ClassLabel(self.symbol)

    def period_samples(self, sample_rate: float) -> float:
        return self.period_s * sample_rate


def sign_templates() -> List[SignTemplate]:
    """One template per sign; each has its own pulse period and finger lag."""
    templates = []
    for index, symbol in enumerate(SYMBOLS):
        active = tuple(bit == "1" for bit in PATTERNS[symbol])
        templates.append(
            SignTemplate(
                symbol=symbol,
                active=active,
                period_s=0.20 + 0.03 * index,
                finger_lag=0.08 * (index % 4),
            )
        )
    return templates


def biphasic_pulse(
    t: np.ndarray, center: float, amplitude: float, width: float, undershoot: float
) -> np.ndarray:
    """Gaussian positive lobe followed by a wider negative lobe scaled by ``undershoot``."""
    main = np.exp(-0.5 * ((t - center) / width) ** 2)
    tail_center = center + _UNDERSHOOT_DELAY * width
    tail = np.exp(-0.5 * ((t - tail_center) / (_UNDERSHOOT_SPREAD * width)) ** 2)
    return amplitude * (main - undershoot * tail)


def _pulse_train(
    length: int,
    template: SignTemplate,
    finger: int,
    cfg: SynthConfig,
    rng: np.random.Generator,
    phase: float,
) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    period = template.period_samples(cfg.sample_rate)
    signal = np.zeros(length)
    center = phase + template.finger_lag * period * finger
    while center < length + 3 * cfg.pulse_width:
        jitter = rng.uniform(-cfg.amplitude_jitter, cfg.amplitude_jitter)
        amplitude = cfg.amplitude_mean * (1.0 + jitter)
        signal += biphasic_pulse(t, center, amplitude, cfg.pulse_width, cfg.undershoot)
        center += period * (1.0 + rng.uniform(-cfg.timing_jitter, cfg.timing_jitter))
    return signal


def synth_recording(
    template: SignTemplate,
    cfg: SynthConfig,
    seed: int,
    index: int,
    class_index: Optional[int] = None,
) -> Recording:
    """One recording; its randomness depends only on (seed, class, index)."""
    class_index = template.label.index if class_index is None else class_index
    rng = counter_rng(seed, class_index, index)
    length = int(rng.integers(cfg.min_length, cfg.max_length + 1))
    period = template.period_samples(cfg.sample_rate)
    phase = rng.uniform(0.0, period) if cfg.random_phase else 0.25 * period
    samples = np.zeros((length, N_CHANNELS))
    for finger, active in enumerate(template.active):
        if active:
            samples[:, finger] = _pulse_train(length, template, finger, cfg, rng, phase)
    bound = cfg.amplitude_bound
    np.clip(samples, -bound, bound, out=samples)
    if cfg.noise_sigma > 0:
        limit = 6.0 * cfg.noise_sigma
        samples += np.clip(rng.normal(0.0, cfg.noise_sigma, size=samples.shape), -limit, limit)
    return Recording(
        id=f"{directory_name(template.label)}/rec_{index:03d}",
        label=template.label,
        samples=samples,
    )


def directory_name(label: ClassLabel) -> str:
    return f"digit_{label.symbol}" if label.symbol.isdigit() else f"letter_{label.symbol.lower()}"


def synth_config(preset: str = "default", **overrides: object) -> SynthConfig:
    if preset not in SYNTH_PRESETS:
        raise ValueError(f"unknown synth preset {preset!r}; choose from {sorted(SYNTH_PRESETS)}")
    return SynthConfig(**{**SYNTH_PRESETS[preset], **overrides})


def generate_corpus(cfg: Optional[SynthConfig] = None, seed: Optional[int] = None) -> List[Recording]:
    """``recordings_per_class`` recordings for each of the 11 signs, deterministic per seed."""
    cfg = cfg or SynthConfig()
    root = root_seed(cfg.rng_seed if cfg.rng_seed is not None else seed)
    recordings = [
        synth_recording(template, cfg, root, i, class_index)
        for class_index, template in enumerate(sign_templates())
        for i in range(cfg.recordings_per_class)
    ]
    logger.info(
        "generated %d synthetic recordings (%d per class, noise sigma %.3f)",
        len(recordings),
        cfg.recordings_per_class,
        cfg.noise_sigma,
    )
    return recordings


def write_corpus(recordings: Sequence[Recording], root: Path | str) -> Path:
    """CSV per recording under one directory per sign, plus ``manifest.csv``."""
    root = Path(root)
    entries = []
    for recording in recordings:
        path = root / f"{recording.id}.csv"
        write_recording(recording, path)
        entries.append((path, recording.label))
    manifest = write_manifest(root, entries)
    logger.info("wrote %d recordings to %s", len(entries), root)
    return manifest


__all__ = [
    "PATTERNS",
    "SignTemplate",
    "sign_templates",
    "biphasic_pulse",
    "synth_recording",
    "directory_name",
    "synth_config",
    "generate_corpus",
    "write_corpus",
]
