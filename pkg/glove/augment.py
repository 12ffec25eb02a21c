from __future__ import annotations

import logging
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .config import AugmentConfig
from .errors import DataError, NonMonotoneWarp
from .preprocess import SequenceWindow
from .utils import SeedLike, counter_rng, root_seed

logger = logging.getLogger(__name__)

_MAX_WARP_DRAWS = 10


def add_noise(win: SequenceWindow, sigma: float, rng: np.random.Generator) -> SequenceWindow:
    if sigma < 0:
        raise DataError("noise sigma must be >= 0")
    if sigma == 0:
        return replace(win, data=win.data.copy())
    return replace(win, data=win.data + rng.normal(0.0, sigma, size=win.data.shape))


def _spline_path(w: int, sigma: float, knots: int, rng: np.random.Generator) -> np.ndarray:
    anchors = np.linspace(0.0, w - 1.0, knots + 2)
    displacement = np.zeros(knots + 2)
    displacement[1:-1] = rng.normal(0.0, sigma * w / knots, size=knots)
    spline = CubicSpline(anchors, anchors + displacement, bc_type="natural")
    tau = np.clip(spline(np.arange(w, dtype=np.float64)), 0.0, w - 1.0)
    tau[0], tau[-1] = 0.0, w - 1.0
    return tau


def _warp_path(w: int, sigma: float, knots: int, rng: np.random.Generator) -> np.ndarray:
    tau = _spline_path(w, sigma, knots, rng)
    if np.any(np.diff(tau) < 0):
        raise NonMonotoneWarp(f"warp path of length {w} folds back on itself")
    return tau


def time_warp(
    win: SequenceWindow,
    sigma: float,
    knots: int,
    rng: np.random.Generator,
) -> SequenceWindow:
    """Resample every channel along one smooth monotone time remapping."""
    w = win.w
    if w < 4:
        raise DataError("time warp needs windows of at least 4 frames")
    if sigma == 0:
        return replace(win, data=win.data.copy())
    tau: Optional[np.ndarray] = None
    for _ in range(_MAX_WARP_DRAWS):
        try:
            tau = _warp_path(w, sigma, knots, rng)
            break
        except NonMonotoneWarp:
            continue
    if tau is None:
        tau = np.maximum.accumulate(_spline_path(w, sigma, knots, rng))
    grid = np.arange(w, dtype=np.float64)
    warped = np.column_stack(
        [np.interp(tau, grid, win.data[:, c]) for c in range(win.data.shape[1])]
    )
    return replace(win, data=warped)


def magnitude_scale(
    win: SequenceWindow,
    rng: Optional[np.random.Generator] = None,
    lo: float = 0.9,
    hi: float = 1.1,
    factor: Optional[float] = None,
) -> SequenceWindow:
    """Multiply all channels by one shared factor drawn from [lo, hi]."""
    if factor is None:
        if rng is None:
            raise DataError("magnitude_scale needs an rng or an explicit factor")
        factor = float(rng.uniform(lo, hi))
    return replace(win, data=win.data * factor)


def temporal_shift(
    win: SequenceWindow,
    rng: Optional[np.random.Generator] = None,
    shift_max: int = 10,
    offset: Optional[int] = None,
) -> SequenceWindow:
    """Circular shift of all channels by the same offset in [-shift_max, shift_max]."""
    if offset is None:
        if rng is None:
            raise DataError("temporal_shift needs an rng or an explicit offset")
        if win.w <= shift_max:
            raise DataError(f"window of {win.w} frames cannot take shifts up to {shift_max}")
        offset = int(rng.integers(-shift_max, shift_max + 1))
    return replace(win, data=np.roll(win.data, offset, axis=0))


def augment_window(
    win: SequenceWindow, cfg: AugmentConfig, rng: np.random.Generator
) -> SequenceWindow:
    """One variant: noise, warp, scale, shift in that order, each behind its own coin flip."""
    out = replace(win, data=win.data.copy(), source_id=win.source_id)
    if rng.random() < cfg.noise_p:
        out = add_noise(out, cfg.noise_sigma, rng)
    if rng.random() < cfg.warp_p:
        out = time_warp(out, cfg.warp_sigma, cfg.warp_knots, rng)
    if rng.random() < cfg.scale_p:
        out = magnitude_scale(out, rng, cfg.scale_lo, cfg.scale_hi)
    if rng.random() < cfg.shift_p:
        out = temporal_shift(out, rng, cfg.shift_max)
    return out


def augment_dataset(
    windows: Sequence[SequenceWindow],
    cfg: AugmentConfig,
    rng: SeedLike = None,
) -> List[SequenceWindow]:
    """Originals followed by ``variants_per_sample`` augmented copies of each."""
    seed = root_seed(rng if rng is not None else cfg.rng_seed)
    out: List[SequenceWindow] = list(windows)
    for index, win in enumerate(windows):
        for variant in range(cfg.variants_per_sample):
            augmented = augment_window(win, cfg, counter_rng(seed, index, variant))
            out.append(replace(augmented, source_id=f"{win.source_id}~aug{variant}"))
    logger.info(
        "augmented %d windows into %d (%d variants each)",
        len(windows),
        len(out),
        cfg.variants_per_sample,
    )
    return out


__all__ = [
    "add_noise",
    "time_warp",
    "magnitude_scale",
    "temporal_shift",
    "augment_window",
    "augment_dataset",
]
