"""Per-sensor MFCC features: framing, FFT power spectrum, mel filter bank, log, DCT-II."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .config import MfccConfig
from .errors import DegenerateFilter, SequenceTooShort, ShapeMismatch
from .labels import N_CHANNELS
from .preprocess import SequenceWindow

logger = logging.getLogger(__name__)


def hamming(length: int) -> np.ndarray:
    """Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (L - 1))."""
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def frame_signal(x: np.ndarray, cfg: MfccConfig) -> np.ndarray:
    """Overlapping Hamming-weighted frames, shape (n_frames, frame_len)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < cfg.frame_len:
        raise SequenceTooShort(x.shape[0], cfg.frame_len)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_len)[:: cfg.hop]
    return frames * hamming(cfg.frame_len)


@lru_cache(maxsize=8)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Iterative decimation-in-time FFT along the last axis (length must be a power of two)."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ShapeMismatch("fft length", "a power of two", n)
    out = x[..., _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(*out.shape[:-1], n // size, size)
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * twiddle
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        out = blocks.reshape(*out.shape[:-1], n)
        size *= 2
    return out


def naive_dft(x: np.ndarray) -> np.ndarray:
    """O(n^2) reference transform along the last axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T


def power_spectrum(frames: np.ndarray, n_fft: int = 32) -> np.ndarray:
    """P = |FFT|^2 / n_fft over the n_fft/2 + 1 non-negative bins; frames are zero-padded."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[-1] > n_fft:
        raise ShapeMismatch("frame length", f"<= {n_fft}", frames.shape[-1])
    if frames.shape[-1] < n_fft:
        pad = [(0, 0)] * (frames.ndim - 1) + [(0, n_fft - frames.shape[-1])]
        frames = np.pad(frames, pad)
    spectrum = fft_radix2(frames)[..., : n_fft // 2 + 1]
    return (spectrum.real**2 + spectrum.imag**2) / n_fft


def mel(f: float | np.ndarray) -> float | np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_inv(m: float | np.ndarray) -> float | np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class FilterBank:
    weights: np.ndarray
    edges_hz: np.ndarray
    bin_hz: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def response(self, m: int, freqs: np.ndarray | float) -> np.ndarray:
        """Gain of triangle ``m`` evaluated in continuous frequency."""
        f = np.asarray(freqs, dtype=np.float64)
        lo, center, hi = self.edges_hz[m], self.edges_hz[m + 1], self.edges_hz[m + 2]
        rising = (f - lo) / (center - lo)
        falling = (hi - f) / (hi - center)
        return np.maximum(0.0, np.minimum(rising, falling))


def build_filterbank(cfg: MfccConfig, strict: bool = False) -> FilterBank:
    """Triangles between mel-uniform edges, sampled at the FFT bin frequencies.

    With 40 bands over 17 bins several triangles fall between bins; they stay
    as zero rows so the output shape never depends on the sampling grid.
    """
    edges_mel = np.linspace(mel(cfg.f_min), mel(cfg.f_max), cfg.n_mels + 2)
    edges_hz = mel_inv(edges_mel)
    if np.any(np.diff(edges_hz) <= 0):
        raise DegenerateFilter("mel edge frequencies collapse onto each other")
    bin_hz = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.n_fft
    bank = FilterBank(weights=np.zeros((cfg.n_mels, cfg.n_bins)), edges_hz=edges_hz, bin_hz=bin_hz)
    for m in range(cfg.n_mels):
        bank.weights[m] = bank.response(m, bin_hz)
    bank.weights.setflags(write=False)
    empty = np.flatnonzero(~bank.weights.any(axis=1))
    if empty.size:
        if strict:
            raise DegenerateFilter(f"{empty.size} mel filters cover no FFT bin: {empty.tolist()}")
        logger.debug("%d of %d mel filters sample to zero rows", empty.size, cfg.n_mels)
    return bank


@lru_cache(maxsize=16)
def _cached_filterbank(cfg: MfccConfig) -> FilterBank:
    return build_filterbank(cfg)


@lru_cache(maxsize=32)
def dct_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    matrix = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    scale = np.full((n, 1), np.sqrt(2.0 / n))
    scale[0, 0] = np.sqrt(1.0 / n)
    result = matrix * scale
    result.setflags(write=False)
    return result


def dct2_ortho(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Orthonormal DCT-II along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    moved = np.moveaxis(v, axis, -1)
    out = moved @ dct_matrix(moved.shape[-1]).T
    return np.moveaxis(out, -1, axis)


def channel_mfcc(x: np.ndarray, cfg: MfccConfig, bank: FilterBank | None = None) -> np.ndarray:
    """(n_frames, n_mfcc) coefficients for a single sensor channel."""
    bank = bank or _cached_filterbank(cfg)
    frames = frame_signal(x, cfg)
    spectrum = power_spectrum(frames, cfg.n_fft)
    log_mel = np.log(spectrum @ bank.weights.T + cfg.eps)
    if cfg.dct_axis == "temporal":
        # Transform each band's trajectory over frames, then keep the leading bands.
        return dct2_ortho(log_mel, axis=0)[:, : cfg.n_mfcc]
    return dct2_ortho(log_mel, axis=1)[:, : cfg.n_mfcc]


def mfcc(window: SequenceWindow | np.ndarray, cfg: MfccConfig) -> np.ndarray:
    """(5, n_frames, n_mfcc) tensor, each sensor transformed independently."""
    data = window.data if isinstance(window, SequenceWindow) else np.asarray(window, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != N_CHANNELS:
        raise ShapeMismatch("mfcc input", f"(w, {N_CHANNELS})", data.shape)
    if data.shape[0] < cfg.frame_len:
        raise SequenceTooShort(data.shape[0], cfg.frame_len)
    bank = _cached_filterbank(cfg)
    return np.stack([channel_mfcc(data[:, c], cfg, bank) for c in range(N_CHANNELS)])


def mfcc_batch(windows: Sequence[SequenceWindow] | np.ndarray, cfg: MfccConfig) -> np.ndarray:
    if len(windows) == 0:
        return np.zeros((0, N_CHANNELS, 0, cfg.n_mfcc))
    return np.stack([mfcc(win, cfg) for win in windows])


__all__ = [
    "hamming",
    "frame_signal",
    "fft_radix2",
    "naive_dft",
    "power_spectrum",
    "mel",
    "mel_inv",
    "FilterBank",
    "build_filterbank",
    "dct_matrix",
    "dct2_ortho",
    "channel_mfcc",
    "mfcc",
    "mfcc_batch",
]
