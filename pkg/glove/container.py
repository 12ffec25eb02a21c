"""Binary tensor containers shared by checkpoints, kNN models and window caches.

Layout (all integers little-endian unsigned 32-bit)::

    magic (4 bytes) | version | fingerprint (32 bytes) | tensor count
    per tensor: name length | UTF-8 name | rank | dims... | float64 LE values (C order)
    metadata length | UTF-8 JSON text

The MFCC dump format is separate: magic ``MFC1``, three dims, float32 LE values.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Mapping, Optional

import numpy as np

from .errors import ContainerFormatError

FORMAT_VERSION = 1

CHECKPOINT_MAGIC = b"GSC1"
KNN_MAGIC = b"GSK1"
WINDOWS_MAGIC = b"GSW1"
FEATURES_MAGIC = b"GSF1"
MFCC_MAGIC = b"MFC1"

_U32 = struct.Struct("<I")


def fingerprint(spec: str) -> bytes:
    return hashlib.sha256(spec.encode("utf-8")).digest()


@dataclass
class Container:
    magic: bytes
    fingerprint: bytes
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    version: int = FORMAT_VERSION


def _write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(_U32.pack(value))


def _read_exact(fh: BinaryIO, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise ContainerFormatError("unexpected end of container")
    return data


def _read_u32(fh: BinaryIO) -> int:
    return _U32.unpack(_read_exact(fh, 4))[0]


def write_container(path: Path | str, container: Container) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if len(container.magic) != 4 or len(container.fingerprint) != 32:
        raise ContainerFormatError("magic must be 4 bytes and fingerprint 32 bytes")
    with open(path, "wb") as fh:
        fh.write(container.magic)
        _write_u32(fh, container.version)
        fh.write(container.fingerprint)
        _write_u32(fh, len(container.tensors))
        for name, array in container.tensors.items():
            encoded = name.encode("utf-8")
            values = np.ascontiguousarray(array, dtype="<f8")
            _write_u32(fh, len(encoded))
            fh.write(encoded)
            _write_u32(fh, values.ndim)
            for dim in values.shape:
                _write_u32(fh, dim)
            fh.write(values.tobytes(order="C"))
        meta = json.dumps(container.metadata, sort_keys=True).encode("utf-8")
        _write_u32(fh, len(meta))
        fh.write(meta)
    return path


def read_container(path: Path | str, expected_magic: Optional[bytes] = None) -> Container:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if expected_magic is not None and magic != expected_magic:
            raise ContainerFormatError(f"{path}: expected magic {expected_magic!r}, found {magic!r}")
        version = _read_u32(fh)
        if version != FORMAT_VERSION:
            raise ContainerFormatError(f"{path}: unsupported container version {version}")
        digest = _read_exact(fh, 32)
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(_read_u32(fh)):
            name = _read_exact(fh, _read_u32(fh)).decode("utf-8")
            rank = _read_u32(fh)
            shape = tuple(_read_u32(fh) for _ in range(rank))
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(fh, 8 * count)
            tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        metadata = json.loads(_read_exact(fh, _read_u32(fh)).decode("utf-8"))
    return Container(
        magic=magic, fingerprint=digest, tensors=tensors, metadata=metadata, version=version
    )


def write_mfcc_block(path: Path | str, tensor: np.ndarray, config_echo: Mapping[str, Any]) -> Path:
    """Flat float32 dump of one (5, frames, coeffs) tensor plus a ``.txt`` config sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(tensor, dtype="<f4")
    if values.ndim != 3:
        raise ContainerFormatError("MFCC blocks hold exactly three dimensions")
    with open(path, "wb") as fh:
        fh.write(MFCC_MAGIC)
        for dim in values.shape:
            _write_u32(fh, dim)
        fh.write(values.tobytes(order="C"))
    sidecar = path.with_suffix(".txt")
    sidecar.write_text("".join(f"{k} = {v}\n" for k, v in config_echo.items()), encoding="utf-8")
    return path


def read_mfcc_block(path: Path | str) -> np.ndarray:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MFCC_MAGIC:
            raise ContainerFormatError(f"{path}: not an MFC1 block")
        shape = tuple(_read_u32(fh) for _ in range(3))
        raw = _read_exact(fh, 4 * int(np.prod(shape)))
    return np.frombuffer(raw, dtype="<f4").reshape(shape)


__all__ = [
    "FORMAT_VERSION",
    "CHECKPOINT_MAGIC",
    "KNN_MAGIC",
    "WINDOWS_MAGIC",
    "FEATURES_MAGIC",
    "MFCC_MAGIC",
    "Container",
    "fingerprint",
    "write_container",
    "read_container",
    "write_mfcc_block",
    "read_mfcc_block",
]
