from __future__ import annotations

import hashlib
import zlib
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def stream_id(name: str) -> int:
    """Stable 32-bit id for a named random stream."""
    return zlib.crc32(name.encode("utf-8"))


def derive_seed(root: int, *keys: Union[int, str]) -> int:
    """Deterministically split ``root`` into an independent child seed."""
    entropy = [int(root) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(stream_id(k) if isinstance(k, str) else int(k) for k in keys)
    return int(np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def counter_rng(root: int, *counters: int) -> np.random.Generator:
    """Generator keyed by (root, counters...): same key, same stream, independent of call order."""
    entropy = [int(root) & 0xFFFFFFFFFFFFFFFF, *map(int, counters)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def root_seed(seed: SeedLike, fallback: int = 0) -> int:
    if seed is None:
        return fallback
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    return int(seed)


def section_seed(explicit: Optional[int], root: int, stage: str) -> int:
    return explicit if explicit is not None else derive_seed(root, stage)


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def text_digest(parts: Sequence[str]) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
    return digest.hexdigest()


__all__ = [
    "SeedLike",
    "stream_id",
    "derive_seed",
    "counter_rng",
    "root_seed",
    "section_seed",
    "file_digest",
    "text_digest",
]
