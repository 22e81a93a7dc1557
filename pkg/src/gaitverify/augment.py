"""Frame-level augmentations used during feature learning.

Augmentation operates on z-scored frames: the +/-0.2 noise range is only
meaningful after normalization. Each operation takes an explicit RNG so
parallel callers can use independent streams.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .signal import Frame

AUGMENTATION_KINDS = ("none", "random_noise", "circular_shift")

# CLI spellings accepted next to the canonical names.
_ALIASES = {"rnd": "random_noise", "cshift": "circular_shift"}


def normalize_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in AUGMENTATION_KINDS:
        raise InvalidInputError(f"unknown augmentation kind {kind!r}")
    return kind


def add_uniform_noise(frame: Frame, amplitude: float = 0.2,
                      rng: np.random.Generator | None = None) -> Frame:
    """Add an independent Uniform(-amplitude, +amplitude) draw to every element."""
    if amplitude <= 0:
        raise InvalidInputError(f"amplitude must be positive, got {amplitude}")
    if rng is None:
        rng = np.random.default_rng()
    noise = rng.uniform(-amplitude, amplitude, size=frame.values.shape)
    return Frame(frame.values + noise, frame.source)


def circular_shift(frame: Frame, k: int) -> Frame:
    """Rotate all channels left so the output starts at (1-based) sample k.

    Valid k is 2..n-1, which guarantees the result is never the identity
    permutation.
    """
    n = frame.values.shape[0]
    if not 2 <= k <= n - 1:
        raise InvalidInputError(f"shift position k={k} outside 2..{n - 1}")
    return Frame(np.roll(frame.values, -(k - 1), axis=0), frame.source)


def augment_dataset(frames: list[Frame], kind: str,
                    rng: np.random.Generator | None = None) -> list[Frame]:
    """Double a dataset: the originals followed by one augmented copy of each.

    random_noise draws a fresh noise field per frame; circular_shift draws
    a fresh position k per frame (the same k for all three channels of
    that frame).
    """
    kind = normalize_kind(kind)
    if kind == "none":
        raise InvalidInputError("augment_dataset requires an actual augmentation kind")
    if rng is None:
        rng = np.random.default_rng()
    augmented = []
    for frame in frames:
        if kind == "random_noise":
            augmented.append(add_uniform_noise(frame, rng=rng))
        else:
            n = frame.values.shape[0]
            k = int(rng.integers(2, n))  # uniform over {2, ..., n-1}
            augmented.append(circular_shift(frame, k))
    return list(frames) + augmented
