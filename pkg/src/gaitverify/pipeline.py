"""Shared preprocessing: recordings -> resampled, framed, z-scored frames."""

from __future__ import annotations

from .data.canonical import load_canonical_csv
from .signal import Frame, RawRecording, resample_linear, segment_frames, zscore

TARGET_HZ = 100.0


def frames_from_recordings(recordings: list[RawRecording]) -> list[Frame]:
    frames: list[Frame] = []
    for rec in recordings:
        uniform = resample_linear(rec, TARGET_HZ)
        frames.extend(zscore(f) for f in segment_frames(uniform))
    return frames


def load_normalized_frames(path) -> list[Frame]:
    return frames_from_recordings(load_canonical_csv(path))
