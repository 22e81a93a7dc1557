"""Raw recordings to normalized fixed-length frames, plus cycle statistics.

The pipeline order is resample_linear -> segment_frames -> zscore. All
functions are pure: they never mutate their inputs and are safe to call
in parallel across recordings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

FRAME_LEN = 128
N_CHANNELS = 3

# Channel stdev below this is treated as a sensor dropout: the channel is
# zeroed instead of dividing by ~0.
DEGENERATE_STDEV = 1e-8


@dataclass(frozen=True)
class RawRecording:
    """One continuous tri-axial recording of a subject in a session."""

    subject_id: str
    session_id: str
    recording_id: str
    timestamps: np.ndarray  # seconds, strictly increasing, shape (n,)
    samples: np.ndarray     # shape (n, 3): ax, ay, az

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        xs = np.asarray(self.samples, dtype=np.float64)
        if ts.ndim != 1 or ts.size == 0:
            raise InvalidInputError("recording must contain at least one sample")
        if xs.shape != (ts.size, N_CHANNELS):
            raise InvalidInputError(
                f"samples shape {xs.shape} does not match {ts.size} timestamps x {N_CHANNELS} channels"
            )
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(xs))):
            raise InvalidInputError("recording contains non-finite values")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise InvalidInputError(
                f"timestamps must be strictly increasing (recording {self.recording_id!r})"
            )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "samples", xs)

    def __len__(self):
        return self.timestamps.size

    @property
    def key(self):
        return (self.subject_id, self.session_id, self.recording_id)


@dataclass(frozen=True)
class Frame:
    """A 128x3 window of one recording.

    ``source`` is (subject_id, session_id, recording_id, frame_index).
    Values are raw after segment_frames and normalized after zscore.
    """

    values: np.ndarray
    source: tuple[str, str, str, int]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (FRAME_LEN, N_CHANNELS):
            raise InvalidInputError(f"frame must be {FRAME_LEN}x{N_CHANNELS}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("frame contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def subject_id(self):
        return self.source[0]

    @property
    def session_id(self):
        return self.source[1]

    @property
    def recording_id(self):
        return self.source[2]

    @property
    def frame_index(self):
        return self.source[3]


@dataclass(frozen=True)
class CycleAnnotation:
    """Step-cycle boundaries (sample indices) for one recording."""

    subject_id: str
    session_id: str
    recording_id: str
    boundaries: np.ndarray  # strictly increasing sample indices

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.int64)
        if b.ndim != 1 or b.size < 2:
            raise InvalidInputError("annotation needs at least two boundaries (one cycle)")
        if not np.all(np.diff(b) >= 1):
            raise InvalidInputError(
                f"cycle boundaries must be strictly increasing (recording {self.recording_id!r})"
            )
        object.__setattr__(self, "boundaries", b)

    @property
    def cycle_lengths(self):
        return np.diff(self.boundaries)


@dataclass
class CycleStats:
    """Cycle-length summary over a set of annotations."""

    mean: float
    median: float
    histogram: dict[int, int]
    lengths: np.ndarray = field(repr=False)

    def coverage_at(self, frame_len: int) -> float:
        """Fraction of cycles fully covered by a frame of ``frame_len`` samples."""
        return float(np.mean(self.lengths <= frame_len))


def resample_linear(rec: RawRecording, target_hz: float = 100.0) -> RawRecording:
    """Resample a recording onto a uniform grid by linear interpolation.

    The grid starts at the first timestamp and steps by 1/target_hz; the
    output has floor((t_last - t_first) * target_hz) + 1 samples. Already
    uniform input at target_hz is returned unchanged up to 1e-9.
    """
    if target_hz <= 0:
        raise InvalidInputError(f"target_hz must be positive, got {target_hz}")
    if len(rec) < 2:
        raise InvalidInputError("resampling needs at least 2 samples")
    t = rec.timestamps
    # The 1e-9 guard keeps n stable when (t_last - t_first) * hz lands a few
    # ulps below an integer, which is what makes resampling idempotent.
    n_out = int(np.floor((t[-1] - t[0]) * target_hz + 1e-9)) + 1
    grid = t[0] + np.arange(n_out, dtype=np.float64) / target_hz
    out = np.empty((n_out, N_CHANNELS), dtype=np.float64)
    for c in range(N_CHANNELS):
        out[:, c] = np.interp(grid, t, rec.samples[:, c])
    return RawRecording(rec.subject_id, rec.session_id, rec.recording_id, grid, out)


def _check_uniform(rec: RawRecording, hz: float):
    dt = np.diff(rec.timestamps)
    if dt.size and np.max(np.abs(dt - 1.0 / hz)) > 1e-6:
        raise InvalidInputError(
            f"recording {rec.recording_id!r} is not uniformly sampled at {hz:g} Hz"
        )


def segment_frames(rec: RawRecording, frame_len: int = FRAME_LEN) -> list[Frame]:
    """Cut a uniform recording into consecutive non-overlapping frames.

    The trailing remainder shorter than ``frame_len`` is discarded; a
    recording shorter than one frame yields an empty list.
    """
    if frame_len < 1:
        raise InvalidInputError(f"frame_len must be >= 1, got {frame_len}")
    _check_uniform(rec, 100.0)
    n_frames = len(rec) // frame_len
    frames = []
    for i in range(n_frames):
        chunk = rec.samples[i * frame_len:(i + 1) * frame_len]
        frames.append(Frame(chunk.copy(), (rec.subject_id, rec.session_id, rec.recording_id, i)))
    return frames


def zscore(frame: Frame) -> Frame:
    """Normalize each channel to zero mean / unit stdev within the frame.

    Uses the population stdev (divide by n). A channel with stdev below
    DEGENERATE_STDEV is set to all zeros rather than erroring, so sensor
    dropouts do not abort a pipeline.
    """
    v = frame.values
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    out = np.zeros_like(v)
    live = std >= DEGENERATE_STDEV
    out[:, live] = (v[:, live] - mean[live]) / std[live]
    return Frame(out, frame.source)


def cycle_stats(annotations: list[CycleAnnotation]) -> CycleStats:
    """Aggregate cycle-length mean, median, histogram and coverage."""
    if not annotations:
        raise InvalidInputError("cycle_stats needs at least one annotation")
    lengths = np.concatenate([a.cycle_lengths for a in annotations])
    values, counts = np.unique(lengths, return_counts=True)
    histogram = {int(v): int(c) for v, c in zip(values, counts)}
    return CycleStats(
        mean=float(np.mean(lengths)),
        median=float(np.median(lengths)),
        histogram=histogram,
        lengths=lengths,
    )
