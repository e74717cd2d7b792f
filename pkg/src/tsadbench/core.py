"""Core domain types and elementary series operations.

All detectors and the harness share these types. Instances are immutable
after construction and safe to hand to parallel workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Flat-window guard for z-normalization; windows with a standard deviation
# below this are treated as the all-zeros vector after z-normalization.
ZNORM_STD_FLOOR = 1e-8

ANOMALY_TYPES = frozenset({
    "amplitude_change",
    "flat",
    "frequency_change",
    "local_drop",
    "local_peak",
    "missing_drop",
    "missing_peak",
    "noise",
    "outlier",
    "reversed",
    "sampling_rate",
    "signal_shift",
    "smoothed_increase",
    "steep_increase",
    "time_shift",
    "time_warping",
    "unusual_pattern",
    "unknown",
})


@dataclass(frozen=True)
class TimeSeries:
    """Normalized univariate series with a single ground-truth anomaly segment.

    ``anomaly_start``/``anomaly_end`` are 0-based inclusive indices [a, b].
    Timestamps are implicit equidistant indices 0..len-1.
    """

    values: np.ndarray
    name: str
    anomaly_start: int
    anomaly_end: int
    anomaly_type: str = "unknown"
    train_end: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        n = len(values)
        if n < 1:
            raise ValueError("series must contain at least one value")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"non-finite value at index {bad}")
        a, b = self.anomaly_start, self.anomaly_end
        if not (0 <= a <= b < n):
            raise ValueError(f"invalid anomaly segment [{a}, {b}] for length {n}")
        if self.anomaly_type not in ANOMALY_TYPES:
            raise ValueError(f"unknown anomaly type {self.anomaly_type!r}")

    def __len__(self):
        return len(self.values)

    @property
    def truth(self) -> np.ndarray:
        """Boolean ground-truth mask over timestamps."""
        mask = np.zeros(len(self.values), dtype=bool)
        mask[self.anomaly_start:self.anomaly_end + 1] = True
        return mask


@dataclass(frozen=True)
class Subsequence:
    """View of a contiguous window [start, end) of a parent value array."""

    parent: np.ndarray
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end <= len(self.parent)):
            raise ValueError(
                f"invalid window [{self.start}, {self.end}) for length {len(self.parent)}"
            )

    def __len__(self):
        return self.end - self.start

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.parent)[self.start:self.end]


@dataclass(frozen=True)
class ScoreSeries:
    """Per-timestamp anomaly scores; strictly larger means more anomalous."""

    scores: np.ndarray
    detector_id: str

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class Detection:
    """Binary per-timestamp labels and the threshold that produced them."""

    labels: np.ndarray
    threshold: float
    score_source: str

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=bool)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)


def normalize(values) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant series maps to all 0.5."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ValueError(f"non-finite value at index {bad}")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def expand_window_scores(window_scores, window_length: int, stride: int,
                         series_length: int, detector_id: str = "") -> ScoreSeries:
    """Map per-window scores back to per-timestamp scores.

    Window k covers [k*stride, k*stride + window_length). Each timestamp
    receives the max score over covering windows; timestamps covered by no
    window receive the minimum observed window score.
    """
    if stride <= 0 or window_length <= 0:
        raise ValueError("stride and window_length must be positive")
    window_scores = np.asarray(window_scores, dtype=float)
    out = np.full(series_length, -np.inf)
    for k, s in enumerate(window_scores):
        lo = k * stride
        hi = min(lo + window_length, series_length)
        if lo >= series_length:
            break
        np.maximum(out[lo:hi], s, out=out[lo:hi])
    if window_scores.size:
        out[np.isinf(out)] = window_scores.min()
    else:
        out[:] = 0.0
    return ScoreSeries(out, detector_id)


def znormalize(window: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance transform; flat windows become all zeros."""
    window = np.asarray(window, dtype=float)
    std = window.std()
    if std < ZNORM_STD_FLOOR:
        return np.zeros_like(window)
    return (window - window.mean()) / std


def znorm_distance(s1: Subsequence, s2: Subsequence) -> float:
    """Euclidean distance between the z-normalized windows."""
    if len(s1) != len(s2):
        raise ValueError("subsequences must have equal length")
    d = znormalize(s1.values) - znormalize(s2.values)
    return float(np.sqrt(np.dot(d, d)))
