"""Maximally divergent interval detector.

Fits a univariate Gaussian to each candidate interval and to the rest of
the series, scores the interval by the length-weighted closed-form KL
divergence between the two fits, and assigns each timestamp the maximum
divergence over intervals covering it. Interval proposals based on
point-wise squared standardized deviations (Hotelling T^2) can replace the
full scan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScoreSeries, TimeSeries

VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class IntervalScore:
    start: int
    length: int
    divergence: float


def gaussian_kl(mu1: float, var1: float, mu2: float, var2: float) -> float:
    """KL divergence between two univariate Gaussians, N1 || N2."""
    var1 = max(var1, VAR_FLOOR)
    var2 = max(var2, VAR_FLOOR)
    return float(
        0.5 * np.log(var2 / var1)
        + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2)
        - 0.5
    )


def hotelling_proposals(series: TimeSeries, quantile: float = 0.99) -> np.ndarray:
    """Indices whose squared standardized deviation exceeds the empirical
    quantile of those scores. Empty for a (near-)constant series."""
    if not (0 < quantile < 1):
        raise ValueError("quantile must lie in (0, 1)")
    x = series.values
    var = x.var()
    if var < VAR_FLOOR:
        return np.array([], dtype=int)
    t2 = (x - x.mean()) ** 2 / var
    cut = np.quantile(t2, quantile)
    return np.flatnonzero(t2 > cut)


def _interval_stats(values: np.ndarray):
    """Prefix sums enabling O(1) mean/variance for any interval."""
    c1 = np.concatenate([[0.0], np.cumsum(values)])
    c2 = np.concatenate([[0.0], np.cumsum(values ** 2)])
    return c1, c2


def scan_intervals(series: TimeSeries, L_min: int, L_max: int,
                   use_proposals: bool = False,
                   proposal_quantile: float = 0.99):
    """Yield arrays (starts, L, divergences) for each candidate length."""
    x = series.values
    n = len(x)
    if L_max >= n:
        raise ValueError("L_max must be smaller than the series length")
    if not (1 <= L_min <= L_max):
        raise ValueError("invalid length range")
    c1, c2 = _interval_stats(x)
    total1, total2 = c1[-1], c2[-1]

    flagged = None
    if use_proposals:
        flagged = hotelling_proposals(series, proposal_quantile)

    for L in range(L_min, L_max + 1):
        if use_proposals:
            if flagged.size == 0:
                continue
            keep = np.zeros(n - L + 1, dtype=bool)
            for f in flagged:
                keep[max(0, f - L + 1):min(n - L, f) + 1] = True
            starts = np.flatnonzero(keep)
        else:
            starts = np.arange(n - L + 1)
        if starts.size == 0 or n - L < 1:
            continue
        s1 = c1[starts + L] - c1[starts]
        s2 = c2[starts + L] - c2[starts]
        mu_in = s1 / L
        var_in = np.maximum(s2 / L - mu_in ** 2, VAR_FLOOR)
        m = n - L
        mu_out = (total1 - s1) / m
        var_out = np.maximum((total2 - s2) / m - mu_out ** 2, VAR_FLOOR)
        kl = (0.5 * np.log(var_out / var_in)
              + (var_in + (mu_in - mu_out) ** 2) / (2.0 * var_out)
              - 0.5)
        yield starts, L, L * kl


def mdi_scan(series: TimeSeries, L_min: int, L_max: int,
             use_proposals: bool = False,
             proposal_quantile: float = 0.99) -> ScoreSeries:
    """Per-timestamp max divergence over all candidate intervals."""
    n = len(series)
    scores = np.zeros(n)
    for starts, L, div in scan_intervals(series, L_min, L_max,
                                         use_proposals, proposal_quantile):
        # Per-timestamp max over intervals of this length via a sliding
        # maximum of the divergence sequence aligned to interval starts.
        padded = np.full(n, -np.inf)
        padded[starts] = div
        # timestamp t is covered by interval starts in [t-L+1, t]
        ext = np.concatenate([np.full(L - 1, -np.inf), padded])
        cover = np.lib.stride_tricks.sliding_window_view(ext, L).max(axis=1)
        np.maximum(scores, np.where(np.isfinite(cover), cover, 0.0), out=scores)
    return ScoreSeries(np.maximum(scores, 0.0), "mdi")


def top_interval(series: TimeSeries, L_min: int, L_max: int,
                 use_proposals: bool = False,
                 proposal_quantile: float = 0.99) -> IntervalScore | None:
    """The single interval with the largest divergence."""
    best = None
    for starts, L, div in scan_intervals(series, L_min, L_max,
                                         use_proposals, proposal_quantile):
        k = int(np.argmax(div))
        if best is None or div[k] > best.divergence:
            best = IntervalScore(int(starts[k]), L, float(div[k]))
    return best
