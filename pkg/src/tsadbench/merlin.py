"""Offline discord discovery over a range of subsequence lengths.

For each length L the discord is found with a two-phase search: a candidate
phase that keeps only subsequences whose running nearest non-self-match
distance stays at or above r, and a refinement phase that computes exact
nearest non-self-match distances for the survivors. The parameter r is
seeded at 2*sqrt(L) for the smallest length and halved on failure; later
lengths start from 99% of the previous length's discord distance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScoreSeries, TimeSeries, ZNORM_STD_FLOOR


@dataclass(frozen=True)
class DiscordResult:
    length: int
    start: int
    distance: float


def r_max(L: int) -> float:
    """Upper bound on any z-normalized Euclidean distance at length L."""
    if L < 1:
        raise ValueError("L must be >= 1")
    return 2.0 * np.sqrt(L)


def _znorm_matrix(values: np.ndarray, L: int) -> np.ndarray:
    """Rows are the z-normalized subsequences of length L (flat rows -> 0)."""
    n = len(values)
    m = n - L + 1
    windows = np.lib.stride_tricks.sliding_window_view(values, L)
    means = windows.mean(axis=1, keepdims=True)
    stds = windows.std(axis=1)
    out = np.zeros((m, L))
    ok = stds >= ZNORM_STD_FLOOR
    out[ok] = (windows[ok] - means[ok]) / stds[ok, None]
    return out


def _pair_dist(Z: np.ndarray, i: int, j: int) -> float:
    d = Z[i] - Z[j]
    return float(np.sqrt(np.dot(d, d)))


def _distances_to(Z: np.ndarray, idx: int) -> np.ndarray:
    """Distance from subsequence idx to every subsequence (including self)."""
    sq = np.sum(Z * Z, axis=1) + np.dot(Z[idx], Z[idx]) - 2.0 * (Z @ Z[idx])
    return np.sqrt(np.maximum(sq, 0.0))


def discords_at_length(series: TimeSeries, L: int, r: float,
                       _Z: np.ndarray | None = None) -> DiscordResult | None:
    """Find the discord at length L, or None when r is too large.

    Returns the subsequence maximizing the nearest non-self-match distance
    among those whose nearest non-self match is at distance >= r.
    """
    values = series.values
    n = len(values)
    if not (1 <= L < n / 2):
        raise ValueError("need 1 <= L < series length / 2")
    if r <= 0:
        raise ValueError("r must be positive")
    Z = _znorm_matrix(values, L) if _Z is None else _Z
    m = Z.shape[0]

    # Candidate phase: a new subsequence kills any candidate it matches
    # within r, and is itself disqualified by such a match.
    cand: list[int] = []
    for i in range(m):
        is_candidate = True
        if cand:
            arr = np.asarray(cand)
            eligible = np.abs(arr - i) >= L
            if eligible.any():
                elig = arr[eligible]
                d2 = np.sum((Z[elig] - Z[i]) ** 2, axis=1)
                hits = elig[d2 < r * r]
                if hits.size:
                    is_candidate = False
                    hit_set = set(hits.tolist())
                    cand = [c for c in cand if c not in hit_set]
        if is_candidate:
            cand.append(i)
    if not cand:
        return None

    # Refinement phase: exact nearest non-self-match distance per survivor,
    # discarding candidates as soon as a match under r appears.
    best: DiscordResult | None = None
    for c in cand:
        dist = _distances_to(Z, c)
        lo = max(0, c - L + 1)
        hi = min(m, c + L)
        dist[lo:hi] = np.inf  # non-self constraint |start difference| >= L
        nn = float(dist.min())
        if nn < r or not np.isfinite(nn):
            continue
        if best is None or nn > best.distance or (
                nn == best.distance and c < best.start):
            best = DiscordResult(L, c, nn)
    return best


@dataclass(frozen=True)
class MerlinResult:
    scores: ScoreSeries
    discords: tuple[DiscordResult, ...]


def merlin_scan(series: TimeSeries, L_min: int, L_max: int) -> MerlinResult:
    """Run the discord search over [L_min, L_max] and merge results.

    The per-length discord windows are written into one score series
    (max-combined); all other timestamps stay 0.
    """
    n = len(series)
    if not (1 <= L_min <= L_max < n / 2):
        raise ValueError("need 1 <= L_min <= L_max < series length / 2")
    discords: list[DiscordResult] = []
    prev_distance = None
    for L in range(L_min, L_max + 1):
        Z = _znorm_matrix(series.values, L)
        if prev_distance is None:
            r = r_max(L)
        else:
            r = 0.99 * prev_distance
        result = None
        while result is None and r > 1e-12:
            result = discords_at_length(series, L, r, _Z=Z)
            if result is None:
                r /= 2.0
        if result is None:
            # Every window matches some other exactly (e.g. constant series).
            continue
        discords.append(result)
        prev_distance = result.distance

    scores = np.zeros(n)
    for d in discords:
        seg = scores[d.start:d.start + d.length]
        np.maximum(seg, d.distance, out=seg)
    return MerlinResult(ScoreSeries(scores, "merlin"), tuple(discords))


def labels_from_discords(result: MerlinResult, n: int) -> np.ndarray:
    """Binary labels straight from the discord windows (no threshold step)."""
    labels = np.zeros(n, dtype=bool)
    for d in result.discords:
        labels[d.start:d.start + d.length] = True
    return labels
