"""Corpus loading and synthetic anomaly injection.

Loads UCR-archive-format files (one value per line, metadata encoded in the
filename) and synthesizes labeled series by injecting one of 17 anomaly
types into clean base signals. All randomness goes through numpy's PCG64
generator (``np.random.default_rng``) with 64-bit seeds, so generated
corpora are reproducible across platforms.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ANOMALY_TYPES, TimeSeries, normalize

UCR_NAME_RE = re.compile(
    r"^(\d+)_UCR_Anomaly_(.+)_(\d+)_(\d+)_(\d+)\.txt$"
)

# Fraction of a series that may be anomalous (matches the archive's maximum).
MAX_POLLUTION = 0.049


class ParseError(ValueError):
    pass


class InjectionError(ValueError):
    """Raised when an anomaly type cannot be injected into the given base."""


@dataclass(frozen=True)
class UcrFileName:
    index: int
    name: str
    train_end: int
    anomaly_start: int
    anomaly_end: int


@dataclass(frozen=True)
class InjectionSpec:
    """Parameters for one synthetic anomaly.

    ``magnitude`` is a type-specific intensity (see the individual injectors).
    ``period`` is the base signal's cycle length, required by the injectors
    that operate on whole cycles.
    """

    anomaly_type: str
    location: int
    length: int
    magnitude: float
    seed: int
    period: int | None = None

    def validate(self, n: int):
        if self.anomaly_type not in ANOMALY_TYPES or self.anomaly_type == "unknown":
            raise InjectionError(f"unknown anomaly type {self.anomaly_type!r}")
        if self.length < 1:
            raise InjectionError("injection length must be >= 1")
        if self.location < 0 or self.location + self.length > n:
            raise InjectionError(
                f"segment [{self.location}, {self.location + self.length}) "
                f"does not fit a series of length {n}"
            )
        if self.length > max(1, int(MAX_POLLUTION * n)):
            raise InjectionError(
                f"segment length {self.length} exceeds the {MAX_POLLUTION:.1%} "
                f"pollution cap for length {n}"
            )


def parse_ucr_filename(path: str) -> UcrFileName:
    """Parse ``<idx>_UCR_Anomaly_<name>_<train_end>_<a>_<b>.txt``."""
    fname = Path(path).name
    m = UCR_NAME_RE.match(fname)
    if m is None:
        raise ParseError(f"filename {fname!r} does not match the UCR pattern")
    idx, name, train_end, a, b = m.groups()
    train_end, a, b = int(train_end), int(a), int(b)
    if not (train_end <= a <= b):
        raise ParseError(
            f"filename {fname!r}: indices must satisfy train_end <= start <= end"
        )
    return UcrFileName(int(idx), name, train_end, a, b)


def load_series(path: str) -> TimeSeries:
    """Load a UCR-format file: values normalized, metadata from the name.

    The filename's 1-based inclusive anomaly positions are converted to
    0-based inclusive [a, b].
    """
    meta = parse_ucr_filename(path)
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                v = float(line)
            except ValueError:
                raise ParseError(f"{path}: non-numeric value on line {lineno}")
            if not np.isfinite(v):
                raise ParseError(f"{path}: non-finite value on line {lineno}")
            values.append(v)
    if not values:
        raise ParseError(f"{path}: empty file")
    return TimeSeries(
        values=normalize(values),
        name=meta.name,
        anomaly_start=meta.anomaly_start - 1,
        anomaly_end=meta.anomaly_end - 1,
        train_end=meta.train_end,
    )


def generate_base(kind: str, length: int, period: int, noise_std: float,
                  seed: int) -> np.ndarray:
    """Deterministic clean base signal: sine, spike train, or random walk."""
    if period <= 0:
        raise ValueError("period must be positive")
    if length < 2 * period:
        raise ValueError("length must be at least 2 * period")
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    if kind == "sine":
        signal = np.sin(2 * np.pi * t / period)
    elif kind == "ecg_like":
        # One narrow Gaussian peak per cycle over a small baseline dip.
        phase = (t % period) / period
        signal = np.exp(-0.5 * ((phase - 0.3) / 0.03) ** 2)
        signal -= 0.3 * np.exp(-0.5 * ((phase - 0.6) / 0.08) ** 2)
    elif kind == "random_walk":
        signal = np.cumsum(rng.standard_normal(length))
    else:
        raise ValueError(f"unknown base kind {kind!r}")
    if noise_std > 0:
        signal = signal + rng.normal(0.0, noise_std, size=length)
    return signal


def _baseline(seg: np.ndarray) -> np.ndarray:
    return np.linspace(seg[0], seg[-1], len(seg))


def _bump_shape(length: int) -> np.ndarray:
    return np.sin(np.pi * (np.arange(length) + 0.5) / length)


def _need_period(spec: InjectionSpec) -> int:
    if spec.period is None or spec.period < 2:
        raise InjectionError(
            f"{spec.anomaly_type} requires the base signal's period"
        )
    return spec.period


def inject(base, spec: InjectionSpec, name: str | None = None) -> TimeSeries:
    """Apply one anomaly injector to a clean base signal.

    Returns a normalized TimeSeries whose ground-truth segment covers the
    modified region. The base outside the segment is untouched (identical
    after the shared min-max transform).
    """
    base = np.asarray(base, dtype=float)
    n = len(base)
    spec.validate(n)
    rng = np.random.default_rng(spec.seed)
    loc, length = spec.location, spec.length
    a, b = loc, loc + length - 1
    values = base.copy()
    seg = base[loc:loc + length]
    gmin, gmax = base.min(), base.max()
    grange = gmax - gmin
    kind = spec.anomaly_type

    if kind == "amplitude_change":
        m = seg.mean()
        values[loc:loc + length] = m + spec.magnitude * (seg - m)
    elif kind == "flat":
        values[loc:loc + length] = seg[0]
    elif kind == "frequency_change":
        # Resample a longer/shorter stretch of the base into the segment,
        # changing the apparent cycle length.
        src_len = max(2, int(round(length * spec.magnitude)))
        if loc + src_len > n:
            raise InjectionError("frequency_change source stretch exceeds series")
        src = base[loc:loc + src_len]
        pos = np.linspace(0, src_len - 1, length)
        values[loc:loc + length] = np.interp(pos, np.arange(src_len), src)
    elif kind in ("local_drop", "local_peak"):
        w = _bump_shape(length)
        if kind == "local_drop":
            headroom = seg - gmin
        else:
            headroom = gmax - seg
        amp = spec.magnitude * np.min(headroom / np.maximum(w, 1e-3))
        if amp <= 1e-12 * max(grange, 1.0):
            raise InjectionError(
                f"{kind}: segment already touches the global extreme"
            )
        bump = w * amp
        values[loc:loc + length] = seg - bump if kind == "local_drop" else seg + bump
    elif kind in ("missing_drop", "missing_peak"):
        line = _baseline(seg)
        dev = seg - line
        thr = 1e-6 * max(grange, 1.0)
        if kind == "missing_peak" and dev.max() <= thr:
            raise InjectionError("missing_peak: segment contains no peak")
        if kind == "missing_drop" and dev.min() >= -thr:
            raise InjectionError("missing_drop: segment contains no drop")
        values[loc:loc + length] = line
    elif kind == "noise":
        values[loc:loc + length] = seg + rng.normal(0.0, spec.magnitude, length)
    elif kind == "outlier":
        if length != 1:
            raise InjectionError("outlier injections must have length 1")
        values[loc] = gmax + spec.magnitude * max(grange, 1.0)
    elif kind == "reversed":
        period = _need_period(spec)
        cycles = max(1, length // period)
        span = cycles * period
        if loc + span > n:
            raise InjectionError("reversed: whole cycles do not fit")
        values[loc:loc + span] = base[loc:loc + span][::-1]
        b = loc + span - 1
    elif kind == "sampling_rate":
        avail = n - loc
        idx = np.minimum((np.arange(length) * spec.magnitude).astype(int), avail - 1)
        values[loc:loc + length] = base[loc + idx]
    elif kind == "signal_shift":
        values[loc:loc + length] = seg + spec.magnitude
    elif kind == "smoothed_increase":
        w = max(2, int(spec.magnitude))
        kernel = np.ones(w) / w
        padded = np.concatenate([np.full(w, seg[0]), seg, np.full(w, seg[-1])])
        smooth = np.convolve(padded, kernel, mode="same")[w:w + length]
        values[loc:loc + length] = smooth
    elif kind == "steep_increase":
        # Make the transition steep: a time warp holds the segment ends and
        # rushes through the middle, then quantization cuts the number of
        # individual values in the section.
        if spec.magnitude <= 1:
            raise InjectionError("steep_increase: magnitude must exceed 1")
        if length < 3:
            raise InjectionError("steep_increase: segment too short")
        lo, hi = seg.min(), seg.max()
        if hi - lo < 1e-12:
            raise InjectionError("steep_increase: segment is constant")
        u = np.linspace(-1.0, 1.0, length)
        pos = 0.5 * (1.0 + np.sign(u) * np.abs(u) ** (1.0 / spec.magnitude))
        warped = np.interp(pos * (length - 1), np.arange(length), seg)
        levels = max(2, int(round(spec.magnitude)))
        q = np.round((warped - lo) / (hi - lo) * (levels - 1)) / (levels - 1)
        values[loc:loc + length] = lo + q * (hi - lo)
    elif kind == "time_shift":
        pause = max(1, int(spec.magnitude))
        if pause >= length:
            raise InjectionError("time_shift: pause longer than segment")
        values[loc:loc + pause] = seg[0]
        values[loc + pause:loc + length] = seg[:length - pause]
    elif kind == "time_warping":
        if length < 3:
            raise InjectionError("time_warping: segment too short")
        period = _need_period(spec)

        def _peak_warp(chunk, m):
            w = len(chunk)
            m_new = int(np.clip(m + int(spec.magnitude), 1, w - 2))
            if m_new == m:
                # Peak sits against the chunk edge; warp the other way.
                m_new = int(np.clip(m - int(spec.magnitude), 1, w - 2))
            if m_new == m:
                raise InjectionError("time_warping: cannot move the cycle peak")
            src_pos = np.interp(np.arange(w), [0, m_new, w - 1], [0, m, w - 1])
            return np.interp(src_pos, np.arange(w), chunk)

        if period >= 3 and length >= 2 * period:
            # Warp whole cycles, applying the same endpoint-preserving map to
            # each so the warped cycles stay mutually consistent.
            cycles = length // period
            span = cycles * period
            chunks = base[loc:loc + span].reshape(cycles, period)
            m = int(np.argmax(chunks.mean(axis=0)))
            values[loc:loc + span] = np.concatenate(
                [_peak_warp(ch, m) for ch in chunks])
            b = loc + span - 1
        else:
            values[loc:loc + length] = _peak_warp(seg, int(np.argmax(seg)))
    elif kind == "unusual_pattern":
        period = _need_period(spec)
        p = max(4, period // 2)
        tri = 2.0 * np.abs((np.arange(length) % p) / p - 0.5)
        lo, hi = seg.min(), seg.max()
        if hi - lo < 1e-12:
            lo, hi = gmin, gmax
        values[loc:loc + length] = lo + tri * (hi - lo)
    else:
        raise InjectionError(f"no injector for anomaly type {kind!r}")

    if np.array_equal(values[a:b + 1], base[a:b + 1]):
        raise InjectionError(f"{kind}: injection left the segment unchanged")

    return TimeSeries(
        values=normalize(values),
        name=name or f"synthetic_{kind}",
        anomaly_start=a,
        anomaly_end=b,
        anomaly_type=kind,
    )


# Default synthetic corpus: every anomaly type on every base kind. Segment
# lengths are spread out so length-strategy experiments have variation.
BASE_KINDS = ("sine", "ecg_like", "random_walk")

_CORPUS_PARAMS: dict[str, dict] = {
    "amplitude_change": dict(length=150, magnitude=3.0),
    "flat": dict(length=45, magnitude=0.0),
    "frequency_change": dict(length=180, magnitude=2.0),
    "local_drop": dict(length=45, magnitude=0.8),
    "local_peak": dict(length=240, magnitude=0.7),
    "missing_drop": dict(length=140, magnitude=0.0),
    "missing_peak": dict(length=140, magnitude=0.0),
    "noise": dict(length=80, magnitude=0.6),
    "outlier": dict(length=1, magnitude=0.5),
    "reversed": dict(length=180, magnitude=0.0),
    "sampling_rate": dict(length=220, magnitude=2.0),
    "signal_shift": dict(length=200, magnitude=1.5),
    "smoothed_increase": dict(length=100, magnitude=20.0),
    "steep_increase": dict(length=80, magnitude=5.0),
    "time_shift": dict(length=45, magnitude=20.0),
    "time_warping": dict(length=100, magnitude=25.0),
    "unusual_pattern": dict(length=90, magnitude=0.0),
}


def default_corpus(length: int = 5000, period: int = 60, seed: int = 1234,
                   kinds=BASE_KINDS, types=None) -> list[TimeSeries]:
    """Build the default injected corpus: 17 anomaly types x 3 base kinds."""
    types = sorted(_CORPUS_PARAMS) if types is None else list(types)
    out = []
    for bi, base_kind in enumerate(kinds):
        noise_std = 0.05 if base_kind != "random_walk" else 0.0
        base = generate_base(base_kind, length, period, noise_std, seed + bi)
        for ti, atype in enumerate(types):
            params = _CORPUS_PARAMS[atype]
            cap = max(1, int(MAX_POLLUTION * length) - 1)
            seg_len = min(params["length"], cap)
            # Stagger locations so segments sit in different signal phases.
            loc = int(length * (0.35 + 0.5 * ti / max(len(types), 1)))
            spec = InjectionSpec(
                anomaly_type=atype,
                location=loc,
                length=seg_len,
                magnitude=params["magnitude"],
                seed=seed + 1000 * bi + ti,
                period=period,
            )
            out.append(inject(base, spec, name=f"{base_kind}_{atype}"))
    return out


def write_manifest(corpus: list[TimeSeries], path: str):
    """Write a corpus manifest: name, segment bounds, anomaly type."""
    with open(path, "w") as fh:
        fh.write("name\tanomaly_start\tanomaly_end\tanomaly_type\tlength\n")
        for ts in corpus:
            fh.write(
                f"{ts.name}\t{ts.anomaly_start}\t{ts.anomaly_end}\t"
                f"{ts.anomaly_type}\t{len(ts)}\n"
            )


def load_directory(directory: str) -> list[TimeSeries]:
    """Load every UCR-format file in a directory, sorted by filename."""
    paths = sorted(Path(directory).glob("*.txt"))
    if not paths:
        raise ParseError(f"no UCR files found in {directory}")
    return [load_series(str(p)) for p in paths]
