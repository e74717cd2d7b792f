"""Extreme-value-theory score classification.

Fits a generalized Pareto distribution to score excesses over an initial
high quantile, derives the decision threshold for a target tail probability
q, and labels scores at or above it. A streaming variant refits as new
excesses arrive. Scores are standardized to higher-is-anomalous; the
mirrored low-tail form is available via ``orientation="lower"``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Detection

MIN_EXCESSES = 8


@dataclass(frozen=True)
class GpdFit:
    beta: float   # scale > 0
    gamma: float  # shape
    n_peaks: int
    th0: float


@dataclass(frozen=True)
class PotConfig:
    q: float = 0.01
    init_fraction: float = 0.10
    th0_quantile: float = 0.98
    refit_cadence: int = 32
    orientation: str = "upper"

    def __post_init__(self):
        if not (0 < self.q < 1):
            raise ValueError("q must lie in (0, 1)")
        if not (0 < self.init_fraction <= 1):
            raise ValueError("init_fraction must lie in (0, 1]")
        if self.orientation not in ("upper", "lower"):
            raise ValueError("orientation must be 'upper' or 'lower'")


def _profile_loglik(theta: float, x: np.ndarray) -> float:
    """GPD log-likelihood profiled over theta = gamma / beta."""
    n = len(x)
    if theta == 0.0:
        return -n * np.log(x.mean()) - n
    t = theta * x
    if np.any(t <= -1):
        return -np.inf
    gamma = np.mean(np.log1p(t))
    if gamma == 0.0 or gamma / theta <= 0:
        return -np.inf
    return n * (-np.log(gamma / theta) - gamma - 1.0)


def fit_gpd(excesses, th0: float = 0.0) -> GpdFit | None:
    """Maximum-likelihood GPD fit to positive excesses.

    Reduces the two-parameter problem to a 1-D search over
    theta = gamma/beta on a bounded grid refined around the optimum, with
    the exponential (gamma = 0) special case as fallback. Returns None when
    fewer than MIN_EXCESSES values are given or the sample is degenerate.
    """
    x = np.asarray(excesses, dtype=float)
    x = x[x > 0]
    if len(x) < MIN_EXCESSES:
        return None
    if x.max() - x.min() < 1e-12 * max(x.max(), 1.0):
        return None
    xmax, xbar = x.max(), x.mean()

    # theta > -1/xmax for a valid support; positive side bounded loosely.
    lo = -(1.0 - 1e-9) / xmax
    hi = 100.0 / xbar
    neg = np.linspace(lo, -1e-12, 200)
    pos = np.geomspace(1e-9 / xbar, hi, 200)
    candidates = np.concatenate([neg, pos])
    lls = np.array([_profile_loglik(t, x) for t in candidates])
    best = int(np.argmax(lls))

    # refine around the best grid point
    left = candidates[max(best - 1, 0)]
    right = candidates[min(best + 1, len(candidates) - 1)]
    for _ in range(60):
        m1 = left + (right - left) / 3
        m2 = right - (right - left) / 3
        if _profile_loglik(m1, x) < _profile_loglik(m2, x):
            left = m1
        else:
            right = m2
    theta = 0.5 * (left + right)

    ll_theta = _profile_loglik(theta, x)
    ll_exp = _profile_loglik(0.0, x)
    if ll_exp >= ll_theta or not np.isfinite(ll_theta):
        return GpdFit(beta=float(xbar), gamma=0.0, n_peaks=len(x), th0=th0)
    gamma = float(np.mean(np.log1p(theta * x)))
    beta = float(gamma / theta)
    if gamma <= -0.5 or beta <= 0:
        return GpdFit(beta=float(xbar), gamma=0.0, n_peaks=len(x), th0=th0)
    return GpdFit(beta=beta, gamma=gamma, n_peaks=len(x), th0=th0)


def _threshold_from_fit(fit: GpdFit, q: float, n: int) -> float:
    """Upper-tail decision threshold from a fitted tail (gamma -> 0 safe)."""
    ratio = q * n / fit.n_peaks
    if abs(fit.gamma) < 1e-9:
        return fit.th0 + fit.beta * np.log(1.0 / ratio)
    return fit.th0 + (fit.beta / fit.gamma) * (ratio ** (-fit.gamma) - 1.0)


def pot_threshold(scores, cfg: PotConfig = PotConfig()) -> float:
    """Batch POT threshold over a full score sequence.

    Returns th0 (the empirical high quantile) when no GPD fit is available.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("scores must be nonempty")
    if cfg.orientation == "lower":
        mirrored = PotConfig(cfg.q, cfg.init_fraction, cfg.th0_quantile,
                             cfg.refit_cadence, "upper")
        return -pot_threshold(-scores, mirrored)
    th0 = float(np.quantile(scores, cfg.th0_quantile))
    excesses = scores[scores > th0] - th0
    fit = fit_gpd(excesses, th0)
    if fit is None:
        return th0
    return float(_threshold_from_fit(fit, cfg.q, len(scores)))


def streaming_pot(scores, cfg: PotConfig = PotConfig(),
                  score_source: str = "") -> Detection:
    """Streaming POT: initialize on the first init_fraction of the scores,
    then label each new score against the current threshold, adding
    sub-threshold peaks and refitting every ``refit_cadence`` new excesses.

    Labels for the init window are computed retroactively against the
    first fitted threshold. The reported threshold is the final one.

    Until a first fit is available (the init window can hold fewer than
    MIN_EXCESSES peaks) no alarms are raised; excesses observed in that
    phase extend the calibration set and a fit is attempted on each one.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    n_init = max(int(np.ceil(cfg.init_fraction * n)), 2)
    if n_init > n:
        raise ValueError("not enough scores for the init window")
    if cfg.orientation == "lower":
        mirrored = PotConfig(cfg.q, cfg.init_fraction, cfg.th0_quantile,
                             cfg.refit_cadence, "upper")
        det = streaming_pot(-scores, mirrored, score_source)
        return Detection(det.labels, -det.threshold, score_source)

    init = scores[:n_init]
    th0 = float(np.quantile(init, cfg.th0_quantile))
    peaks = list(init[init > th0] - th0)
    n_obs = n_init

    def current_threshold(fit):
        if fit is None:
            return th0
        return _threshold_from_fit(fit, cfg.q, n_obs)

    fit = fit_gpd(np.array(peaks), th0)
    th = current_threshold(fit)

    labels = np.zeros(n, dtype=bool)
    init_labelled = fit is not None
    if init_labelled:
        labels[:n_init] = init >= th

    new_excesses = 0
    for i in range(n_init, n):
        s = scores[i]
        if fit is not None and s >= th:
            labels[i] = True
            continue
        n_obs += 1
        if s > th0:
            peaks.append(s - th0)
            new_excesses += 1
            if fit is None or new_excesses >= cfg.refit_cadence:
                refit = fit_gpd(np.array(peaks), th0)
                if refit is not None:
                    fit = refit
                    new_excesses = 0
        th = current_threshold(fit)
        if fit is not None and not init_labelled:
            labels[:n_init] = init >= th
            init_labelled = True
    return Detection(labels, float(th), score_source)


def label_scores(scores, thr: float, score_source: str = "") -> Detection:
    """Batch label rule: anomalous iff score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    return Detection(scores >= thr, float(thr), score_source)


def point_adjust(labels, segment: tuple[int, int]) -> np.ndarray:
    """If any label inside the true segment [a, b] fires, mark the whole
    segment detected. Labels outside the segment are unchanged."""
    labels = np.asarray(labels, dtype=bool).copy()
    a, b = segment
    if not (0 <= a <= b < len(labels)):
        raise ValueError(f"invalid segment [{a}, {b}] for length {len(labels)}")
    if labels[a:b + 1].any():
        labels[a:b + 1] = True
    return labels
