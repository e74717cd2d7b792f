import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsadbench import threshold as th
from tsadbench.threshold import (PotConfig, fit_gpd, label_scores,
                                 point_adjust, pot_threshold, streaming_pot)


def gpd_sample(rng, n, beta, gamma):
    """Inverse-CDF sampler, independent of the fitting code."""
    u = rng.uniform(size=n)
    if gamma == 0.0:
        return -beta * np.log(1 - u)
    return beta / gamma * ((1 - u) ** (-gamma) - 1.0)


class TestFitGpd:
    def test_exponential_recovery(self):
        rng = np.random.default_rng(101)
        x = rng.exponential(scale=2.0, size=20000)
        fit = fit_gpd(x)
        assert fit is not None
        assert fit.beta == pytest.approx(2.0, rel=0.05)
        assert abs(fit.gamma) < 0.05

    def test_heavy_tail_recovery(self):
        rng = np.random.default_rng(102)
        x = gpd_sample(rng, 20000, beta=1.0, gamma=0.3)
        fit = fit_gpd(x)
        assert fit.beta == pytest.approx(1.0, rel=0.10)
        assert fit.gamma == pytest.approx(0.3, abs=0.10)

    def test_bounded_tail_recovery(self):
        rng = np.random.default_rng(103)
        x = gpd_sample(rng, 20000, beta=1.0, gamma=-0.2)
        fit = fit_gpd(x)
        assert fit.gamma == pytest.approx(-0.2, abs=0.10)

    def test_too_few_excesses(self):
        assert fit_gpd(np.ones(7) + np.arange(7) * 0.1) is None

    def test_all_equal_unavailable(self):
        assert fit_gpd(np.full(50, 3.0)) is None

    def test_nonpositive_values_dropped(self):
        rng = np.random.default_rng(104)
        x = rng.exponential(size=100)
        fit_a = fit_gpd(x)
        fit_b = fit_gpd(np.concatenate([x, [-1.0, 0.0]]))
        assert fit_a.n_peaks == fit_b.n_peaks == 100


class TestPotThreshold:
    def test_exponential_analytic_quantile(self):
        # for Exp(1) scores the exact 1-q quantile is -ln(q)
        rng = np.random.default_rng(111)
        scores = rng.exponential(size=100000)
        cfg = PotConfig(q=0.001)
        got = pot_threshold(scores, cfg)
        assert got == pytest.approx(-np.log(0.001), rel=0.05)

    def test_threshold_exceeds_init_quantile(self):
        rng = np.random.default_rng(112)
        scores = rng.normal(size=5000)
        cfg = PotConfig(q=0.001)
        assert pot_threshold(scores, cfg) > np.quantile(scores, 0.98)

    def test_monotone_in_q(self):
        rng = np.random.default_rng(113)
        scores = rng.exponential(size=20000)
        ths = [pot_threshold(scores, PotConfig(q=q))
               for q in (0.05, 0.01, 0.002, 0.0005)]
        assert ths == sorted(ths)

    def test_degenerate_scores_fall_back_to_th0(self):
        scores = np.full(100, 1.0)
        assert pot_threshold(scores) == pytest.approx(1.0)

    def test_lower_orientation_mirrors_upper(self):
        rng = np.random.default_rng(114)
        scores = rng.exponential(size=10000)
        up = pot_threshold(scores, PotConfig(q=0.005))
        low = pot_threshold(-scores, PotConfig(q=0.005, orientation="lower"))
        assert low == pytest.approx(-up)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pot_threshold([])


class TestStreamingPot:
    def test_constant_stream_never_alarms(self):
        det = streaming_pot(np.full(500, 0.3), PotConfig(q=0.01))
        assert not det.labels.any()

    def test_spikes_detected_with_low_false_alarm_rate(self):
        hits, fps, total = 0, 0, 0
        for seed in range(6):
            rng = np.random.default_rng(200 + seed)
            scores = rng.normal(size=4000)
            spike_at = [1200, 1900, 2500, 3100, 3700]
            scores[spike_at] += 10.0
            det = streaming_pot(scores, PotConfig(q=0.001))
            hits += sum(det.labels[t] for t in spike_at) == 5
            clean = np.delete(det.labels[400:], np.array(spike_at) - 400)
            fps += int(clean.sum())
            total += clean.size
        assert hits == 6
        # q = 0.001 targets a 0.1% alarm rate; allow estimation slack
        assert fps / total < 0.005

    def test_init_window_labelled_retroactively(self):
        rng = np.random.default_rng(201)
        scores = rng.normal(size=2000)
        scores[30] = 50.0
        det = streaming_pot(scores, PotConfig(q=0.001))
        assert det.labels[30]

    def test_threshold_close_to_batch(self):
        rng = np.random.default_rng(202)
        scores = rng.exponential(size=20000)
        batch = pot_threshold(scores, PotConfig(q=0.001))
        stream = streaming_pot(scores, PotConfig(q=0.001)).threshold
        assert stream == pytest.approx(batch, rel=0.25)

    def test_score_source_passthrough(self):
        det = streaming_pot(np.linspace(0, 1, 100), score_source="mdi")
        assert det.score_source == "mdi"

    def test_lower_orientation(self):
        rng = np.random.default_rng(203)
        scores = rng.normal(size=3000)
        scores[1500] = -12.0
        det = streaming_pot(scores, PotConfig(q=0.001, orientation="lower"))
        assert det.labels[1500]
        assert det.labels[300:].sum() <= 10


class TestLabelScores:
    def test_rule_is_geq(self):
        det = label_scores([0.1, 0.5, 0.9], 0.5)
        np.testing.assert_array_equal(det.labels, [False, True, True])

    def test_threshold_recorded(self):
        assert label_scores([1.0], 0.25).threshold == 0.25


class TestPointAdjust:
    def test_partial_hit_fills_segment(self):
        labels = np.zeros(10, dtype=bool)
        labels[4] = True
        out = point_adjust(labels, (3, 6))
        np.testing.assert_array_equal(np.flatnonzero(out), [3, 4, 5, 6])

    def test_miss_leaves_labels_alone(self):
        labels = np.zeros(10, dtype=bool)
        labels[0] = True
        out = point_adjust(labels, (3, 6))
        np.testing.assert_array_equal(out, labels)

    def test_outside_labels_untouched(self):
        labels = np.array([True, False, True, False, False])
        out = point_adjust(labels, (2, 3))
        assert out[0] and not out[1]

    def test_idempotent(self):
        rng = np.random.default_rng(301)
        labels = rng.random(50) < 0.2
        once = point_adjust(labels, (10, 20))
        twice = point_adjust(once, (10, 20))
        np.testing.assert_array_equal(once, twice)

    def test_invalid_segment(self):
        with pytest.raises(ValueError):
            point_adjust(np.zeros(5, dtype=bool), (3, 7))

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_never_clears_labels(self, seed):
        rng = np.random.default_rng(seed)
        labels = rng.random(30) < 0.3
        a = int(rng.integers(0, 25))
        b = int(rng.integers(a, 30))
        out = point_adjust(labels, (a, b))
        assert np.all(out >= labels)


class TestProfileLoglik:
    def test_matches_direct_gpd_loglik(self):
        # oracle: plug theta back into the standard 2-parameter form
        rng = np.random.default_rng(401)
        x = rng.exponential(size=500)
        for theta in (0.3, 1.0, -0.2 / x.max()):
            gamma = np.mean(np.log1p(theta * x))
            beta = gamma / theta
            direct = -len(x) * np.log(beta) \
                - (1 + 1 / gamma) * np.sum(np.log1p(gamma * x / beta))
            assert th._profile_loglik(theta, x) == pytest.approx(direct)

    def test_invalid_support_is_minus_inf(self):
        x = np.array([1.0, 2.0, 10.0])
        assert th._profile_loglik(-0.2, x) == -np.inf
