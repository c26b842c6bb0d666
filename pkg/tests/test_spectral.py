import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone

from fblnoise.curve import SpectrumCurve
from fblnoise.events import BinnedCounts, EventTrain
from fblnoise.spectral import (
    EstimationError,
    WelchConfig,
    WelchSpectrum,
    bin_events,
    count_fano,
    estimate_spectrum,
    merge_trajectories,
    sinc2,
)

SMALL = WelchConfig(segment_length=4096, min_segments=32)


def poisson_counts(rate, dt, n, seed):
    # binned homogeneous Poisson train
    return BinnedCounts(np.random.default_rng(seed).poisson(rate * dt, n), dt)


def test_bin_events_hand_example():
    c = bin_events(EventTrain([0.1, 0.2, 0.3], 0.45), 0.15)
    assert c.counts.tolist() == [1, 1, 1]


def test_bin_events_integer_times():
    c = bin_events(EventTrain(np.arange(0.0, 50.0), 50.0), 1.0, kappa=0.05)
    assert len(c) == 50 and np.all(c.counts == 1)


def test_bin_events_half_open_and_exact_total():
    times = np.array([0.0, 0.0099, 0.01, 0.025, 0.0299])
    c = bin_events(EventTrain(times, 0.03), 0.01)
    assert c.counts.tolist() == [2, 1, 2]
    assert c.counts.sum() == times.size


def test_bin_events_poisson_mean():
    rng = np.random.default_rng(1)
    rate, dt = 200.0, 0.01
    times = np.cumsum(rng.standard_exponential(200_000) / rate)
    c = bin_events(EventTrain(times, times[-1]), dt)
    sigma = np.sqrt(rate * dt / len(c))
    assert abs(c.counts.mean() - rate * dt) <= 3 * sigma


def test_bin_events_errors():
    with pytest.raises(EstimationError):
        bin_events(EventTrain([], 1.0), 0.01)
    with pytest.raises(ValueError):
        bin_events(EventTrain([0.5], 1.0), 0.2)
    with pytest.raises(ValueError):
        bin_events(EventTrain([0.5], 1.0), 0.0)


def test_poisson_calibration_coverage():
    # a 95% interval should contain the truth at 95% of points on average;
    # pooled over seeds the count is binomial
    inside = total = 0
    for seed in range(10):
        cu = estimate_spectrum(poisson_counts(1e4, 0.01, 1_000_000, seed), WelchConfig(segment_length=16384))
        inside += np.sum((cu.ci_low <= 1.0) & (cu.ci_high >= 1.0))
        total += cu.omega.size
    sd = np.sqrt(0.95 * 0.05 / total)
    assert abs(inside / total - 0.95) <= 3 * sd


def test_poisson_calibration_hann_mean():
    cu = estimate_spectrum(poisson_counts(1e3, 0.01, 2_000_000, 3), WelchConfig())
    assert 0.99 <= cu.values.mean() <= 1.01


def test_periodic_train_suppressed():
    tau = 1e-3
    times = (np.arange(2_000_000) + 0.5) * tau
    counts = bin_events(EventTrain(times, 2000.0), 0.01)
    cu = estimate_spectrum(counts, SMALL)
    assert cu.values.max() < 0.05
    assert 2 * np.pi / tau > cu.omega.max()


def test_sinc_correction_small_in_band():
    assert 1.0 - sinc2(20.0, 0.01) <= 0.01
    assert sinc2(0.0, 0.01) == 1.0


def test_merge_identical_curves():
    cu = estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, 0), SMALL)
    m = merge_trajectories([cu, cu])
    assert np.allclose(m.values, cu.values, rtol=1e-14)
    # merged width is w/sqrt(2) in the symmetric (Gaussian) approximation
    w = cu.ci_high - cu.ci_low
    assert np.allclose(m.ci_high - m.ci_low, w / np.sqrt(2), rtol=0.05)


def test_merge_single_is_identity():
    cu = estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, 0), SMALL)
    assert merge_trajectories([cu]).equals(cu)


def test_merge_errors():
    a = SpectrumCurve([0.1, 0.2], [1.0, 1.0], [0.9, 0.9], [1.1, 1.1])
    b = SpectrumCurve([0.1, 0.3], [1.0, 1.0], [0.9, 0.9], [1.1, 1.1])
    with pytest.raises(EstimationError):
        merge_trajectories([a, b])
    with pytest.raises(EstimationError):
        merge_trajectories([])
    with pytest.raises(EstimationError):
        merge_trajectories([a, SpectrumCurve([0.1, 0.2], [1.0, 1.0])])


def test_ci_shrinks_with_number_of_seeds():
    curves = [estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, s), SMALL, n_bands=16) for s in range(8)]
    w1 = np.median(curves[0].ci_high - curves[0].ci_low)
    for K in (2, 4, 8):
        m = merge_trajectories(curves[:K])
        wk = np.median(m.ci_high - m.ci_low)
        assert wk / w1 == pytest.approx(K ** -0.5, rel=0.2)


def test_ci_shrinks_with_duration():
    # doubling the record doubles the segment count: width scales by 1/sqrt(2)
    short = estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, 0), SMALL)
    long = estimate_spectrum(poisson_counts(1e3, 0.01, 600_000, 0), SMALL)
    ratio = np.median((long.ci_high - long.ci_low)) / np.median(short.ci_high - short.ci_low)
    assert ratio == pytest.approx(2 ** -0.5, rel=0.15)


def test_ci_matches_scatter_between_seeds():
    vals = np.array([estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, s), SMALL, n_bands=8).values
                     for s in range(40)])
    cu = estimate_spectrum(poisson_counts(1e3, 0.01, 300_000, 99), SMALL, n_bands=8)
    predicted_sd = (cu.ci_high - cu.ci_low) / (2 * stats.norm.ppf(0.975))
    assert np.allclose(vals.std(axis=0, ddof=1), predicted_sd, rtol=0.35)


def test_estimation_errors():
    with pytest.raises(EstimationError):
        estimate_spectrum(poisson_counts(1e3, 0.01, 10_000, 0), SMALL)
    with pytest.raises(EstimationError):
        estimate_spectrum(BinnedCounts(np.zeros(300_000, dtype=int), 0.01), SMALL)
    with pytest.raises(EstimationError):
        estimate_spectrum(poisson_counts(1e3, 0.1, 300_000, 0), SMALL)
    with pytest.raises(ValueError):
        WelchConfig(segment_length=1000)
    with pytest.raises(ValueError):
        WelchConfig(overlap=0.7)


def test_count_fano_poisson():
    assert count_fano(poisson_counts(1e3, 0.01, 200_000, 2), 100) == pytest.approx(1.0, abs=0.05)


def test_estimator_api():
    est = WelchSpectrum(segment_length=4096, min_segments=32, n_bands=10)
    assert clone(est).get_params() == est.get_params()
    est.fit(poisson_counts(1e3, 0.01, 300_000, 0))
    assert est.predict([1.0, 5.0]) == pytest.approx([1.0, 1.0], abs=0.1)
    raw = np.random.default_rng(0).poisson(10, 300_000)
    assert WelchSpectrum(segment_length=4096, min_segments=32).fit(raw, dt=0.01).curve_.omega.size > 0
