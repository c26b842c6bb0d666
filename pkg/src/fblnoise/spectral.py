"""Shot-normalized spectra of photodetection count records.

The estimate is a Welch average of windowed periodograms of the binned
counts divided by the mean count per bin, so a homogeneous Poisson train
gives 1 at every frequency. Binning multiplies the excess (non-shot) part
of the spectrum by sinc^2(w dt / 2) while leaving the shot floor white;
that factor is divided back out.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .curve import SpectrumCurve
from .events import BinnedCounts, EventTrain

WINDOWS = ("rectangular", "hann")


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 32768
    overlap: float = 0.5
    window: str = "hann"
    min_segments: int = 64

    def __post_init__(self):
        n = self.segment_length
        if n < 64 or n & (n - 1):
            raise ValueError(f"segment_length must be a power of two >= 64, got {n}")
        if not 0 <= self.overlap <= 0.5:
            raise ValueError(f"overlap must be in [0, 0.5], got {self.overlap}")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}, got {self.window!r}")
        if self.min_segments < 1:
            raise ValueError("min_segments must be >= 1")

    @property
    def step(self):
        return self.segment_length - int(round(self.overlap * self.segment_length))

    def taper(self):
        if self.window == "hann":
            return signal.get_window("hann", self.segment_length, fftbins=True)
        return np.ones(self.segment_length)

    def n_segments(self, n_bins):
        if n_bins < self.segment_length:
            return 0
        return 1 + (n_bins - self.segment_length) // self.step


def bin_events(train: EventTrain, dt, t0=0.0, t_end=None, *, kappa=1.0) -> BinnedCounts:
    """Count events in half-open bins ``[t0 + k dt, t0 + (k+1) dt)``.

    ``dt`` must resolve the analysis band up to 20 ``kappa``.
    """
    if len(train) == 0:
        raise EstimationError("cannot bin an empty event train")
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError("bin width must be > 0")
    if dt > np.pi / (20.0 * kappa):
        raise ValueError(f"bin width {dt} too coarse to resolve w = 20 kappa (need <= pi/(20 kappa))")
    t_end = train.t_end if t_end is None else t_end
    n = int(np.floor((t_end - t0) / dt + 1e-9))
    times = train.times[(train.times >= t0)]
    idx = np.floor((times - t0) / dt).astype(np.int64)
    idx = idx[idx < n]
    return BinnedCounts(np.bincount(idx, minlength=n), dt, t0)


def _effective_segments(taper, n_seg, step):
    """Welch's equivalent number of independent segments for overlapped windows."""
    w2 = np.sum(taper ** 2)
    ratio = 1.0
    for lag in range(1, n_seg):
        shift = lag * step
        if shift >= taper.size:
            break
        rho = np.dot(taper[:-shift], taper[shift:]) / w2
        ratio += 2.0 * (1.0 - lag / n_seg) * rho ** 2
    return n_seg / ratio


def _bin_correlations(taper, max_lag):
    """Squared correlation of periodogram values ``d`` FFT bins apart (white input)."""
    w2 = taper ** 2
    spec = np.abs(np.fft.fft(w2)) / w2.sum()
    return spec[: max_lag + 1] ** 2


def sinc2(omega, dt):
    return np.sinc(np.asarray(omega) * dt / (2.0 * np.pi)) ** 2


def estimate_spectrum(counts: BinnedCounts, cfg: WelchConfig = WelchConfig(), *,
                      band=(0.05, 20.0), n_bands: Optional[int] = None,
                      confidence=0.95) -> SpectrumCurve:
    """Welch estimate with chi-squared confidence bounds.

    Returns the FFT bins inside ``band`` (units of kappa) or, with
    ``n_bands``, averages of them over that many log-spaced sub-bands;
    averaging raises the degrees of freedom at high frequency where the
    bins are dense.
    """
    c = counts.counts.astype(float)
    n_seg = cfg.n_segments(c.size)
    if n_seg < cfg.min_segments:
        raise EstimationError(
            f"{n_seg} segments of {cfg.segment_length} bins available, {cfg.min_segments} required"
        )
    c_bar = c.mean()
    if c_bar <= 0:
        raise EstimationError("mean count is zero")
    dt = counts.dt
    if band[1] > np.pi / (2.0 * dt):
        raise EstimationError(f"band edge {band[1]} exceeds half the Nyquist frequency {np.pi / (2 * dt)}")

    taper = cfg.taper()
    f, pxx = signal.welch(
        c, fs=1.0, window=taper, nperseg=cfg.segment_length,
        noverlap=cfg.segment_length - cfg.step, detrend="constant",
        return_onesided=True, scaling="density",
    )
    # one-sided density doubles interior bins; E[pxx/2] = c_bar for Poisson counts
    raw = pxx / (2.0 * c_bar)
    omega = 2.0 * np.pi * f / dt
    keep = (omega >= band[0]) & (omega <= band[1])
    if not np.any(keep):
        raise EstimationError(f"no FFT bins inside band {band}")
    omega, raw = omega[keep], raw[keep]

    k_eff = _effective_segments(taper, n_seg, cfg.step)
    if n_bands is None:
        dof = np.full(omega.size, 2.0 * k_eff)
    else:
        omega, raw, dof = _band_average(omega, raw, taper, k_eff, band, n_bands)

    lo_q, hi_q = stats.chi2.ppf([(1 - confidence) / 2, (1 + confidence) / 2], dof[:, None]).T
    ci_low, ci_high = raw * dof / hi_q, raw * dof / lo_q

    s2 = sinc2(omega, dt)
    correct = lambda v: 1.0 + (v - 1.0) / s2  # noqa: E731
    meta = {
        "route": "simulate",
        "segments": n_seg,
        "effective_segments": f"{k_eff:.6g}",
        "window": cfg.window,
        "segment_length": cfg.segment_length,
        "dt": dt,
        "mean_count": f"{c_bar:.17g}",
    }
    return SpectrumCurve(omega, correct(raw), correct(ci_low), correct(ci_high), meta)


def _band_average(omega, raw, taper, k_eff, band, n_bands):
    edges = np.geomspace(band[0], band[1], n_bands + 1)
    which = np.clip(np.searchsorted(edges, omega, side="right") - 1, 0, n_bands - 1)
    rho2 = _bin_correlations(taper, 8)
    out_w, out_s, out_dof = [], [], []
    for b in range(n_bands):
        sel = which == b
        m = int(sel.sum())
        if m == 0:
            continue
        lags = np.arange(1, min(m, rho2.size))
        # variance of a mean of m correlated chi-squared variates, relative to one
        var_ratio = (m + 2.0 * np.sum((m - lags) * rho2[lags])) / m ** 2
        out_w.append(omega[sel].mean())
        out_s.append(raw[sel].mean())
        out_dof.append(2.0 * k_eff / var_ratio)
    return np.array(out_w), np.array(out_s), np.array(out_dof)


def merge_trajectories(curves: Sequence[SpectrumCurve], confidence=0.95) -> SpectrumCurve:
    """Inverse-variance weighted mean of independent estimates on one grid.

    Variances come from the relative widths of each curve's confidence
    band, which depend only on the degrees of freedom, so the weights are
    not correlated with the noise in the values themselves.
    """
    curves = list(curves)
    if not curves:
        raise EstimationError("nothing to merge")
    first = curves[0]
    for c in curves[1:]:
        if not c.same_grid(first):
            raise EstimationError("cannot merge curves on different grids")
    if len(curves) == 1:
        return first
    if not all(c.has_ci for c in curves):
        raise EstimationError("merging needs confidence bounds on every curve")

    z = stats.norm.ppf(0.5 + confidence / 2)
    vals = np.array([c.values for c in curves])
    rel_sd = np.array([(c.ci_high - c.ci_low) / (2.0 * z * np.abs(c.values).clip(1e-300)) for c in curves])
    weights = 1.0 / rel_sd ** 2
    mean = np.sum(weights * vals, axis=0) / weights.sum(axis=0)
    sd = np.abs(mean) / np.sqrt(weights.sum(axis=0))
    meta = dict(first.meta)
    meta["merged"] = len(curves)
    return SpectrumCurve(first.omega, mean, mean - z * sd, mean + z * sd, meta)


def count_fano(counts: BinnedCounts, window_bins: int) -> float:
    """Variance-to-mean ratio of counts in non-overlapping windows."""
    agg = counts.rebin(window_bins).counts.astype(float)
    if agg.size < 2:
        raise EstimationError("need at least two counting windows")
    mean = agg.mean()
    if mean <= 0:
        raise EstimationError("mean count is zero")
    return agg.var(ddof=1) / mean


class WelchSpectrum(BaseEstimator):
    """Estimator-style Welch spectrum of count records or event trains.

    ``fit`` accepts ``BinnedCounts``, an ``EventTrain`` (binned at
    ``bin_width``) or a raw 1-d integer count array with ``dt``.
    """

    def __init__(self, segment_length=32768, overlap=0.5, window="hann", min_segments=64,
                 band=(0.05, 20.0), n_bands=None, bin_width=0.01, confidence=0.95):
        self.segment_length = segment_length
        self.overlap = overlap
        self.window = window
        self.min_segments = min_segments
        self.band = band
        self.n_bands = n_bands
        self.bin_width = bin_width
        self.confidence = confidence

    def fit(self, X, y=None, dt=None):
        if isinstance(X, EventTrain):
            counts = bin_events(X, self.bin_width)
        elif isinstance(X, BinnedCounts):
            counts = X
        else:
            arr = np.asarray(X)
            counts = BinnedCounts(arr.astype(np.int64), self.bin_width if dt is None else dt)
        cfg = WelchConfig(self.segment_length, self.overlap, self.window, self.min_segments)
        self.curve_ = estimate_spectrum(counts, cfg, band=tuple(self.band), n_bands=self.n_bands,
                                        confidence=self.confidence)
        self.omega_ = self.curve_.omega
        self.spectrum_ = self.curve_.values
        return self

    def predict(self, X):
        """Linear interpolation of the fitted estimate."""
        check_is_fitted(self, "curve_")
        from ._validation import check_frequencies

        return np.interp(check_frequencies(X), self.omega_, self.spectrum_)
