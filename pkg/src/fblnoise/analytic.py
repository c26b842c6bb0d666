"""Closed-form shot-normalized photocurrent spectra.

Frequencies are in units of the exciting-laser mode width unless a
function takes explicit rates, in which case frequencies and rates share
whatever unit the caller chose.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    check_frequencies,
    check_lambda,
    check_p,
    check_positive,
    check_scenario,
)
from .curve import SpectrumCurve, as_grid


def _curve(omega, values, **meta):
    return SpectrumCurve(omega, values, meta={"route": "analytic", **meta})


def single_values(p, omega):
    omega = np.asarray(omega, dtype=float)
    return 1.0 - p / (1.0 + omega ** 2)


def fbl_values(p, lam, omega):
    omega = np.asarray(omega, dtype=float)
    g2 = (1.0 + lam) ** 2
    return 1.0 - (p - 1.0 + g2) / (g2 + omega ** 2)


def coupled_values(p, kappa, kappa_tilde, kappa0, omega):
    w2 = np.asarray(omega, dtype=float) ** 2
    k, kt, k0 = kappa, kappa_tilde, kappa0
    num = w2 + k * (k + k0) + k0 * (k + k0) * p / 2.0
    den = (w2 - kt * (2.0 * k + k0)) ** 2 + w2 * (2.0 * kt + k + k0) ** 2
    return 1.0 - 2.0 * kt ** 2 * num / den


def coupled_fbl_values(lam, kappa, kappa_tilde, kappa0, omega):
    """Measuring-laser spectrum with the exciting laser in the loop (random pump)."""
    w2 = np.asarray(omega, dtype=float) ** 2
    k, kt = kappa, kappa_tilde
    x = kappa0 / kappa
    num = w2 + k ** 2 * (1 + x) * (1 + lam * (2 + x) + lam ** 2 * (1 + x) * (1 - x / 2))
    den = (w2 - kt * k * (2 + x + 2 * lam * (1 + x))) ** 2 + w2 * (2 * kt + k * (1 + x) * (1 + lam)) ** 2
    return 1.0 - 2.0 * kt ** 2 * num / den


def strong_limit_values(x, omega):
    w2 = np.asarray(omega, dtype=float) ** 2
    return 1.0 + (x / 4.0) * 4.0 / (w2 + 4.0)


def s_single(p, omega_grid) -> SpectrumCurve:
    """Single laser: Lorentzian dip of depth ``p`` and half-width kappa."""
    p = check_p(p)
    omega = as_grid(omega_grid)
    return _curve(omega, single_values(p, omega), scenario="single", p=p)


def s_fbl(p, lam, omega_grid) -> SpectrumCurve:
    p, lam = check_p(p), check_lambda(lam)
    omega = as_grid(omega_grid)
    return _curve(omega, fbl_values(p, lam, omega), scenario="fbl", p=p, **{"lambda": lam})


def s_coupled(p, kappa, kappa_tilde, kappa0, omega_grid) -> SpectrumCurve:
    """Measuring-laser photocurrent when coherently pumped by the exciting laser."""
    p = check_p(p)
    for name, v in (("kappa", kappa), ("kappa_tilde", kappa_tilde), ("kappa0", kappa0)):
        check_positive(name, v)
    omega = as_grid(omega_grid)
    return _curve(
        omega,
        coupled_values(p, kappa, kappa_tilde, kappa0, omega),
        scenario="coupled",
        p=p,
        kappa=kappa,
        kappa_tilde=kappa_tilde,
        kappa0=kappa0,
    )


def s_coupled_fbl(lam, x, omega_grid) -> SpectrumCurve:
    """Coupled system with feedback, random pump, ``kappa = kappa_tilde = 1``.

    Only the p = 0 form is known in closed form; other pump statistics go
    through the linear-response engine.
    """
    lam = check_lambda(lam)
    check_positive("x", x)
    omega = as_grid(omega_grid)
    return _curve(
        omega,
        coupled_fbl_values(lam, 1.0, 1.0, x, omega),
        scenario="coupled-fbl",
        p=0.0,
        **{"lambda": lam, "x": x},
    )


def s_strong_limit(x, omega_grid) -> SpectrumCurve:
    """Large-feedback, strong-coupling limit: super-shot Lorentzian of width 2 kappa."""
    check_positive("x", x)
    omega = as_grid(omega_grid)
    return _curve(omega, strong_limit_values(x, omega), scenario="strong-limit", x=x)


class ClosedFormSpectrum(BaseEstimator):
    """Estimator-style wrapper around the closed forms.

    ``fit`` only validates the hyper-parameters; ``predict`` maps a
    frequency grid to spectral values.

    >>> ClosedFormSpectrum("fbl", p=0.0, lam=9.0).fit().predict([0.0])
    array([0.01])
    """

    def __init__(self, scenario="single", p=0.0, lam=0.0, kappa0_over_kappa=100.0, kappa_tilde_over_kappa=1.0):
        self.scenario = scenario
        self.p = p
        self.lam = lam
        self.kappa0_over_kappa = kappa0_over_kappa
        self.kappa_tilde_over_kappa = kappa_tilde_over_kappa

    def fit(self, X=None, y=None):
        check_scenario(self.scenario)
        check_p(self.p)
        check_lambda(self.lam)
        if self.scenario in ("coupled", "coupled-fbl"):
            check_positive("kappa0_over_kappa", self.kappa0_over_kappa)
            check_positive("kappa_tilde_over_kappa", self.kappa_tilde_over_kappa)
        if self.scenario == "coupled-fbl" and self.p != 0:
            raise ValueError("the coupled-fbl closed form exists for p = 0 only")
        self.is_fitted_ = True
        return self

    def predict(self, X):
        omega = check_frequencies(X)
        s = self.scenario
        if s == "single":
            return single_values(self.p, omega)
        if s == "fbl":
            return fbl_values(self.p, self.lam, omega)
        if s == "coupled":
            return coupled_values(self.p, 1.0, self.kappa_tilde_over_kappa, self.kappa0_over_kappa, omega)
        return coupled_fbl_values(self.lam, 1.0, self.kappa_tilde_over_kappa, self.kappa0_over_kappa, omega)

    def curve(self, omega_grid) -> SpectrumCurve:
        omega = as_grid(omega_grid)
        return _curve(omega, self.predict(omega), **_scenario_meta(self))


def _scenario_meta(est):
    meta = {"scenario": est.scenario, "p": est.p}
    if est.scenario in ("fbl", "coupled-fbl"):
        meta["lambda"] = est.lam
    if est.scenario in ("coupled", "coupled-fbl"):
        meta["kappa0_over_kappa"] = est.kappa0_over_kappa
        meta["kappa_tilde_over_kappa"] = est.kappa_tilde_over_kappa
    return meta
