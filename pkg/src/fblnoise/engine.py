"""Frequency-domain linear response of Langevin systems with white sources.

A model is described by

    (-i w Id + M) x(w) = L f(w),      <f_j(w) f_k(w')> = C_jk delta(w + w'),
    delta_i(w) = a . x(w) + b . f(w),

and its shot-normalized photocurrent spectrum is
``Re[v C v^H] / shot_level`` with ``v = a (-i w + M)^-1 L + b``.
``C`` may be indefinite: the c-number pump source of a sub-Poissonian
laser has negative variance, and only the output spectrum has to be
non-negative.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frequencies, check_lambda, check_p, check_positive, check_scenario
from .curve import SpectrumCurve, as_grid
from .params import CouplingParams, LaserParams, SteadyState, steady_state


class ModelConstructionError(ValueError):
    pass


class NegativeSpectrumWarning(UserWarning):
    """A spectrum went negative: the scenario lies outside the linear theory."""


@dataclass(frozen=True, eq=False)
class LinearNoiseModel:
    M: np.ndarray
    L: np.ndarray
    C: np.ndarray
    a: np.ndarray
    b: np.ndarray
    shot_level: float
    label: str = ""

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        n, m = M.shape[0], L.shape[1]
        if M.shape != (n, n) or L.shape != (n, m) or C.shape != (m, m):
            raise ModelConstructionError(
                f"inconsistent shapes M{M.shape} L{L.shape} C{C.shape}"
            )
        if a.shape != (n,) or b.shape != (m,):
            raise ModelConstructionError(f"observable shapes a{a.shape} b{b.shape} do not fit n={n}, m={m}")
        for name, arr in (("M", M), ("L", L), ("C", C), ("a", a), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ModelConstructionError(f"{name} has non-finite entries")
        if not np.allclose(C, C.T, rtol=0, atol=1e-12 * max(1.0, np.abs(C).max())):
            raise ModelConstructionError("source correlation matrix C must be symmetric")
        if not np.isfinite(self.shot_level) or self.shot_level <= 0:
            raise ModelConstructionError(f"shot_level must be > 0, got {self.shot_level!r}")
        eig = np.linalg.eigvals(M)
        if np.any(eig.real <= 0):
            raise ModelConstructionError(
                f"drift matrix is not stable (eigenvalues {eig}) for {self.label or 'model'}"
            )
        for name, arr in (("M", M), ("L", L), ("C", C), ("a", a), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self):
        return self.M.shape[0]

    @property
    def n_sources(self):
        return self.L.shape[1]


# Scenario descriptions. ``detector`` selects which photocurrent is observed.

@dataclass(frozen=True)
class Single:
    p: float = 0.0
    detector: str = "exciting"


@dataclass(frozen=True)
class FBL:
    p: float = 0.0
    lam: float = 0.0
    detector: str = "exciting"


@dataclass(frozen=True)
class Coupled:
    p: float = 0.0
    kappa: float = 1.0
    kappa_tilde: float = 1.0
    kappa0: float = 100.0
    detector: str = "measuring"


@dataclass(frozen=True)
class CoupledFBL:
    p: float = 0.0
    lam: float = 0.0
    kappa: float = 1.0
    kappa_tilde: float = 1.0
    kappa0: float = 100.0
    detector: str = "measuring"


@dataclass(frozen=True)
class FilteredFBL:
    """Feedback through a single-pole low-pass filter of bandwidth ``filter_bandwidth``.

    This is the loop the time-domain simulator actually closes; its
    spectrum tends to the ideal FBL one as the bandwidth grows.
    """

    p: float = 0.0
    lam: float = 0.0
    filter_bandwidth: float = 50.0
    detector: str = "exciting"


ScenarioSpec = Union[Single, FBL, Coupled, CoupledFBL, FilteredFBL]


def steady_for(spec: ScenarioSpec, R=1.0e4) -> SteadyState:
    """Operating point matching a scenario; spectra do not depend on ``R``."""
    if isinstance(spec, (Coupled, CoupledFBL)):
        laser = LaserParams(kappa=spec.kappa, R=R, p=spec.p)
        return steady_state(laser, CouplingParams(spec.kappa0, spec.kappa_tilde, spec.kappa))
    return steady_state(LaserParams(kappa=1.0, R=R, p=spec.p))


def _check_consistent(spec, steady):
    coupled = isinstance(spec, (Coupled, CoupledFBL))
    k0 = spec.kappa0 if coupled else 0.0
    kappa = spec.kappa if coupled else steady.kappa
    if abs(steady.kappa0 - k0) > 1e-12 * max(1.0, k0) or abs(steady.kappa - kappa) > 1e-12 * kappa:
        raise ModelConstructionError(
            f"steady state (kappa={steady.kappa}, kappa0={steady.kappa0}) does not match {spec}"
        )
    if coupled and abs(steady.kappa_tilde - spec.kappa_tilde) > 1e-12 * spec.kappa_tilde:
        raise ModelConstructionError(f"steady state kappa_tilde does not match {spec}")


def build_model(spec: ScenarioSpec, steady: SteadyState) -> LinearNoiseModel:
    """Linear noise model of one of the supported scenarios.

    Single/FBL sources are (F, S); Coupled sources are (F, F~, S~) or, for
    the exciting detector, (F, F~, S); CoupledFBL sources are (F, F~, S, S~).
    The pump source of the exciting laser and the measuring-laser source
    are cross-correlated, <F F~> = kappa0 n: the exciting laser's photons
    absorbed by the three-level medium are the measuring laser's pump.
    """
    check_p(spec.p)
    _check_consistent(spec, steady)
    n, nt = steady.n, steady.n_tilde
    i_bar, it_bar = steady.i_bar, steady.i_tilde_bar
    kappa = steady.kappa
    label = repr(spec)

    if isinstance(spec, Single):
        if spec.detector != "exciting":
            raise ModelConstructionError("single laser has only the exciting detector")
        return LinearNoiseModel(
            M=[[kappa]], L=[[1.0, 0.0]], C=np.diag([-spec.p * i_bar, i_bar]),
            a=[kappa], b=[0.0, 1.0], shot_level=i_bar, label=label,
        )

    if isinstance(spec, FBL):
        lam = check_lambda(spec.lam)
        if spec.detector != "exciting":
            raise ModelConstructionError("fbl laser has only the exciting detector")
        return LinearNoiseModel(
            M=[[(1.0 + lam) * kappa]], L=[[1.0, -lam]], C=np.diag([-spec.p * i_bar, i_bar]),
            a=[kappa], b=[0.0, 1.0], shot_level=i_bar, label=label,
        )

    if isinstance(spec, FilteredFBL):
        lam = check_lambda(spec.lam)
        wf = check_positive("filter_bandwidth", spec.filter_bandwidth)
        # state (eps, y): y is the filtered photocurrent fluctuation
        return LinearNoiseModel(
            M=[[kappa, lam], [-wf * kappa, wf]],
            L=[[1.0, 0.0], [0.0, wf]],
            C=np.diag([-spec.p * i_bar, i_bar]),
            a=[kappa, 0.0], b=[0.0, 1.0], shot_level=i_bar, label=label,
        )

    k0, kt = spec.kappa0, spec.kappa_tilde
    if spec.detector not in ("measuring", "exciting"):
        raise ModelConstructionError(f"unknown detector {spec.detector!r}")
    cov_pump = np.array([[-spec.p * (kappa + k0) * n, k0 * n], [k0 * n, -2.0 * kt * nt]])

    if isinstance(spec, Coupled):
        M = [[kappa + k0, -kt], [-k0, 2.0 * kt]]
        L = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        if spec.detector == "measuring":
            C = _block(cov_pump, [it_bar])
            return LinearNoiseModel(M, L, C, a=[0.0, kt], b=[0, 0, 1.0], shot_level=it_bar, label=label)
        C = _block(cov_pump, [i_bar])
        return LinearNoiseModel(M, L, C, a=[kappa, 0.0], b=[0, 0, 1.0], shot_level=i_bar, label=label)

    if isinstance(spec, CoupledFBL):
        lam = check_lambda(spec.lam)
        M = [[(kappa + k0) * (1.0 + lam), -kt], [-k0, 2.0 * kt]]
        L = [[1.0, 0.0, -lam * (1.0 + k0 / kappa), 0.0], [0.0, 1.0, 0.0, 0.0]]
        C = _block(cov_pump, [i_bar, it_bar])
        if spec.detector == "measuring":
            return LinearNoiseModel(M, L, C, a=[0.0, kt], b=[0, 0, 0, 1.0], shot_level=it_bar, label=label)
        return LinearNoiseModel(M, L, C, a=[kappa, 0.0], b=[0, 0, 1.0, 0], shot_level=i_bar, label=label)

    raise TypeError(f"unsupported scenario {spec!r}")


def _block(top_left, diag_rest):
    k = top_left.shape[0]
    out = np.zeros((k + len(diag_rest),) * 2)
    out[:k, :k] = top_left
    out[k:, k:] = np.diag(diag_rest)
    return out


def transfer_row(model: LinearNoiseModel, omega) -> np.ndarray:
    """Row v(w) mapping source amplitudes to the photocurrent."""
    A = model.M - 1j * omega * np.eye(model.n_states)
    # solve A^T y = a  =>  y^T = a A^-1
    y = np.linalg.solve(A.T, model.a.astype(complex))
    return y @ model.L + model.b


def psd_at(model: LinearNoiseModel, omega) -> float:
    v = transfer_row(model, float(omega))
    s = v @ model.C @ v.conj()
    assert abs(s.imag) <= 1e-10 * max(abs(s.real), 1e-300) + 1e-300
    return float(s.real) / model.shot_level


def psd_curve(model: LinearNoiseModel, omega_grid, *, flag_negative=True) -> SpectrumCurve:
    omega = as_grid(omega_grid)
    values = psd_values(model, omega)
    meta = {"route": "engine", "model": model.label}
    if flag_negative and np.any(values < 0):
        meta["negative_spectrum"] = "true"
        warnings.warn(
            f"negative spectral values (min {values.min():.3g}) for {model.label}",
            NegativeSpectrumWarning,
            stacklevel=2,
        )
    return SpectrumCurve(omega, values, meta=meta)


def psd_values(model: LinearNoiseModel, omega) -> np.ndarray:
    """Vectorized ``psd_at`` over a grid (batched complex solves)."""
    omega = np.asarray(omega, dtype=float).reshape(-1)
    n = model.n_states
    A = model.M.T[None, :, :] - 1j * omega[:, None, None] * np.eye(n)[None, :, :]
    rhs = np.broadcast_to(model.a.astype(complex), (omega.size, n))[..., None]
    y = np.linalg.solve(A, rhs)[..., 0]
    v = y @ model.L + model.b
    s = np.einsum("kj,jl,kl->k", v, model.C, v.conj())
    scale = np.maximum(np.abs(s.real), 1e-300)
    assert np.all(np.abs(s.imag) <= 1e-10 * scale + 1e-300)
    return s.real / model.shot_level


def make_spec(scenario, p=0.0, lam=0.0, kappa0_over_kappa=100.0, kappa_tilde_over_kappa=1.0, detector=None):
    """Scenario object from the flat parameter names used by the CLI."""
    check_scenario(scenario)
    kw = {} if detector is None else {"detector": detector}
    if scenario == "single":
        return Single(p, **kw)
    if scenario == "fbl":
        return FBL(p, lam, **kw)
    if scenario == "coupled":
        return Coupled(p, 1.0, kappa_tilde_over_kappa, kappa0_over_kappa, **kw)
    return CoupledFBL(p, lam, 1.0, kappa_tilde_over_kappa, kappa0_over_kappa, **kw)


class LinearResponseSpectrum(BaseEstimator):
    """Estimator-style front end to the engine.

    ``fit`` builds the linear noise model (stored as ``model_``); ``predict``
    evaluates its shot-normalized spectrum on a frequency grid.
    """

    def __init__(self, scenario="single", p=0.0, lam=0.0, kappa0_over_kappa=100.0,
                 kappa_tilde_over_kappa=1.0, detector=None, R_over_kappa=1.0e4):
        self.scenario = scenario
        self.p = p
        self.lam = lam
        self.kappa0_over_kappa = kappa0_over_kappa
        self.kappa_tilde_over_kappa = kappa_tilde_over_kappa
        self.detector = detector
        self.R_over_kappa = R_over_kappa

    def fit(self, X=None, y=None):
        spec = make_spec(self.scenario, self.p, self.lam, self.kappa0_over_kappa,
                         self.kappa_tilde_over_kappa, self.detector)
        self.spec_ = spec
        self.steady_ = steady_for(spec, R=self.R_over_kappa)
        self.model_ = build_model(spec, self.steady_)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return psd_values(self.model_, check_frequencies(X))

    def curve(self, omega_grid) -> SpectrumCurve:
        check_is_fitted(self, "model_")
        return psd_curve(self.model_, omega_grid).with_meta(scenario=self.scenario, p=self.p)
