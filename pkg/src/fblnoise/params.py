"""Physical parameters of the lasers and the semiclassical operating point.

All rates are in units of 1/time; the CLI works in units where the
exciting-laser mode width ``kappa`` equals 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional


class ParameterDomainError(ValueError):
    """A physical parameter is outside its admissible domain."""


class SaturationWarning(UserWarning):
    """The saturated-regime photon-number equation is a weak approximation."""


class RegimeWarning(UserWarning):
    """Inputs violate a simplifying limit assumed by the stationary solutions."""


def _positive(name, value):
    if value is None:
        return
    if not math.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"{name} must be finite and > 0, got {value!r}")


def _nonnegative(name, value):
    if not math.isfinite(value) or value < 0:
        raise ParameterDomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class LaserParams:
    """Two-level laser.

    ``beta_inv`` is the saturation photon number. When ``gamma_perp``,
    ``gamma1`` and ``g`` are all given it is derived from them (or checked
    against them if also given explicitly).
    """

    kappa: float = 1.0
    R: float = 1.0e4
    p: float = 0.0
    beta_inv: Optional[float] = None
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    gamma_perp: Optional[float] = None
    g: Optional[float] = None

    def __post_init__(self):
        _positive("kappa", self.kappa)
        _positive("R", self.R)
        for name in ("beta_inv", "gamma1", "gamma2", "gamma_perp", "g"):
            _positive(name, getattr(self, name))
        if not math.isfinite(self.p) or self.p > 1:
            raise ParameterDomainError(f"p must be finite and <= 1, got {self.p!r}")

        if None not in (self.gamma_perp, self.gamma1, self.g):
            derived = self.gamma_perp * self.gamma1 / (2.0 * self.g ** 2)
            if self.beta_inv is None:
                object.__setattr__(self, "beta_inv", derived)
            elif abs(self.beta_inv - derived) > 1e-12 * derived:
                raise ParameterDomainError(
                    f"beta_inv={self.beta_inv!r} inconsistent with "
                    f"gamma_perp*gamma1/(2 g^2)={derived!r}"
                )

    @property
    def beta(self):
        return None if self.beta_inv is None else 1.0 / self.beta_inv


@dataclass(frozen=True)
class FeedbackParams:
    """Negative feedback from the photocurrent onto the pump.

    ``filter_bandwidth`` only matters for the time-domain simulation, where
    the photocurrent must be smoothed causally before it modulates the pump.
    """

    lam: float = 0.0
    filter_bandwidth: float = 50.0

    def __post_init__(self):
        _nonnegative("lam", self.lam)
        _positive("filter_bandwidth", self.filter_bandwidth)


@dataclass(frozen=True)
class ThreeLevelParams:
    kappa_tilde: float = 1.0
    gamma2_tilde: float = 1.0
    gamma1_tilde: float = 100.0
    g13_over_g12: float = 1.0
    N_tilde: float = 1.0

    def __post_init__(self):
        for name in ("kappa_tilde", "gamma2_tilde", "gamma1_tilde", "g13_over_g12"):
            _positive(name, getattr(self, name))
        if not math.isfinite(self.N_tilde) or self.N_tilde < 1:
            raise ParameterDomainError(f"N_tilde must be >= 1, got {self.N_tilde!r}")
        if self.gamma2_tilde >= 0.1 * self.gamma1_tilde:
            warnings.warn(
                "gamma2_tilde is not much smaller than gamma1_tilde; the coupled "
                "equations assume gamma2_tilde << gamma1_tilde",
                RegimeWarning,
                stacklevel=3,
            )

    @property
    def pump_constant(self):
        """Lumped constant c = gamma2_tilde * (g13/g12)**2 * N_tilde."""
        return self.gamma2_tilde * self.g13_over_g12 ** 2 * self.N_tilde


@dataclass(frozen=True)
class CouplingParams:
    """Coherent pumping of the measuring laser by the exciting laser."""

    kappa0: float
    kappa_tilde: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        _nonnegative("kappa0", self.kappa0)
        _positive("kappa_tilde", self.kappa_tilde)
        _positive("kappa", self.kappa)

    @property
    def x(self):
        return self.kappa0 / self.kappa


@dataclass(frozen=True)
class SteadyState:
    n: float
    n_tilde: float
    I: Optional[float]
    N1_bar: Optional[float]
    N2_bar: Optional[float]
    gP_bar: float
    i_bar: float
    i_tilde_bar: float
    # parameter echo, used by the engine for consistency checks
    kappa: float = 1.0
    kappa0: float = 0.0
    kappa_tilde: float = 1.0
    R: float = 1.0
    flags: tuple = field(default_factory=tuple)

    @property
    def saturation_warning(self):
        return "weak-saturation" in self.flags


def steady_state(params: LaserParams, coupling: Optional[CouplingParams] = None) -> SteadyState:
    """Semiclassical operating point in the saturation limit.

    Without coupling the exciting laser loses photons only through its
    mirror, so ``n = R/kappa``. With coupling the coherent pump of the
    measuring laser adds a loss channel ``kappa0`` and ``n_tilde`` follows
    from ``n_tilde * kappa_tilde = n * kappa0``.
    """
    kappa = params.kappa
    if coupling is None:
        kappa0, kappa_tilde = 0.0, 1.0
    else:
        if abs(coupling.kappa - kappa) > 1e-12 * kappa:
            raise ParameterDomainError(
                f"coupling.kappa={coupling.kappa!r} differs from laser kappa={kappa!r}"
            )
        kappa0, kappa_tilde = coupling.kappa0, coupling.kappa_tilde

    n = params.R / (kappa + kappa0)
    n_tilde = n * kappa0 / kappa_tilde
    flags = []

    I = N1 = N2 = None
    if params.beta_inv is not None:
        I = n / params.beta_inv
        if I < 10:
            flags.append("weak-saturation")
            warnings.warn(
                f"dimensionless power I={I:.3g} is not >> 1; the saturated-regime "
                "photon-number equation is a poor approximation",
                SaturationWarning,
                stacklevel=2,
            )
        if params.gamma1 is not None:
            N1 = kappa * params.beta_inv / params.gamma1
    if params.gamma2 is not None:
        N2 = kappa * n / params.gamma2
    if params.gamma1 is not None and params.gamma2 is not None:
        if params.gamma1 >= 0.1 * params.gamma2:
            flags.append("gamma1-not-small")
            warnings.warn(
                "stationary solutions assume gamma1 << gamma2", RegimeWarning, stacklevel=2
            )

    return SteadyState(
        n=n,
        n_tilde=n_tilde,
        I=I,
        N1_bar=N1,
        N2_bar=N2,
        gP_bar=0.5 * kappa * n,
        i_bar=kappa * n,
        i_tilde_bar=kappa_tilde * n_tilde,
        kappa=kappa,
        kappa0=kappa0,
        kappa_tilde=kappa_tilde,
        R=params.R,
        flags=tuple(flags),
    )


def solve_kappa0(params: LaserParams, tl: ThreeLevelParams) -> CouplingParams:
    """Self-consistent coherent-pump rate kappa0 = c / n_tilde.

    Eliminating ``n_tilde`` with the stationary relations gives
    ``R k0**2 - c kt k0 - c kt kappa = 0``; the positive root is returned.
    """
    c = tl.pump_constant
    kt, kappa, R = tl.kappa_tilde, params.kappa, params.R
    if c == 0:
        return CouplingParams(kappa0=0.0, kappa_tilde=kt, kappa=kappa)
    b = c * kt
    disc = b * b + 4.0 * R * b * kappa
    assert disc >= 0
    # product of roots is -b*kappa/R < 0, so exactly one positive root
    k0 = (b + math.sqrt(disc)) / (2.0 * R)
    return CouplingParams(kappa0=k0, kappa_tilde=kt, kappa=kappa)
