import warnings

import numpy as np
import pytest
import sympy as sp
from sklearn.base import clone

from fblnoise.analytic import coupled_fbl_values, coupled_values, fbl_values, single_values
from fblnoise.engine import (
    FBL,
    Coupled,
    CoupledFBL,
    FilteredFBL,
    LinearNoiseModel,
    LinearResponseSpectrum,
    ModelConstructionError,
    NegativeSpectrumWarning,
    Single,
    build_model,
    psd_at,
    psd_curve,
    psd_values,
    steady_for,
    transfer_row,
)
from fblnoise.params import LaserParams, steady_state

W = np.linspace(0.0, 20.0, 512)
P_VALUES = (-1.0, 0.0, 0.5, 1.0)


def model(spec, R=1e4):
    return build_model(spec, steady_for(spec, R))


def rel(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-6))


@pytest.mark.parametrize("p", P_VALUES)
def test_single_matches_closed_form(p):
    assert rel(psd_values(model(Single(p)), W), single_values(p, W)) <= 1e-9


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("lam", [0.0, 0.5, 9.0, 100.0])
def test_fbl_matches_closed_form(p, lam):
    assert rel(psd_values(model(FBL(p, lam)), W), fbl_values(p, lam, W)) <= 1e-9


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("kt,k0", [(1.0, 1.0), (1.0, 100.0), (0.3, 7.0), (2.0, 1e4)])
def test_coupled_matches_closed_form(p, kt, k0):
    eng = psd_values(model(Coupled(p, 1.0, kt, k0)), W)
    assert rel(eng, coupled_values(p, 1.0, kt, k0, W)) <= 1e-9


@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0, 1e3])
@pytest.mark.parametrize("x", [0.5, 10.0, 1e3])
def test_coupled_fbl_matches_closed_form(lam, x):
    eng = psd_values(model(CoupledFBL(0.0, lam, 1.0, 1.0, x)), W)
    assert rel(eng, coupled_fbl_values(lam, 1.0, 1.0, x, W)) <= 1e-9


def test_examples():
    assert psd_at(model(Single(1.0)), 1.0) == pytest.approx(0.5, abs=1e-12)
    assert psd_at(model(FBL(0.0, 9.0)), 0.0) == pytest.approx(0.01, abs=1e-12)


def test_psd_at_agrees_with_vectorized():
    m = model(CoupledFBL(0.0, 3.0, 1.0, 0.7, 20.0))
    assert np.allclose([psd_at(m, w) for w in W[::37]], psd_values(m, W[::37]), rtol=1e-13)


def test_normalization_independent_of_R():
    a = psd_values(model(Coupled(0.4, 1.0, 1.0, 30.0), R=1e4), W)
    b = psd_values(model(Coupled(0.4, 1.0, 1.0, 30.0), R=1e7), W)
    assert np.allclose(a, b, rtol=1e-12)


def test_spectrum_even_in_frequency():
    m = model(CoupledFBL(0.0, 2.0, 1.0, 1.0, 5.0))
    for w in (0.1, 1.3, 7.0):
        def s(omega):
            v = transfer_row(m, omega)
            return (v @ m.C @ v.conj()).real

        assert s(w) == pytest.approx(s(-w), rel=1e-13)


def test_linear_in_source_correlations():
    m = model(FBL(0.3, 2.0))
    C2 = np.diag([0.7, 2.5])
    m1 = LinearNoiseModel(m.M, m.L, m.C, m.a, m.b, m.shot_level)
    m2 = LinearNoiseModel(m.M, m.L, C2, m.a, m.b, m.shot_level)
    m12 = LinearNoiseModel(m.M, m.L, 2.0 * m.C + 3.0 * C2, m.a, m.b, m.shot_level)
    assert np.allclose(psd_values(m12, W), 2.0 * psd_values(m1, W) + 3.0 * psd_values(m2, W), rtol=1e-12)


@pytest.mark.parametrize("spec", [
    Single(0.0), FBL(0.0, 9.0), Coupled(0.0, 1.0, 1.0, 100.0), Coupled(1.0, 1.0, 1.0, 100.0),
    CoupledFBL(0.0, 1e3, 1.0, 1.0, 1e3), FilteredFBL(0.0, 9.0, 50.0),
])
def test_nonnegative_for_physical_sources(spec):
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeSpectrumWarning)
        assert np.all(psd_curve(model(spec), W).values >= 0)


def test_negative_spectrum_flagged():
    # a source matrix that is not a valid covariance
    m = model(Single(0.0))
    bad = LinearNoiseModel(m.M, m.L, np.diag([-3.0 * m.shot_level, m.shot_level]), m.a, m.b, m.shot_level)
    with pytest.warns(NegativeSpectrumWarning):
        c = psd_curve(bad, W)
    assert c.meta["negative_spectrum"] == "true"


def test_unstable_model_rejected():
    with pytest.raises(ModelConstructionError):
        LinearNoiseModel([[-1.0]], [[1.0]], [[1.0]], [1.0], [0.0], 1.0)


@pytest.mark.parametrize("kw", [
    {"L": [[1.0, 0.0, 0.0]]},
    {"C": [[1.0, 2.0], [0.0, 1.0]]},
    {"a": [1.0, 1.0]},
    {"M": [[np.nan]]},
    {"shot_level": 0.0},
])
def test_contract_violations(kw):
    base = {"M": [[1.0]], "L": [[1.0, 0.0]], "C": np.eye(2), "a": [1.0], "b": [0.0, 1.0], "shot_level": 1.0}
    base.update(kw)
    with pytest.raises(ModelConstructionError):
        LinearNoiseModel(**base)


def test_steady_state_mismatch_rejected():
    spec = Coupled(0.0, 1.0, 1.0, 100.0)
    with pytest.raises(ModelConstructionError):
        build_model(spec, steady_state(LaserParams(R=1e4)))


def test_single_laser_has_no_measuring_detector():
    with pytest.raises(ModelConstructionError):
        model(Single(0.0, detector="measuring"))


def test_exciting_detector_variant():
    m = model(Coupled(0.0, 1.0, 1.0, 50.0, detector="exciting"))
    v = psd_values(m, np.array([0.0, 1e4]))
    assert v[0] > 0
    assert v[1] == pytest.approx(1.0, abs=1e-3)


def test_diagonal_sources_do_not_reproduce_coupled_spectrum():
    # dropping the pump cross-correlation breaks agreement (and positivity)
    m = model(Coupled(0.0, 1.0, 1.0, 100.0))
    C = np.diag(np.diag(m.C))
    diag_only = LinearNoiseModel(m.M, m.L, C, m.a, m.b, m.shot_level)
    assert rel(psd_values(diag_only, W), coupled_values(0.0, 1.0, 1.0, 100.0, W)) > 0.1


@pytest.mark.parametrize("p,lam", [(0.0, 9.0), (1.0, 3.0), (0.5, 20.0)])
def test_filtered_loop_tends_to_ideal(p, lam):
    ideal = fbl_values(p, lam, W)
    devs = [np.max(np.abs(psd_values(model(FilteredFBL(p, lam, wf)), W) - ideal)) for wf in (50.0, 500.0, 5e4)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-2


def _symbolic_spectrum(M, L, C, a, b, shot):
    w = sp.Symbol("omega", real=True)
    A = M - sp.I * w * sp.eye(M.shape[0])
    v = (a.T * A.inv() * L + b.T)
    s = (v * C * v.conjugate().T)[0, 0]
    return w, sp.simplify(sp.re(sp.expand_complex(s)) / shot)


def test_symbolic_coupled_spectrum():
    """Symbolic derivation from the model matrices equals the closed form."""
    k, kt, k0, p, R = sp.symbols("kappa kappa_t kappa_0 p R", positive=True)
    n = R / (k + k0)
    nt = n * k0 / kt
    M = sp.Matrix([[k + k0, -kt], [-k0, 2 * kt]])
    L = sp.Matrix([[1, 0, 0], [0, 1, 0]])
    C = sp.Matrix([[-p * (k + k0) * n, k0 * n, 0], [k0 * n, -2 * kt * nt, 0], [0, 0, kt * nt]])
    w, s = _symbolic_spectrum(M, L, C, sp.Matrix([0, kt]), sp.Matrix([0, 0, 1]), kt * nt)
    f = sp.lambdify((k, kt, k0, p, R, w), s)
    rng = np.random.default_rng(3)
    for _ in range(20):
        args = (rng.uniform(0.2, 3), rng.uniform(0.2, 3), 10 ** rng.uniform(-1, 3), rng.uniform(-1, 1))
        for omega in (0.0, 0.7, 4.0):
            want = coupled_values(args[3], args[0], args[1], args[2], omega)
            assert f(*args, 1e4, omega) == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_symbolic_fbl_spectrum():
    k, lam, p = sp.symbols("kappa lambda p", positive=True)
    i = sp.Symbol("i", positive=True)
    M = sp.Matrix([[(1 + lam) * k]])
    w, s = _symbolic_spectrum(M, sp.Matrix([[1, -lam]]), sp.diag(-p * i, i), sp.Matrix([k]), sp.Matrix([0, 1]), i)
    closed = 1 - (p - 1 + (1 + lam) ** 2) / ((1 + lam) ** 2 + (w / k) ** 2)
    assert sp.simplify(s - closed) == 0


def test_estimator_api():
    est = LinearResponseSpectrum("coupled", p=0.0, kappa0_over_kappa=100.0)
    assert clone(est).get_params() == est.get_params()
    y = est.fit().predict([[0.0]])
    assert y[0] == pytest.approx(0.9805843906, abs=1e-10)
    with pytest.raises(Exception):
        LinearResponseSpectrum().predict([0.0])
    curve = est.curve(W)
    assert curve.meta["route"] == "engine" and curve.meta["scenario"] == "coupled"
