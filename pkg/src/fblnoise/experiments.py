"""Run the computation routes for one configured scenario and cross-check them."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import ClosedFormSpectrum, s_strong_limit
from .compare import CompareReport, compare
from .config import ExperimentConfig, dump_config
from .curve import SpectrumCurve, write_csv, write_gnuplot
from .engine import FilteredFBL, build_model, make_spec, psd_curve, steady_for
from .params import FeedbackParams, LaserParams
from .simulation import SimConfig, simulate
from .spectral import WelchConfig, estimate_spectrum, merge_trajectories

logger = logging.getLogger(__name__)

LOW_FREQUENCY_LIMIT = 0.5
LIMIT_BAND = 10.0


@dataclass
class RunResult:
    curves: dict
    reports: list
    diagnostics: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.reports)

    @property
    def exit_code(self):
        return 0 if self.passed else 1


def _meta(cfg: ExperimentConfig, route):
    return {**cfg.echo(), "route": route, "seed": cfg.seed, "version": __version__}


def steady_report(cfg: ExperimentConfig) -> dict:
    spec = make_spec(cfg.scenario, cfg.p, cfg.lam, max(cfg.kappa0_over_kappa, 0.0),
                     cfg.kappa_tilde_over_kappa)
    st = steady_for(spec, R=cfg.R_over_kappa)
    return {k: getattr(st, k) for k in ("n", "n_tilde", "I", "N1_bar", "N2_bar", "gP_bar",
                                        "i_bar", "i_tilde_bar", "kappa", "kappa0", "kappa_tilde", "R")}


def analytic_curve(cfg: ExperimentConfig, omega=None) -> SpectrumCurve:
    omega = cfg.grid() if omega is None else omega
    est = ClosedFormSpectrum(cfg.scenario, cfg.p, cfg.lam, cfg.kappa0_over_kappa,
                             cfg.kappa_tilde_over_kappa).fit()
    return SpectrumCurve(omega, est.predict(omega), meta=_meta(cfg, "analytic"))


def engine_curve(cfg: ExperimentConfig, omega=None) -> SpectrumCurve:
    omega = cfg.grid() if omega is None else omega
    spec = make_spec(cfg.scenario, cfg.p, cfg.lam, cfg.kappa0_over_kappa,
                     cfg.kappa_tilde_over_kappa, cfg.detector)
    model = build_model(spec, steady_for(spec, R=cfg.R_over_kappa))
    curve = psd_curve(model, omega)
    meta = _meta(cfg, "engine")
    if "negative_spectrum" in curve.meta:
        meta["negative_spectrum"] = "true"
    return SpectrumCurve(curve.omega, curve.values, meta=meta)


def _one_trajectory(cfg: ExperimentConfig, seed):
    laser = LaserParams(kappa=1.0, R=cfg.R_over_kappa, p=cfg.p)
    fbl = FeedbackParams(cfg.lam, cfg.filter_bandwidth) if cfg.scenario == "fbl" and cfg.lam > 0 else None
    sim_cfg = SimConfig(cfg.duration, seed, cfg.warmup, cfg.rate_integration_step, cfg.detector_efficiency)
    result = simulate(laser, fbl, sim_cfg)
    welch = WelchConfig(cfg.segment_length, cfg.overlap, cfg.window, cfg.min_segments)
    curve = estimate_spectrum(result.counts, welch, band=(cfg.band_lo, cfg.band_hi), n_bands=cfg.n_bands)
    return curve, result.diagnostics


def simulate_curve(cfg: ExperimentConfig, jobs=1):
    """Merged Monte Carlo spectrum over seeds ``seed .. seed + n_seeds - 1``."""
    seeds = [cfg.seed + k for k in range(cfg.n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            out = list(pool.map(_one_trajectory, [cfg] * len(seeds), seeds))
    else:
        out = [_one_trajectory(cfg, s) for s in seeds]
    curves, diagnostics = zip(*out)
    merged = merge_trajectories(curves)
    meta = {**_meta(cfg, "simulate"), "n_seeds": cfg.n_seeds, "segments": merged.meta.get("segments", "")}
    merged = SpectrumCurve(merged.omega, merged.values, merged.ci_low, merged.ci_high, meta)
    diags = [{k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}
             for d in diagnostics]
    return merged, diags


def simulation_reference(cfg: ExperimentConfig, omega):
    """Theory curve the Monte Carlo estimate should match, with explanatory notes.

    With feedback the simulated loop contains a causal low-pass filter, so
    the reference is the filtered loop's linear response; its distance
    from the ideal instantaneous-feedback formula is reported alongside.
    """
    notes = []
    ideal = analytic_curve(cfg, omega)
    if cfg.scenario == "fbl" and cfg.lam > 0:
        spec = FilteredFBL(cfg.p, cfg.lam, cfg.filter_bandwidth)
        ref = psd_curve(build_model(spec, steady_for(spec, R=cfg.R_over_kappa)), omega)
        bias = np.abs(ref.values - ideal.values)
        notes.append(f"reference includes the {cfg.filter_bandwidth:g} kappa feedback filter; "
                     f"max filter bias vs ideal formula {bias.max():.3g} at w={omega[bias.argmax()]:.3g}")
        ref = SpectrumCurve(omega, ref.values, meta=_meta(cfg, "filtered-loop"))
    else:
        ref = ideal
    return ref, notes


def run(cfg: ExperimentConfig, *, write=True, jobs=1) -> RunResult:
    """Compute every configured route, compare them, and write the artifacts."""
    curves, reports, diagnostics = {}, [], []
    if "analytic" in cfg.routes:
        curves["analytic"] = analytic_curve(cfg)
    if "engine" in cfg.routes:
        curves["engine"] = engine_curve(cfg)
    if "simulate" in cfg.routes:
        curves["simulate"], diagnostics = simulate_curve(cfg, jobs=jobs)

    if "analytic" in curves and "engine" in curves:
        reports.append(compare(curves["engine"], curves["analytic"], tolerance_rel=cfg.engine_rel,
                               name="engine-vs-analytic"))

    if "simulate" in curves:
        mc = curves["simulate"]
        ref, notes = simulation_reference(cfg, mc.omega)
        if 0 < cfg.p < 1:
            notes.append("intermediate-p: low-frequency check only")
            mc = mc.restrict(hi=LOW_FREQUENCY_LIMIT)
            ref = ref.restrict(hi=LOW_FREQUENCY_LIMIT)
        clip = max((d.get("clip_fraction", 0.0) for d in diagnostics), default=0.0)
        if clip > 0.01:
            notes.append(f"pump clipped in {100 * clip:.2f}% of steps")
        curves["reference"] = ref
        reports.append(compare(mc, ref, tolerance_abs=cfg.simulate_abs, name="simulate-vs-theory",
                               notes=notes))

    if cfg.limit_enabled():
        base = curves.get("analytic", curves.get("engine"))
        if base is not None:
            near = base.restrict(hi=LIMIT_BAND)
            limit = s_strong_limit(cfg.kappa0_over_kappa, near.omega)
            reports.append(compare(near, limit, tolerance_rel=cfg.limit_rel, name="strong-limit",
                                   notes=[f"w <= {LIMIT_BAND:g} kappa"]))

    result = RunResult(curves, reports, diagnostics)
    if write:
        _write(cfg, result)
    return result


def _write(cfg: ExperimentConfig, result: RunResult):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for route, curve in result.curves.items():
        result.paths[route] = write_csv(curve, out / f"{cfg.scenario}_{route}.csv")
    write_gnuplot(result.curves, out / f"{cfg.scenario}_plot.dat")
    report = {
        "scenario": cfg.echo(),
        "passed": result.passed,
        "comparisons": [r.to_dict() for r in result.reports],
        "diagnostics": result.diagnostics,
        "version": __version__,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "run_config.ini").write_text(dump_config(cfg))
    result.paths["report"] = out / "report.json"


def sweep(cfg: ExperimentConfig, param: str, values, *, jobs=1):
    """Run ``cfg`` once per value of ``param``; each run writes to its own directory."""
    attr = {"lambda": "lam"}.get(param, param)
    if not hasattr(cfg, attr) or attr in ("source", "routes", "scenario", "output_dir"):
        raise ValueError(f"cannot sweep over {param!r}")
    cfgs = []
    for v in values:
        sub = Path(cfg.output_dir) / f"{param}={v:g}"
        cfgs.append(replace(cfg, **{attr: type(getattr(cfg, attr))(v)}, output_dir=str(sub)))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(run, cfgs))
    return [run(c) for c in cfgs]


__all__ = ["run", "sweep", "RunResult", "CompareReport", "analytic_curve", "engine_curve",
           "simulate_curve", "simulation_reference", "steady_report"]
