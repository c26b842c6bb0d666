"""Pointwise comparison of two spectrum curves."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .curve import SpectrumCurve

# denominators of relative deviations are floored here so that exact zeros
# of the reference (e.g. a fully regular pump at w = 0) stay comparable
REL_FLOOR = 1e-6
MIN_CI_COVERAGE = 0.9


class GridMismatchError(ValueError):
    pass


@dataclass
class CompareReport:
    name: str
    max_abs: float
    max_rel: float
    omega_at_max_abs: float
    omega_at_max_rel: float
    tolerance_abs: Optional[float]
    tolerance_rel: Optional[float]
    passed: bool
    ci_coverage: Optional[float] = None
    n_points: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {k: (float(v) if isinstance(v, np.floating) else v) for k, v in asdict(self).items()}

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        line = (f"{status} {self.name}: max_abs={self.max_abs:.3g} (w={self.omega_at_max_abs:.4g}) "
                f"max_rel={self.max_rel:.3g} (w={self.omega_at_max_rel:.4g})")
        if self.ci_coverage is not None:
            line += f" ci_coverage={self.ci_coverage:.3f}"
        if self.notes:
            line += " [" + "; ".join(self.notes) + "]"
        return line


def compare(curve_a: SpectrumCurve, curve_b: SpectrumCurve, tolerance_abs=None, tolerance_rel=None,
            *, name="comparison", notes=()) -> CompareReport:
    """Compare ``curve_a`` against the reference ``curve_b``.

    Without confidence bounds the curves pass when every point satisfies
    ``|a - b| <= tolerance_abs + tolerance_rel * max(|b|, REL_FLOOR)``. When
    ``curve_a`` carries confidence bounds (a Monte Carlo estimate) it also
    passes if the reference lies inside those bounds at >= 90% of points.
    """
    if not curve_a.same_grid(curve_b, rtol=1e-12):
        raise GridMismatchError(f"{name}: curves are sampled on different grids")
    a, b, w = curve_a.values, curve_b.values, curve_a.omega
    dev = np.abs(a - b)
    rel = dev / np.maximum(np.abs(b), REL_FLOOR)
    i_abs, i_rel = int(np.argmax(dev)), int(np.argmax(rel))

    tol_a = 0.0 if tolerance_abs is None else tolerance_abs
    tol_r = 0.0 if tolerance_rel is None else tolerance_rel
    if tolerance_abs is None and tolerance_rel is None:
        within = True
    else:
        within = bool(np.all(dev <= tol_a + tol_r * np.maximum(np.abs(b), REL_FLOOR)))

    coverage = None
    passed = within
    if curve_a.has_ci:
        inside = (b >= curve_a.ci_low) & (b <= curve_a.ci_high)
        coverage = float(inside.mean())
        ci_ok = coverage >= MIN_CI_COVERAGE
        passed = ci_ok or (within and (tolerance_abs is not None or tolerance_rel is not None))

    return CompareReport(
        name=name,
        max_abs=float(dev[i_abs]),
        max_rel=float(rel[i_rel]),
        omega_at_max_abs=float(w[i_abs]),
        omega_at_max_rel=float(w[i_rel]),
        tolerance_abs=tolerance_abs,
        tolerance_rel=tolerance_rel,
        passed=bool(passed),
        ci_coverage=coverage,
        n_points=int(w.size),
        notes=list(notes),
    )
