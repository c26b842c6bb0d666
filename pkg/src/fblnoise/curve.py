"""Spectrum curves and their CSV / gnuplot serialization."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

CSV_COLUMNS = ("omega_over_kappa", "value", "ci_low", "ci_high")


def default_grid(n=512, lo=1e-2, hi=1e2):
    """ω = 0 followed by ``n - 1`` log-spaced points in [lo, hi]."""
    return np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), n - 1)])


def linear_grid(n=512, lo=0.0, hi=20.0):
    return np.linspace(lo, hi, n)


def as_grid(omega):
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.ndim != 1 or omega.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-d array")
    if not np.all(np.isfinite(omega)):
        raise ValueError("frequency grid must be finite")
    if omega[0] < 0:
        raise ValueError("spectra are even in w; grids hold w >= 0 only")
    if omega.size > 1 and np.any(np.diff(omega) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    return omega


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """Shot-normalized spectrum sampled on a frequency grid (units of kappa)."""

    omega: np.ndarray
    values: np.ndarray
    ci_low: Optional[np.ndarray] = None
    ci_high: Optional[np.ndarray] = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        omega = as_grid(self.omega)
        values = np.asarray(self.values, dtype=float)
        if values.shape != omega.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {omega.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum values must be finite")
        if (self.ci_low is None) != (self.ci_high is None):
            raise ValueError("ci_low and ci_high must be given together")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)
        if self.ci_low is not None:
            lo = np.asarray(self.ci_low, dtype=float)
            hi = np.asarray(self.ci_high, dtype=float)
            if lo.shape != omega.shape or hi.shape != omega.shape:
                raise ValueError("confidence bounds must match the grid")
            object.__setattr__(self, "ci_low", lo)
            object.__setattr__(self, "ci_high", hi)
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in self.meta.items()})

    @property
    def has_ci(self):
        return self.ci_low is not None

    def __len__(self):
        return self.omega.size

    def same_grid(self, other, rtol=0.0):
        return self.omega.shape == other.omega.shape and np.allclose(
            self.omega, other.omega, rtol=rtol, atol=0.0
        )

    def equals(self, other):
        """Exact equality of grids, values, bounds and metadata."""
        if not (np.array_equal(self.omega, other.omega) and np.array_equal(self.values, other.values)):
            return False
        if self.has_ci != other.has_ci:
            return False
        if self.has_ci and not (
            np.array_equal(self.ci_low, other.ci_low) and np.array_equal(self.ci_high, other.ci_high)
        ):
            return False
        return dict(self.meta) == dict(other.meta)

    def restrict(self, lo=-np.inf, hi=np.inf):
        mask = (self.omega >= lo) & (self.omega <= hi)
        return SpectrumCurve(
            self.omega[mask],
            self.values[mask],
            None if self.ci_low is None else self.ci_low[mask],
            None if self.ci_high is None else self.ci_high[mask],
            self.meta,
        )

    def with_meta(self, **extra):
        return SpectrumCurve(self.omega, self.values, self.ci_low, self.ci_high, {**self.meta, **extra})


def _fmt(x):
    return format(float(x), ".17g")


def to_csv(curve: SpectrumCurve) -> str:
    buf = io.StringIO()
    for key in sorted(curve.meta):
        value = curve.meta[key].replace("\n", " ")
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for j in range(len(curve)):
        row = [_fmt(curve.omega[j]), _fmt(curve.values[j])]
        if curve.has_ci:
            row += [_fmt(curve.ci_low[j]), _fmt(curve.ci_high[j])]
        else:
            row += ["", ""]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> SpectrumCurve:
    meta = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: malformed metadata line")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if tuple(c.strip() for c in line.split(",")) != CSV_COLUMNS:
                raise ValueError(f"line {lineno}: expected header {','.join(CSV_COLUMNS)}")
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 4:
            raise ValueError(f"line {lineno}: expected 4 columns, got {len(cells)}")
        rows.append(cells)
    if not header_seen:
        raise ValueError("missing CSV header")

    omega = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows])
    has_ci = [bool(r[2].strip()) for r in rows]
    if any(has_ci) and not all(has_ci):
        raise ValueError("confidence columns must be all filled or all empty")
    if rows and all(has_ci):
        lo = np.array([float(r[2]) for r in rows])
        hi = np.array([float(r[3]) for r in rows])
        return SpectrumCurve(omega, values, lo, hi, meta)
    return SpectrumCurve(omega, values, meta=meta)


def write_csv(curve: SpectrumCurve, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv(curve))
    return path


def read_csv(path) -> SpectrumCurve:
    return from_csv(Path(path).read_text())


def write_gnuplot(curves: Mapping[str, SpectrumCurve], path) -> Path:
    """One data block per route, separated by two blank lines (``index`` in gnuplot)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for idx, (name, curve) in enumerate(curves.items()):
        if idx:
            lines += ["", ""]
        lines.append(f"# index {idx}: {name}")
        lines.append("# omega_over_kappa value ci_low ci_high")
        for j in range(len(curve)):
            lo = _fmt(curve.ci_low[j]) if curve.has_ci else "NaN"
            hi = _fmt(curve.ci_high[j]) if curve.has_ci else "NaN"
            lines.append(f"{_fmt(curve.omega[j])} {_fmt(curve.values[j])} {lo} {hi}")
    path.write_text("\n".join(lines) + "\n")
    return path
