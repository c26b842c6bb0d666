"""Experiment configuration files.

Plain INI with a fixed schema; unknown sections or keys are rejected so a
typo never silently falls back to a default. Example::

    [experiment]
    scenario = fbl
    routes = analytic, engine, simulate
    output_dir = runs/fbl

    [parameters]
    p = 0
    lambda = 9

    [simulation]
    seed = 1
    n_seeds = 8
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from ._validation import SCENARIOS
from .curve import default_grid, linear_grid

ROUTES = ("analytic", "engine", "simulate")


class ConfigError(ValueError):
    pass


def _float(v):
    return float(v)


def _routes(v):
    items = tuple(s.strip() for s in v.split(",") if s.strip())
    for r in items:
        if r not in ROUTES:
            raise ValueError(f"unknown route {r!r} (expected {', '.join(ROUTES)})")
    if not items:
        raise ValueError("at least one route is required")
    return items


def _choice(*options):
    def parse(v):
        v = v.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return parse


def _optional_int(v):
    return None if v.strip().lower() in ("", "none") else int(v)


# section -> key -> (attribute, parser)
SCHEMA = {
    "experiment": {
        "scenario": ("scenario", _choice(*SCENARIOS)),
        "routes": ("routes", _routes),
        "output_dir": ("output_dir", str),
        "detector": ("detector", _choice("exciting", "measuring")),
        "limit_check": ("limit_check", _choice("auto", "on", "off")),
    },
    "parameters": {
        "p": ("p", _float),
        "lambda": ("lam", _float),
        "kappa0_over_kappa": ("kappa0_over_kappa", _float),
        "kappa_tilde_over_kappa": ("kappa_tilde_over_kappa", _float),
        "R_over_kappa": ("R_over_kappa", _float),
        "filter_bandwidth": ("filter_bandwidth", _float),
    },
    "simulation": {
        "duration": ("duration", _float),
        "warmup": ("warmup", _float),
        "seed": ("seed", int),
        "n_seeds": ("n_seeds", int),
        "rate_integration_step": ("rate_integration_step", _float),
        "detector_efficiency": ("detector_efficiency", _float),
    },
    "welch": {
        "segment_length": ("segment_length", int),
        "overlap": ("overlap", _float),
        "window": ("window", _choice("hann", "rectangular")),
        "min_segments": ("min_segments", int),
        "n_bands": ("n_bands", _optional_int),
        "band_lo": ("band_lo", _float),
        "band_hi": ("band_hi", _float),
    },
    "grid": {
        "n": ("grid_n", int),
        "lo": ("grid_lo", _float),
        "hi": ("grid_hi", _float),
        "spacing": ("grid_spacing", _choice("log", "linear")),
    },
    "tolerances": {
        "engine_rel": ("engine_rel", _float),
        "simulate_abs": ("simulate_abs", _float),
        "limit_rel": ("limit_rel", _float),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "single"
    routes: tuple = ("analytic", "engine")
    output_dir: str = "out"
    detector: Optional[str] = None
    limit_check: str = "auto"

    p: float = 0.0
    lam: float = 0.0
    kappa0_over_kappa: float = 0.0
    kappa_tilde_over_kappa: float = 1.0
    R_over_kappa: float = 1.0e4
    filter_bandwidth: float = 50.0

    duration: float = 2.0e4
    warmup: float = 20.0
    seed: int = 0
    n_seeds: int = 8
    rate_integration_step: float = 0.01
    detector_efficiency: float = 1.0

    segment_length: int = 32768
    overlap: float = 0.5
    window: str = "hann"
    min_segments: int = 64
    n_bands: Optional[int] = 64
    band_lo: float = 0.05
    band_hi: float = 20.0

    grid_n: int = 512
    grid_lo: float = 1e-2
    grid_hi: float = 1e2
    grid_spacing: str = "log"

    engine_rel: float = 1e-9
    simulate_abs: float = 0.05
    limit_rel: float = 0.05

    source: str = field(default="<defaults>", compare=False)

    def __post_init__(self):
        validate(self)

    def grid(self):
        if self.grid_spacing == "log":
            return default_grid(self.grid_n, self.grid_lo, self.grid_hi)
        return linear_grid(self.grid_n, self.grid_lo, self.grid_hi)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def limit_enabled(self):
        if self.scenario != "coupled-fbl" or self.limit_check == "off":
            return False
        if self.limit_check == "on":
            return True
        return self.lam >= 100 and self.kappa0_over_kappa >= 100

    def echo(self):
        """Scenario parameters recorded in CSV headers."""
        out = {"scenario": self.scenario, "p": self.p}
        if self.scenario in ("fbl", "coupled-fbl"):
            out["lambda"] = self.lam
        if self.scenario in ("coupled", "coupled-fbl"):
            out["kappa0_over_kappa"] = self.kappa0_over_kappa
            out["kappa_tilde_over_kappa"] = self.kappa_tilde_over_kappa
        return out


def validate(cfg: ExperimentConfig):
    src = cfg.source
    if cfg.p > 1:
        raise ConfigError(f"{src}: [parameters] p must be <= 1")
    if cfg.lam < 0:
        raise ConfigError(f"{src}: [parameters] lambda must be >= 0")
    if cfg.scenario in ("coupled", "coupled-fbl") and cfg.kappa0_over_kappa <= 0:
        raise ConfigError(f"{src}: scenario {cfg.scenario} requires kappa0_over_kappa > 0")
    if "simulate" in cfg.routes:
        if cfg.scenario not in ("single", "fbl"):
            raise ConfigError(
                f"{src}: route 'simulate' is only available for scenarios single and fbl "
                f"(the three-level laser has no event-level model), got {cfg.scenario}"
            )
        if not 0 <= cfg.p <= 1:
            raise ConfigError(f"{src}: route 'simulate' needs 0 <= p <= 1, got p={cfg.p}")
        if cfg.n_seeds < 1:
            raise ConfigError(f"{src}: [simulation] n_seeds must be >= 1")
    if "analytic" in cfg.routes and cfg.scenario == "coupled-fbl" and cfg.p != 0:
        raise ConfigError(
            f"{src}: route 'analytic' for coupled-fbl exists for p = 0 only; use route 'engine'"
        )
    if cfg.grid_n < 2 or not cfg.grid_lo < cfg.grid_hi:
        raise ConfigError(f"{src}: [grid] needs n >= 2 and lo < hi")
    if cfg.grid_spacing == "log" and cfg.grid_lo <= 0:
        raise ConfigError(f"{src}: [grid] log spacing needs lo > 0 (w = 0 is added automatically)")
    if cfg.detector is not None and cfg.scenario in ("single", "fbl") and cfg.detector != "exciting":
        raise ConfigError(f"{src}: scenario {cfg.scenario} only has the exciting-laser detector")


def _line_numbers(text):
    """Map (section, key) to its 1-based line number."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = no
    return lines


def parse_config(text: str, source="<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (R_over_kappa)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    where = _line_numbers(text)
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}:{where.get((section, None), '?')}: unknown section [{section}]")
        for key, raw in parser.items(section):
            line = where.get((section, key), "?")
            if key not in SCHEMA[section]:
                allowed = ", ".join(SCHEMA[section])
                raise ConfigError(f"{source}:{line}: unknown key '{key}' in [{section}] (allowed: {allowed})")
            attr, conv = SCHEMA[section][key]
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}:{line}: [{section}] {key}: {exc}") from exc
    try:
        return ExperimentConfig(source=source, **values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config back to INI text (used for run records)."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            val = getattr(cfg, attr)
            if val is None:
                # only write an explicit "none" where omission would restore a default
                if ExperimentConfig.__dataclass_fields__[attr].default is not None:
                    out.append(f"{key} = none")
                continue
            if isinstance(val, tuple):
                val = ", ".join(val)
            elif isinstance(val, float):
                val = repr(val)
            out.append(f"{key} = {val}")
        out.append("")
    return "\n".join(out)


def grid_from_flag(flag: str, spacing="linear"):
    """Parse ``--grid n,lo,hi``."""
    try:
        n, lo, hi = flag.split(",")
        n, lo, hi = int(n), float(lo), float(hi)
    except ValueError as exc:
        raise ConfigError(f"--grid expects n,lo,hi, got {flag!r}") from exc
    if n < 2 or not lo < hi:
        raise ConfigError(f"--grid needs n >= 2 and lo < hi, got {flag!r}")
    return {"grid_n": n, "grid_lo": lo, "grid_hi": hi, "grid_spacing": spacing}

