"""Input validation shared by the estimator classes."""
import math

import numpy as np
from sklearn.utils.validation import check_array

from .params import ParameterDomainError

SCENARIOS = ("single", "fbl", "coupled", "coupled-fbl")


def check_frequencies(X):
    """Accept a 1-d grid or an (n, 1) column and return a flat float array."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, input_name="omega")
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected a single frequency column, got shape {arr.shape}")
        arr = arr[:, 0]
    if np.any(arr < 0):
        raise ValueError("frequencies must be >= 0")
    return arr


def check_p(p, *, sampler=False):
    if not math.isfinite(p) or p > 1:
        raise ParameterDomainError(f"p must be <= 1, got {p!r}")
    if sampler and p < 0:
        raise ParameterDomainError(
            f"the pump sampler supports 0 <= p <= 1 only, got {p!r} "
            "(super-Poissonian pumps are available in the frequency-domain engine)"
        )
    return float(p)


def check_lambda(lam):
    if not math.isfinite(lam) or lam < 0:
        raise ParameterDomainError(f"feedback efficiency must be >= 0, got {lam!r}")
    return float(lam)


def check_positive(name, value):
    if not math.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"{name} must be > 0, got {value!r}")
    return float(value)


def check_scenario(name):
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    return name
