"""Sphere sampling, polar-cap area bounds and the Gamma(x + 1/2)/Gamma(x) series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import OutOfDomain

SERIES_SWITCH = 5.0


@dataclass(frozen=True)
class CapBounds:
    n: int
    phi: float
    lower: float
    upper: float


def sample_sphere(n: int, radius: float, rng: np.random.Generator, size=None):
    """Uniform point(s) on the radius-``radius`` sphere in R^n.

    ``size`` adds leading batch dimensions, e.g. ``size=1000`` gives an
    array of shape (1000, n).
    """
    if n < 2:
        raise OutOfDomain(f"dimension must be >= 2, got {n}")
    if not radius > 0:
        raise OutOfDomain(f"radius must be positive, got {radius}")
    shape = (n,) if size is None else (*np.atleast_1d(size), n)
    g = rng.standard_normal(shape)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return radius * g


def cap_ratio_bounds(n: int, phi: float) -> CapBounds:
    """Bounds on the fraction of the sphere within angle ``phi`` of a pole."""
    if n < 2:
        raise OutOfDomain(f"dimension must be >= 2, got {n}")
    if not 0 < phi < math.pi / 2:
        raise OutOfDomain(f"phi must lie in (0, pi/2), got {phi}")
    log_upper = (
        gammaln(n / 2 + 1)
        + (n - 1) * math.log(math.sin(phi))
        - math.log(n)
        - gammaln((n + 1) / 2)
        - 0.5 * math.log(math.pi)
        - math.log(math.cos(phi))
    )
    upper = min(1.0, math.exp(log_upper))
    lower = max(0.0, upper * (1 - math.tan(phi) ** 2 / n))
    return CapBounds(n=n, phi=phi, lower=lower, upper=upper)


def gamma_half_ratio(x: float) -> float:
    """Gamma(x + 1/2) / Gamma(x): asymptotic series for x >= 5, exact below."""
    if not x > 0:
        raise OutOfDomain(f"x must be positive, got {x}")
    if x < SERIES_SWITCH:
        return math.exp(gammaln(x + 0.5) - gammaln(x))
    u = 1.0 / x
    return math.sqrt(x) * (1 - u / 8 + u**2 / 128 + 5 * u**3 / 1024 - 21 * u**4 / 32768)
