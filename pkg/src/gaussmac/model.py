"""Core value types, source normalization and time-sharing."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DegenerateCorrelation,
    MismatchedNoise,
    NonPositiveVariance,
    OutOfDomain,
)


@dataclass(frozen=True)
class SourceParams:
    """Bivariate Gaussian source with equal variances ``sigma2`` and
    correlation ``rho`` in [0, 1)."""

    sigma2: float
    rho: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise NonPositiveVariance(f"sigma2 must be positive, got {self.sigma2}")
        if not 0.0 <= self.rho < 1.0:
            if abs(self.rho) >= 1.0:
                raise DegenerateCorrelation(f"|rho| = 1 is not supported (rho={self.rho})")
            raise OutOfDomain(f"rho must lie in [0, 1) after normalization, got {self.rho}")


@dataclass(frozen=True)
class ScaleBack:
    """Record needed to map normalized distortions back to the raw source."""

    alpha1: float = 1.0
    alpha2: float = 1.0
    rho_sign: int = 1

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise OutOfDomain("scale-back ratios must be positive")
        if self.rho_sign not in (1, -1):
            raise OutOfDomain("rho_sign must be +1 or -1")


@dataclass(frozen=True)
class MacChannel:
    p1: float
    p2: float
    noise: float

    def __post_init__(self):
        for name in ("p1", "p2", "noise"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise OutOfDomain(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class DistortionPair:
    d1: float
    d2: float

    def __post_init__(self):
        for v in (self.d1, self.d2):
            if not (v >= 0 and math.isfinite(v)):
                raise OutOfDomain(f"distortions must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        for v in (self.r1, self.r2):
            if not (v >= 0 and math.isfinite(v)):
                raise OutOfDomain(f"rates must be finite and nonnegative, got {v}")


def normalize_source(sigma1_sq: float, sigma2_sq: float, rho_raw: float):
    """Reduce an arbitrary bivariate Gaussian to equal variances and rho >= 0.

    The second component is rescaled to the variance of the first; its
    distortions scale by ``alpha2 = sigma1_sq / sigma2_sq``. A negative
    correlation is absorbed by flipping the sign of one component, which
    leaves squared errors unchanged.
    """
    if not (sigma1_sq > 0 and sigma2_sq > 0):
        raise NonPositiveVariance("source variances must be positive")
    if abs(rho_raw) >= 1.0:
        raise DegenerateCorrelation(f"|rho| must be < 1, got {rho_raw}")
    sign = -1 if rho_raw < 0 else 1
    src = SourceParams(sigma2=float(sigma1_sq), rho=abs(float(rho_raw)))
    return src, ScaleBack(alpha1=1.0, alpha2=sigma1_sq / sigma2_sq, rho_sign=sign)


def denormalize_distortions(pair: DistortionPair, sb: ScaleBack) -> DistortionPair:
    return DistortionPair(pair.d1 / sb.alpha1, pair.d2 / sb.alpha2)


def timeshare(points, lam: float):
    """Convex combination ``lam * first + (1 - lam) * second`` of two
    (DistortionPair, MacChannel) operating points sharing the same noise."""
    if len(points) != 2:
        raise OutOfDomain("time-sharing needs exactly two operating points")
    if not 0.0 <= lam <= 1.0:
        raise OutOfDomain(f"lambda must lie in [0, 1], got {lam}")
    (da, ca), (db, cb) = points
    if ca.noise != cb.noise:
        raise MismatchedNoise(f"noise variances differ: {ca.noise} vs {cb.noise}")
    mu = 1.0 - lam
    d = DistortionPair(lam * da.d1 + mu * db.d1, lam * da.d2 + mu * db.d2)
    ch = MacChannel(lam * ca.p1 + mu * cb.p1, lam * ca.p2 + mu * cb.p2, ca.noise)
    return d, ch
