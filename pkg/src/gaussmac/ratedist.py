"""Rate-distortion function of the bivariate Gaussian source.

Two independent routes are provided:

* :func:`rd_rate`, the three-region closed form;
* :func:`waterfill_forward` / :func:`waterfill_oracle_rate`, which scale the
  second component by ``c``, decorrelate, reverse-waterfill over the two
  eigen-components and map the component distortions back.  Inverting that
  forward map numerically yields the rate for a target pair without touching
  the closed form.

All rates are in bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, OutOfDomain
from .model import DistortionPair, SourceParams

# oracle inversion brackets
LOG10_C_RANGE = (-6.0, 6.0)
RATE_RANGE = (0.0, 60.0)
MAX_ITER = 200


class RdRegion(enum.Enum):
    Region1 = 1
    Region2 = 2
    Region3 = 3


@dataclass(frozen=True)
class WaterfillState:
    c: float
    lambda1: float
    lambda2: float
    a1_sq: float
    delta1: float
    delta2: float
    rate: float


def _log2_plus(x):
    return np.maximum(0.0, np.log2(x))


def _check_positive(d: DistortionPair):
    if d.d1 <= 0 or d.d2 <= 0:
        raise OutOfDomain(f"distortions must be strictly positive, got ({d.d1}, {d.d2})")


def _region_codes(d1, d2, sigma2, rho):
    """Vectorized region tags (1, 2, 3) for clamped distortion arrays."""
    s = sigma2
    r2 = rho * rho
    free2 = d2 >= s * (1 - r2) + r2 * d1
    free1 = d1 >= s * (1 - r2) + r2 * d2
    inner = (s - d1) * (s - d2) > r2 * s * s
    return np.where(free1 | free2, 1, np.where(inner, 2, 3))


def rd_rate_array(d1, d2, sigma2: float, rho: float):
    """Closed-form R(D1, D2) on arrays.  Inputs must be strictly positive."""
    s = float(sigma2)
    d1 = np.minimum(np.asarray(d1, dtype=float), s)
    d2 = np.minimum(np.asarray(d2, dtype=float), s)
    region = _region_codes(d1, d2, s, rho)
    r1 = 0.5 * _log2_plus(s / np.minimum(d1, d2))
    r2 = 0.5 * _log2_plus(s * s * (1 - rho * rho) / (d1 * d2))
    root = np.sqrt(np.maximum((s - d1) * (s - d2), 0.0))
    denom = d1 * d2 - (rho * s - root) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        r3 = 0.5 * _log2_plus(s * s * (1 - rho * rho) / denom)
    return np.where(region == 1, r1, np.where(region == 2, r2, r3))


def classify_region(d: DistortionPair, src: SourceParams) -> RdRegion:
    """Region tag of a distortion pair; shared boundaries go to the lower tag."""
    _check_positive(d)
    s = src.sigma2
    code = _region_codes(np.float64(min(d.d1, s)), np.float64(min(d.d2, s)), s, src.rho)
    return RdRegion(int(code))


def rd_rate(d: DistortionPair, src: SourceParams, allow_zero: bool = False) -> float:
    """R(D1, D2) in bits.

    With ``allow_zero`` a zero distortion returns ``math.inf`` instead of
    raising.
    """
    if allow_zero and min(d.d1, d.d2) == 0:
        return math.inf
    _check_positive(d)
    return float(rd_rate_array(d.d1, d.d2, src.sigma2, src.rho))


def marginal_rd(d: float, sigma2: float) -> float:
    if d <= 0:
        raise OutOfDomain(f"distortion must be positive, got {d}")
    return max(0.0, 0.5 * math.log2(sigma2 / d))


# --- reverse waterfilling oracle -------------------------------------------


def _eigen(c, sigma2, rho):
    """Eigenvalues of cov(S1, c S2) and the squared first eigenvector weight."""
    c2 = c * c
    # (1 - c^2)^2 + 4 c^2 rho^2 == 1 - 2c^2(1 - 2 rho^2) + c^4, without cancellation
    w = np.sqrt((1 - c2) ** 2 + 4 * c2 * rho * rho)
    lam2 = 0.5 * sigma2 * (1 + c2 + w)
    lam1 = sigma2 * sigma2 * c2 * (1 - rho * rho) / lam2
    if rho == 0:
        a1_sq = np.where(c >= 1, 1.0, 0.0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            small_c = 2 * c2 * rho * rho / (w * w + (1 - c2) * w)
            large_c = (w + c2 - 1) / (2 * w)
        a1_sq = np.where(c < 1, small_c, large_c)
    return lam1, lam2, a1_sq


def _waterfill_components(rate, lam1, lam2):
    """Reverse waterfilling of ``rate`` bits over variances lam1 <= lam2."""
    # water level if both components are active
    level = np.sqrt(lam1 * lam2) * np.exp2(-rate)
    both = level <= lam1
    delta1 = np.where(both, level, lam1)
    delta2 = np.where(both, level, lam2 * np.exp2(-2 * rate))
    return delta1, delta2


def _forward(c, rate, sigma2, rho):
    lam1, lam2, a1_sq = _eigen(c, sigma2, rho)
    delta1, delta2 = _waterfill_components(rate, lam1, lam2)
    a2_sq = 1 - a1_sq
    d1 = a1_sq * delta1 + a2_sq * delta2
    d2 = (a2_sq * delta1 + a1_sq * delta2) / (c * c)
    return d1, d2, (lam1, lam2, a1_sq, delta1, delta2)


def waterfill_forward(c: float, rate: float, src: SourceParams):
    """Distortion pair produced by scaling S2 by ``c`` and reverse-waterfilling
    ``rate`` bits over the decorrelated components."""
    if not c > 0:
        raise OutOfDomain(f"scaling c must be positive, got {c}")
    if rate < 0:
        raise OutOfDomain(f"rate must be nonnegative, got {rate}")
    c = np.float64(c)
    d1, d2, (lam1, lam2, a1_sq, delta1, delta2) = _forward(c, rate, src.sigma2, src.rho)
    state = WaterfillState(
        c=float(c),
        lambda1=float(lam1),
        lambda2=float(lam2),
        a1_sq=float(a1_sq),
        delta1=float(delta1),
        delta2=float(delta2),
        rate=float(rate),
    )
    return DistortionPair(float(d1), float(d2)), state


def _rate_for_d1(d1, c, sigma2, rho):
    """Rate at which the forward map hits ``d1`` for scaling ``c``.

    Inner inversion of the reverse-waterfilling map: either both components
    share the water level ``d1`` or the weaker one is left undescribed.
    """
    lam1, lam2, a1_sq = _eigen(c, sigma2, rho)
    a2_sq = 1 - a1_sq
    both = d1 <= lam1
    with np.errstate(divide="ignore", invalid="ignore"):
        delta2 = np.where(a2_sq > 0, (d1 - a1_sq * lam1) / a2_sq, lam2)
        r_both = 0.5 * np.log2(lam1 * lam2 / (d1 * d1))
        r_one = 0.5 * np.log2(lam2 / delta2)
    return np.where(both, r_both, np.maximum(r_one, 0.0))


def waterfill_oracle_rates(d1, d2, sigma2: float, rho: float, tol: float = 1e-12,
                           max_iter: int = MAX_ITER):
    """Vectorized oracle: rate and convergence mask for arrays of targets.

    For each target the outer loop bisects ``log10 c`` so that the D2 produced
    at the rate matching D1 equals the requested D2.  Targets whose balance
    function has no sign change over the bracket (flat boundary of region 1)
    come back with ``converged = False``.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)

    def balance(logc):
        c = 10.0 ** logc
        rate = _rate_for_d1(d1, c, sigma2, rho)
        _, got2, _ = _forward(c, rate, sigma2, rho)
        return got2 - d2, rate

    lo = np.full(d1.shape, LOG10_C_RANGE[0])
    hi = np.full(d1.shape, LOG10_C_RANGE[1])
    f_lo, _ = balance(lo)
    f_hi, _ = balance(hi)
    bracketed = np.sign(f_lo) != np.sign(f_hi)
    # the sign of the balance at the low end orients the bisection
    lo_sign = np.sign(f_lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid, _ = balance(mid)
        go_right = np.sign(f_mid) == lo_sign
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
            break
    mid = 0.5 * (lo + hi)
    f_mid, rate = balance(mid)
    converged = bracketed & (np.abs(f_mid) <= max(tol, 1e-9 * sigma2))
    return rate, converged


def waterfill_oracle_rate(d: DistortionPair, src: SourceParams, tol: float = 1e-9) -> float:
    """Rate R for which some scaling ``c`` makes the waterfilling map hit ``d``.

    Only defined outside region 1; raises :class:`NoConvergence` otherwise.
    """
    if not (0 < d.d1 <= src.sigma2 and 0 < d.d2 <= src.sigma2):
        raise OutOfDomain("oracle targets must lie in (0, sigma2]^2")
    if tol <= 0:
        raise OutOfDomain("tol must be positive")
    rate, ok = waterfill_oracle_rates(
        np.array([d.d1]), np.array([d.d2]), src.sigma2, src.rho, tol=tol
    )
    if not ok[0]:
        raise NoConvergence(
            f"no scaling in 10^{LOG10_C_RANGE} reaches ({d.d1}, {d.d2}); "
            "the target is likely in region 1"
        )
    return float(rate[0])


def reference_rates(d1, d2, sigma2: float, rho: float):
    """Closed-form-free reference for R(D1, D2) on arrays.

    Uses the waterfilling oracle where it converges.  Elsewhere the target has
    a slack component, and the rate is the larger of the two marginal rates
    (describing the tighter component alone meets the other target).
    Returns ``(rate, used_waterfill)``.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    rate, ok = waterfill_oracle_rates(d1, d2, sigma2, rho)
    marg = 0.5 * np.maximum(_log2_plus(sigma2 / d1), _log2_plus(sigma2 / d2))
    return np.where(ok, rate, marg), ok
