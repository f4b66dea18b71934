"""Converse and benchmark boundaries.

Lower bounds come from the necessary condition (rate-distortion function of
the source against the coherent-combining MAC capacity).  Upper bounds are the
separation architecture, the uncoded scheme, and the optimized symmetric VQ
and superposition schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NoSignChange, OutOfDomain
from .model import DistortionPair, MacChannel, RatePair, SourceParams
from .ratedist import rd_rate
from .schemes import (
    R_MIN,
    SuperpositionConfig,
    alpha_max,
    sp_derive,
    sp_distortions,
    sp_rate_feasible,
)

SEPARATION_GRID = 2048
SCAN_POINTS = 64


def _half_log2_plus(x):
    return max(0.0, 0.5 * math.log2(x)) if x > 0 else 0.0


def mac_coherent_capacity(src: SourceParams, ch: MacChannel) -> float:
    """Sum capacity with fully coherent inputs, 0.5 log2(1 + (P1+P2+2 rho sqrt(P1P2))/N)."""
    p = ch.p1 + ch.p2 + 2 * src.rho * math.sqrt(ch.p1 * ch.p2)
    return 0.5 * math.log2(1 + p / ch.noise)


def necessary_condition(d: DistortionPair, src: SourceParams, ch: MacChannel):
    """``(holds, slack)`` with slack = capacity bound minus R(D1, D2), in bits."""
    slack = mac_coherent_capacity(src, ch) - rd_rate(d, src)
    return slack >= 0, slack


def lower_bound_sym(src: SourceParams, p, noise) -> float:
    s, r = src.sigma2, src.rho
    if p / noise <= r / (1 - r * r):
        return s * (p * (1 - r * r) + noise) / (2 * p * (1 + r) + noise)
    return s * math.sqrt((1 - r * r) * noise / (2 * p * (1 + r) + noise))


# --- separation ---------------------------------------------------------------


@dataclass(frozen=True)
class OohamaCheck:
    beta_d: float
    r1_min: float
    r2_min: float
    rsum_min: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    witness: RatePair | None
    slacks: tuple


def oohama_check(r: RatePair, d: DistortionPair, rho: float) -> OohamaCheck:
    """Thresholds of the two-terminal source-coding region for unit-variance
    components; ``d`` must already be divided by the source variance."""
    if d.d1 <= 0 or d.d2 <= 0:
        raise OutOfDomain("normalized distortions must be positive")
    r2 = rho * rho
    beta = 1 + math.sqrt(1 + 4 * r2 * d.d1 * d.d2 / (1 - r2) ** 2)
    return OohamaCheck(
        beta_d=beta,
        r1_min=_half_log2_plus((1 - r2 * (1 - 2.0 ** (-2 * r.r2))) / d.d1),
        r2_min=_half_log2_plus((1 - r2 * (1 - 2.0 ** (-2 * r.r1))) / d.d2),
        rsum_min=_half_log2_plus((1 - r2) * beta / (2 * d.d1 * d.d2)),
    )


def _sep_slacks(r1, dn: DistortionPair, rho, caps):
    c1, c2, cs = caps
    r2 = min(c2, cs - r1)
    chk = oohama_check(RatePair(r1, max(r2, 0.0)), dn, rho)
    return (r1 - chk.r1_min, r2 - chk.r2_min, r1 + r2 - chk.rsum_min), r2


def separation_feasible(d: DistortionPair, src: SourceParams, ch: MacChannel) -> FeasibilityReport:
    """Is ``d`` reachable by distributed source coding over the MAC capacity region?

    Sweeps R1 over the channel's individual capacity, pairs it with the largest
    admissible R2, then refines the best point with a bounded scalar search.
    """
    s = src.sigma2
    dn = DistortionPair(min(d.d1 / s, 1.0), min(d.d2 / s, 1.0))
    if dn.d1 <= 0 or dn.d2 <= 0:
        raise OutOfDomain("distortions must be positive")
    n = ch.noise
    caps = (
        0.5 * math.log2(1 + ch.p1 / n),
        0.5 * math.log2(1 + ch.p2 / n),
        0.5 * math.log2(1 + (ch.p1 + ch.p2) / n),
    )

    def margin(r1):
        sl, _ = _sep_slacks(r1, dn, src.rho, caps)
        return min(sl)

    grid = np.linspace(0.0, caps[0], SEPARATION_GRID)
    margins = np.array([margin(x) for x in grid])
    best = int(np.argmax(margins))
    r1_best, m_best = grid[best], margins[best]
    if m_best < 0:
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, SEPARATION_GRID - 1)]
        if hi > lo:
            res = minimize_scalar(lambda x: -margin(x), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            if -res.fun > m_best:
                r1_best, m_best = float(res.x), -float(res.fun)
    slacks, r2 = _sep_slacks(r1_best, dn, src.rho, caps)
    feasible = m_best >= -1e-13
    witness = RatePair(float(r1_best), max(float(r2), 0.0)) if feasible else None
    return FeasibilityReport(feasible=feasible, witness=witness, slacks=tuple(slacks))


def separation_sym(src: SourceParams, p, noise) -> float:
    s, r = src.sigma2, src.rho
    return s * math.sqrt(noise * (noise + 2 * p * (1 - r * r))) / (2 * p + noise)


# --- symmetric schemes ----------------------------------------------------------


def uncoded_sym_dstar(src: SourceParams, p, noise):
    """Uncoded symmetric distortion and whether it equals the optimum."""
    s, r = src.sigma2, src.rho
    value = s * (p * (1 - r * r) + noise) / (2 * p * (1 + r) + noise)
    return value, p / noise <= r / (1 - r * r)


def _vq_sym_distortion(rate, src: SourceParams):
    q = 1 - 2.0 ** (-2 * rate)
    r = src.rho
    return src.sigma2 * (1 - q) * (1 - r * r * q) / (1 - r * r * q * q)


def _vq_sym_h(rate, rho, p, noise):
    q = 1 - 2.0 ** (-2 * rate)
    rhs = 0.25 * math.log2((2 * p * (1 + rho * q) + noise) / (noise * (1 - rho * rho * q * q)))
    return rhs - rate


def _bisect(f, lo, hi, iters=200):
    """Root of ``f`` in [lo, hi] given f(lo) > 0 >= f(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
    return lo


def _crossings(f, lo, hi, points=SCAN_POINTS):
    """Brackets [a, b] with f(a) > 0 >= f(b) found by a uniform scan."""
    xs = np.linspace(lo, hi, points)
    vals = [f(x) for x in xs]
    return [(xs[i], xs[i + 1]) for i in range(points - 1) if vals[i] > 0 >= vals[i + 1]]


def vq_sym_opt(src: SourceParams, p, noise):
    """Best symmetric VQ distortion and the rate attaining it.

    The optimal rate sits where the sum-rate constraint becomes tight.
    """
    cap = 0.5 * math.log2(1 + 2 * p / noise) + 2
    h = lambda r: _vq_sym_h(r, src.rho, p, noise)  # noqa: E731
    if not (h(0.0) > 0 and h(cap) < 0):
        raise NoSignChange(f"h(0)={h(0.0):.3g}, h(cap)={h(cap):.3g}")
    roots = [_bisect(h, a, b) for a, b in _crossings(h, 0.0, cap)]
    best = min(roots, key=lambda r: _vq_sym_distortion(r, src))
    return _vq_sym_distortion(best, src), best


def _sp_sym_eval(rate, alpha, src, ch):
    derived = sp_derive(SuperpositionConfig(rate, rate, alpha, alpha), src, ch)
    ok, slacks = sp_rate_feasible(derived, src)
    return sp_distortions(derived, src).d1, min(slacks)


def sp_sym_opt(src: SourceParams, p, noise):
    """Minimize the symmetric superposition distortion over (rate, alpha).

    Returns ``(distortion, rate, alpha)``.  The search evaluates a 64x64
    (alpha, rate) grid, follows the rate boundary of the feasible set for each
    grid alpha (the distortion keeps falling up to that boundary), then
    polishes alpha by a bounded scalar search along the boundary.  Points on
    the boundary are limits of feasible points, so the value returned is the
    infimum of the achievable distortions.
    """
    ch = MacChannel(p, p, noise)
    amax = alpha_max(p, src.sigma2)
    cap = 0.5 * math.log2(1 + 2 * p / noise) + 2
    # alpha -> alpha_max, rate -> 0 is a limit point of the feasible set where
    # the scheme degenerates to uncoded transmission
    candidates = [(uncoded_sym_dstar(src, p, noise)[0], 0.0, amax)]

    alphas = np.linspace(0.0, amax, SCAN_POINTS)
    rates = np.linspace(R_MIN, cap, SCAN_POINTS)
    brackets = []
    for a in alphas:
        evals = [_sp_sym_eval(r, a, src, ch) for r in rates]
        margins = [m for _, m in evals]
        candidates += [(d, r, a) for (d, m), r in zip(evals, rates) if m > 0]
        cross = [i for i in range(SCAN_POINTS - 1) if margins[i] > 0 >= margins[i + 1]]
        brackets.append((rates[cross[-1]], rates[cross[-1] + 1]) if cross else None)

    def boundary(a, bracket):
        margin = lambda r: _sp_sym_eval(r, a, src, ch)[1]  # noqa: E731
        lo, hi = bracket
        if not (margin(lo) > 0 >= margin(hi)):
            return math.inf, None
        rb = _bisect(margin, lo, hi)
        return _sp_sym_eval(rb, a, src, ch)[0], rb

    for a, br in zip(alphas, brackets):
        if br is not None:
            d, rb = boundary(a, br)
            if rb is not None:
                candidates.append((d, rb, a))

    d_best, r_best, a_best = min(candidates)
    k = int(np.argmin(np.abs(alphas - a_best)))
    lo_k, hi_k = max(k - 1, 0), min(k + 1, SCAN_POINTS - 1)
    brs = [b for b in brackets[lo_k:hi_k + 1] if b is not None]
    if r_best > 0 and brs:
        # one bracket wide enough for every alpha in the neighbourhood
        wide = (min(b[0] for b in brs), max(b[1] for b in brs))
        wide = (max(R_MIN, wide[0] - (rates[1] - rates[0])), min(cap, wide[1] + (rates[1] - rates[0])))
        res = minimize_scalar(lambda a: boundary(a, wide)[0], bounds=(alphas[lo_k], alphas[hi_k]),
                              method="bounded", options={"xatol": 1e-10 * max(amax, 1.0)})
        d_ref, r_ref = boundary(float(res.x), wide)
        if r_ref is not None and d_ref < d_best:
            d_best, r_best, a_best = d_ref, r_ref, float(res.x)
    return d_best, r_best, a_best


# --- high SNR ---------------------------------------------------------------------


def high_snr_asymptote_sym(src: SourceParams, p, noise) -> float:
    return src.sigma2 * math.sqrt((1 - src.rho) / 2) * math.sqrt(noise / p)


def high_snr_product_check(src: SourceParams, ch: MacChannel, d: DistortionPair) -> float:
    """Normalized product (P_coh/N) D1 D2 / (sigma^4 (1 - rho^2)); tends to 1
    for optimal pairs as the noise vanishes."""
    p = ch.p1 + ch.p2 + 2 * src.rho * math.sqrt(ch.p1 * ch.p2)
    return (p / ch.noise) * d.d1 * d.d2 / (src.sigma2 ** 2 * (1 - src.rho ** 2))
