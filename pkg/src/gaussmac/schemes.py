"""Closed-form distortions and rate feasibility of the transmission schemes.

Covers point-to-point uncoded transmission, the uncoded MAC scheme, the
vector-quantizer (VQ) scheme and the superposition scheme that sends a linear
combination of the source and its quantized version.  Distortions of the
coded schemes are reported as the infimum of the achievable set, which is an
open set bounded by these values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleAlpha, OutOfDomain, SingularK, ZeroInput
from .model import DistortionPair, MacChannel, RatePair, SourceParams

R_MIN = 1e-6
RESIDUAL_TOL = 1e-10


def _q(rate):
    """Fraction of source variance captured by a rate-``rate`` quantizer."""
    return 1.0 - 2.0 ** (-2.0 * rate)


def _half_log2(x):
    return 0.5 * math.log2(x)


# --- uncoded ---------------------------------------------------------------


def pt2pt_uncoded(alpha, beta, src: SourceParams, p, noise) -> DistortionPair:
    """Distortions of the single-transmitter uncoded scheme sending
    ``alpha*S1 + beta*S2`` scaled to power ``p``, with scalar MMSE receivers."""
    if alpha < 0 or beta < 0:
        raise OutOfDomain("alpha and beta must be nonnegative")
    if alpha == 0 and beta == 0:
        raise ZeroInput("alpha and beta cannot both be zero")
    s, r = src.sigma2, src.rho
    m = alpha * alpha + 2 * r * alpha * beta + beta * beta
    den = (p + noise) ** 2 * m
    d1 = s * (p * p * beta * beta * (1 - r * r)
              + p * noise * (alpha * alpha + 2 * r * alpha * beta + beta * beta * (2 - r * r))
              + noise * noise * m) / den
    d2 = s * (p * p * alpha * alpha * (1 - r * r)
              + p * noise * (beta * beta + 2 * r * alpha * beta + alpha * alpha * (2 - r * r))
              + noise * noise * m) / den
    return DistortionPair(d1, d2)


def pt2pt_threshold_gamma(d1, src: SourceParams) -> float:
    """SNR below which uncoded point-to-point transmission reaches any
    achievable pair with first distortion ``d1``; ``inf`` when unconstrained."""
    if d1 <= 0:
        raise OutOfDomain(f"d1 must be positive, got {d1}")
    s, r = src.sigma2, src.rho
    cond = s * (1 - r * r)
    if d1 >= cond:
        return math.inf
    return (s * s * (1 - r * r) - 2 * d1 * cond + d1 * d1) / (d1 * (cond - d1))


def _coherent_power(rho, ch: MacChannel):
    return ch.p1 + ch.p2 + 2 * rho * math.sqrt(ch.p1 * ch.p2)


def mac_uncoded(src: SourceParams, ch: MacChannel) -> DistortionPair:
    s, r = src.sigma2, src.rho
    den = _coherent_power(r, ch) + ch.noise
    return DistortionPair(
        s * ((1 - r * r) * ch.p2 + ch.noise) / den,
        s * ((1 - r * r) * ch.p1 + ch.noise) / den,
    )


def mac_uncoded_is_optimal(src: SourceParams, ch: MacChannel):
    """Whether the uncoded pair sits on the distortion-region boundary.

    Returns ``(optimal, slack)`` where slack is RHS - LHS of the power
    condition.
    """
    r = src.rho
    p1, p2, n = ch.p1, ch.p2, ch.noise
    lhs = p2 * (1 - r * r) ** 2 * (p1 + 2 * r * math.sqrt(p1 * p2))
    rhs = n * r * r * (2 * p2 * (1 - r * r) + n)
    return lhs <= rhs, rhs - lhs


# --- vector quantizer --------------------------------------------------------


@dataclass(frozen=True)
class VqDerived:
    rho_tilde: float
    alpha1: float
    alpha2: float
    gamma11: float
    gamma12: float
    gamma21: float
    gamma22: float


def rho_tilde(r: RatePair, rho: float) -> float:
    """Asymptotic correlation between the two transmitted codewords."""
    return rho * math.sqrt(_q(r.r1) * _q(r.r2))


def vq_distortions(r: RatePair, src: SourceParams) -> DistortionPair:
    s, rho = src.sigma2, src.rho
    rt2 = rho_tilde(r, rho) ** 2
    b1, b2 = 2.0 ** (-2 * r.r1), 2.0 ** (-2 * r.r2)
    return DistortionPair(
        s * b1 * (1 - rho * rho * (1 - b2)) / (1 - rt2),
        s * b2 * (1 - rho * rho * (1 - b1)) / (1 - rt2),
    )


def _vq_slacks(r1, r2, rt, ch: MacChannel):
    n = ch.noise
    t = 1 - rt * rt
    c1 = _half_log2((ch.p1 * t + n) / (n * t))
    c2 = _half_log2((ch.p2 * t + n) / (n * t))
    cs = _half_log2((ch.p1 + ch.p2 + 2 * rt * math.sqrt(ch.p1 * ch.p2) + n) / (n * t))
    return c1 - r1, c2 - r2, cs - (r1 + r2)


def vq_rate_feasible(r: RatePair, src: SourceParams, ch: MacChannel):
    """``(feasible, (slack1, slack2, slack_sum))``; feasibility is strict."""
    slacks = _vq_slacks(r.r1, r.r2, rho_tilde(r, src.rho), ch)
    return all(x > 0 for x in slacks), slacks


def vq_estimator_coeffs(r: RatePair, rho: float, sigma2: float = 1.0,
                        ch: MacChannel | None = None) -> VqDerived:
    """Linear reconstruction weights ``S_i ~ g_i1 U_i + g_i2 U_j``.

    The cross weights carry the ``1/(1 - rho_tilde^2)`` factor so that the
    estimate is the LMMSE one and attains the closed-form VQ distortion.
    Channel gains are ``sqrt(P_i / (sigma2 q_i))`` (``inf`` at zero rate, and
    ``nan`` when no channel is given).
    """
    rt = rho_tilde(r, rho)
    t = 1 - rt * rt
    b1, b2 = 2.0 ** (-2 * r.r1), 2.0 ** (-2 * r.r2)

    def gain(p, rate):
        if ch is None:
            return math.nan
        q = _q(rate)
        return math.inf if q == 0 else math.sqrt(p / (sigma2 * q))

    return VqDerived(
        rho_tilde=rt,
        alpha1=gain(ch.p1 if ch else 0.0, r.r1),
        alpha2=gain(ch.p2 if ch else 0.0, r.r2),
        gamma11=(1 - rho * rho * (1 - b2)) / t,
        gamma12=rho * b1 / t,
        gamma21=(1 - rho * rho * (1 - b1)) / t,
        gamma22=rho * b2 / t,
    )


# --- superposition -----------------------------------------------------------


@dataclass(frozen=True)
class SuperpositionConfig:
    """Rates and direct-path (uncoded) gains of the superposition encoders."""

    r1: float
    r2: float
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise OutOfDomain("superposition rates must be positive")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise InfeasibleAlpha("direct-path gains must be nonnegative")


@dataclass(frozen=True)
class SuperpositionDerived:
    cfg: SuperpositionConfig
    beta1: float
    beta2: float
    rho_tilde: float
    a1: float
    a2: float
    beta1p: float
    beta2p: float
    nu1: float
    nu2: float
    nu3: float
    n_prime: float
    k: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    residual: float


def alpha_max(p, sigma2) -> float:
    """Largest admissible direct-path gain (codeword gain drops to zero)."""
    return math.sqrt(p / sigma2)


def sp_beta(alpha, rate, p, sigma2) -> float:
    """Codeword gain that fills the remaining power budget."""
    amax = alpha_max(p, sigma2)
    if alpha < 0 or alpha > amax * (1 + 1e-12):
        raise InfeasibleAlpha(f"alpha={alpha} outside [0, {amax}]")
    b = 2.0 ** (-2 * rate)
    inner = (p - alpha * alpha * sigma2 * b) / (sigma2 * (1 - b))
    return max(0.0, math.sqrt(max(inner, 0.0)) - alpha)


def sp_derive(cfg: SuperpositionConfig, src: SourceParams, ch: MacChannel) -> SuperpositionDerived:
    """All intermediate quantities of the superposition scheme."""
    if cfg.r1 < R_MIN or cfg.r2 < R_MIN:
        raise SingularK(f"rates below R_min={R_MIN} make K singular")
    s, rho = src.sigma2, src.rho
    al1, al2 = cfg.alpha1, cfg.alpha2
    be1 = sp_beta(al1, cfg.r1, ch.p1, s)
    be2 = sp_beta(al2, cfg.r2, ch.p2, s)
    q1, q2 = _q(cfg.r1), _q(cfg.r2)
    b1, b2 = 1 - q1, 1 - q2
    rt = rho * math.sqrt(q1 * q2)

    k11 = s * q1
    k12 = s * rho * q1 * q2
    k22 = s * q2
    k13 = (al1 + be1 + al2 * rho) * k11 + be2 * k12
    k23 = (al2 + be2 + al1 * rho) * k22 + be1 * k12
    k33 = (al1 * al1 * s + 2 * al1 * be1 * k11 + 2 * al1 * al2 * rho * s
           + 2 * al1 * be2 * rho * k22 + be1 * be1 * k11 + 2 * be1 * al2 * rho * k11
           + 2 * be1 * be2 * k12 + 2 * al2 * be2 * k22 + al2 * al2 * s
           + be2 * be2 * k22 + ch.noise)
    k = np.array([[k11, k12, k13], [k12, k22, k23], [k13, k23, k33]])
    c1 = np.array([k11, rho * k22, (al1 + al2 * rho) * s + be1 * k11 + be2 * rho * k22])
    c2 = np.array([rho * k11, k22, (al2 + al1 * rho) * s + be1 * rho * k11 + be2 * k22])

    try:
        gam = np.linalg.solve(k, np.column_stack([c1, c2]))
    except np.linalg.LinAlgError as exc:
        raise SingularK(str(exc)) from exc
    scale = np.linalg.norm(k) * np.linalg.norm(gam) + np.linalg.norm(np.column_stack([c1, c2]))
    residual = float(np.linalg.norm(k @ gam - np.column_stack([c1, c2])) / scale)
    if not residual <= RESIDUAL_TOL:
        raise SingularK(f"K solve residual {residual:.3e} exceeds {RESIDUAL_TOL}")

    cross = 2 * rt * rt * math.sqrt(q1 * q2)
    a1 = rho * b1 * q2 / (q2 - cross + rt * rt * q1)
    a2 = rho * b2 * q1 / (q1 - cross + rt * rt * q2)
    m1, m2 = 1 - a1 * rt, 1 - a2 * rt
    nu1 = s - m1 * m1 * k11 - 2 * m1 * a1 * k12 - a1 * a1 * k22
    nu2 = s - m2 * m2 * k22 - 2 * m2 * a2 * k12 - a2 * a2 * k11
    nu3 = rho * s - (m1 * m2 + a1 * a2) * k12 - m1 * a2 * k11 - m2 * a1 * k22
    n_prime = al1 * al1 * nu1 + al2 * al2 * nu2 + 2 * al1 * al2 * nu3 + ch.noise
    beta1p = al1 * m1 + be1 + al2 * a2
    beta2p = al2 * m2 + be2 + al1 * a1

    return SuperpositionDerived(
        cfg=cfg, beta1=be1, beta2=be2, rho_tilde=rt, a1=a1, a2=a2,
        beta1p=beta1p, beta2p=beta2p, nu1=nu1, nu2=nu2, nu3=nu3, n_prime=n_prime,
        k=k, c1=c1, c2=c2, gamma1=gam[:, 0].copy(), gamma2=gam[:, 1].copy(),
        residual=residual,
    )


def sp_distortions(derived: SuperpositionDerived, src: SourceParams) -> DistortionPair:
    s = src.sigma2
    d1 = s - float(derived.gamma1 @ derived.c1)
    d2 = s - float(derived.gamma2 @ derived.c2)
    # LMMSE values can dip below zero only by rounding
    return DistortionPair(max(d1, 0.0), max(d2, 0.0))


def sp_rate_feasible(derived: SuperpositionDerived, src: SourceParams):
    """``(feasible, (slack1, slack2, slack_sum))`` for the superposition rates."""
    d = derived
    k11, k22 = d.k[0, 0], d.k[1, 1]
    rt, npr = d.rho_tilde, d.n_prime
    t = 1 - rt * rt
    e1 = d.beta1p ** 2 * k11
    e2 = d.beta2p ** 2 * k22
    c1 = _half_log2((e1 * t + npr) / (npr * t))
    c2 = _half_log2((e2 * t + npr) / (npr * t))
    cs = _half_log2((e1 + e2 + 2 * rt * d.beta1p * d.beta2p * math.sqrt(k11 * k22) + npr) / (npr * t))
    slacks = (c1 - d.cfg.r1, c2 - d.cfg.r2, cs - (d.cfg.r1 + d.cfg.r2))
    return all(x > 0 for x in slacks), slacks
