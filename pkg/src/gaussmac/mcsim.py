"""Sequence-level Monte Carlo simulation of the transmission schemes.

Every trial draws its randomness from counter-keyed substreams
``(seed, trial, role)``, so results do not depend on how trials are spread
over worker threads.

Genie-aided runs at large blocklength do not materialize the random
codebooks (2^{nR} words is out of reach for n = 1000).  The encoder's choice
depends on the codebook only through the cosines between the source and the
words, which are i.i.d. with density proportional to (1 - c^2)^{(n-3)/2}.
The selected word is therefore drawn directly: its cosine from the exact
distribution of the best of 2^{ceil(nR)} candidates, and its direction
uniformly on the set of words with that cosine.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from .errors import BudgetExceeded, OutOfDomain
from .model import MacChannel, RatePair, SourceParams
from .schemes import SuperpositionConfig, rho_tilde, sp_derive, vq_estimator_coeffs

ROLES = {"source": 0, "codebook1": 1, "codebook2": 2, "noise": 3}
CODEBOOK_BITS_MAX = 30
JOINT_BITS_MAX = 24
EXPLICIT_FLOATS_MAX = 1 << 21  # genie mode builds real codebooks up to 16 MB
DECODE_WINDOW = 7.0
TRIAL_SE_MIN = 10

_GL_NODES, _GL_WEIGHTS = leggauss(16)
_GL_PANELS = 32


class DecoderMode(enum.Enum):
    Genie = "genie"
    FullJoint = "full"


@dataclass(frozen=True)
class SimConfig:
    n: int
    trials: int = 1
    epsilon: float = 0.05
    seed: int = 0
    decoder_mode: DecoderMode = DecoderMode.Genie
    workers: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise OutOfDomain(f"blocklength must be >= 2, got {self.n}")
        if self.trials < 1:
            raise OutOfDomain(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.epsilon < 0.3:
            raise OutOfDomain(f"epsilon must lie in (0, 0.3), got {self.epsilon}")
        if not 0 <= self.seed < 2**64:
            raise OutOfDomain("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise OutOfDomain("workers must be >= 1")


@dataclass(frozen=True)
class Codebook:
    n: int
    rate: float
    radius: float
    words: np.ndarray


@dataclass(frozen=True)
class SchemeEmpirics:
    d1_hat: float
    d2_hat: float
    decode_error_rate: float
    encode_failure_rate: float
    power_used: tuple
    trials_run: int
    se1: float = 0.0
    se2: float = 0.0
    decode_trials: int = 0


@dataclass
class _Trial:
    n: int
    err1: np.ndarray
    err2: np.ndarray
    pow1: float
    pow2: float
    enc_fail: int = 0
    decoded: bool = False
    decode_ok: bool = True


def trial_rng(seed: int, trial: int, role: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial, ROLES[role]])))


def _codeword_bits(n, rate):
    # guard against n*rate landing a hair above an integer
    return max(0, math.ceil(n * rate - 1e-9))


def _q(rate):
    return 1.0 - 2.0 ** (-2.0 * rate)


# --- sources and uncoded schemes ---------------------------------------------


def gen_source(src: SourceParams, n: int, rng: np.random.Generator):
    if n < 1:
        raise OutOfDomain(f"n must be >= 1, got {n}")
    z = rng.standard_normal((2, n))
    sd = math.sqrt(src.sigma2)
    s1 = sd * z[0]
    s2 = sd * (src.rho * z[0] + math.sqrt(1 - src.rho ** 2) * z[1])
    return s1, s2


def _run(cfg: SimConfig, one_trial) -> SchemeEmpirics:
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(one_trial, range(cfg.trials)))
    else:
        results = [one_trial(t) for t in range(cfg.trials)]
    return _aggregate(results)


def _aggregate(results) -> SchemeEmpirics:
    n = results[0].n
    total = n * len(results)
    m1 = np.array([r.err1.mean() for r in results])
    m2 = np.array([r.err2.mean() for r in results])
    d1, d2 = float(m1.mean()), float(m2.mean())
    if len(results) >= TRIAL_SE_MIN:
        se1 = float(m1.std(ddof=1) / math.sqrt(len(results)))
        se2 = float(m2.std(ddof=1) / math.sqrt(len(results)))
    else:
        sq1 = sum(float(np.square(r.err1).sum()) for r in results) / total
        sq2 = sum(float(np.square(r.err2).sum()) for r in results) / total
        se1 = math.sqrt(max(sq1 - d1 * d1, 0.0) / total)
        se2 = math.sqrt(max(sq2 - d2 * d2, 0.0) / total)
    decoded = [r for r in results if r.decoded]
    errors = sum(1 for r in decoded if not r.decode_ok)
    return SchemeEmpirics(
        d1_hat=d1,
        d2_hat=d2,
        decode_error_rate=errors / len(decoded) if decoded else 0.0,
        encode_failure_rate=sum(r.enc_fail for r in results) / (2 * len(results)),
        power_used=(
            sum(r.pow1 for r in results) / len(results),
            sum(r.pow2 for r in results) / len(results),
        ),
        trials_run=len(results),
        se1=se1,
        se2=se2,
        decode_trials=len(decoded),
    )


def sim_uncoded_mac(cfg: SimConfig, src: SourceParams, ch: MacChannel) -> SchemeEmpirics:
    s = src.sigma2
    g1, g2 = math.sqrt(ch.p1 / s), math.sqrt(ch.p2 / s)
    p_coh = ch.p1 + ch.p2 + 2 * src.rho * math.sqrt(ch.p1 * ch.p2)
    c1 = math.sqrt(s) * (math.sqrt(ch.p1) + src.rho * math.sqrt(ch.p2)) / (p_coh + ch.noise)
    c2 = math.sqrt(s) * (math.sqrt(ch.p2) + src.rho * math.sqrt(ch.p1)) / (p_coh + ch.noise)

    def one(t):
        s1, s2 = gen_source(src, cfg.n, trial_rng(cfg.seed, t, "source"))
        z = math.sqrt(ch.noise) * trial_rng(cfg.seed, t, "noise").standard_normal(cfg.n)
        x1, x2 = g1 * s1, g2 * s2
        y = x1 + x2 + z
        return _Trial(cfg.n, (s1 - c1 * y) ** 2, (s2 - c2 * y) ** 2,
                      float(np.mean(x1 * x1)), float(np.mean(x2 * x2)))

    return _run(cfg, one)


def sim_pt2pt_uncoded(cfg: SimConfig, alpha, beta, src: SourceParams, p, noise) -> SchemeEmpirics:
    if alpha == 0 and beta == 0:
        raise OutOfDomain("alpha and beta cannot both be zero")
    s, r = src.sigma2, src.rho
    m = alpha * alpha + 2 * r * alpha * beta + beta * beta
    kappa = math.sqrt(p / (s * m))
    c1 = kappa * s * (alpha + r * beta) / (p + noise)
    c2 = kappa * s * (beta + r * alpha) / (p + noise)

    def one(t):
        s1, s2 = gen_source(src, cfg.n, trial_rng(cfg.seed, t, "source"))
        z = math.sqrt(noise) * trial_rng(cfg.seed, t, "noise").standard_normal(cfg.n)
        x = kappa * (alpha * s1 + beta * s2)
        y = x + z
        pw = float(np.mean(x * x))
        return _Trial(cfg.n, (s1 - c1 * y) ** 2, (s2 - c2 * y) ** 2, pw, 0.0)

    return _run(cfg, one)


# --- codebooks, encoding, decoding ---------------------------------------------


def build_codebook(n: int, rate: float, sigma2: float, rng: np.random.Generator) -> Codebook:
    """2^{ceil(n rate)} words drawn uniformly on the radius sqrt(n sigma2 q) sphere."""
    if rate < 0:
        raise OutOfDomain(f"rate must be nonnegative, got {rate}")
    if n * rate > CODEBOOK_BITS_MAX:
        raise BudgetExceeded(f"n*rate = {n * rate:g} bits exceeds {CODEBOOK_BITS_MAX}")
    count = 1 << _codeword_bits(n, rate)
    radius = math.sqrt(n * sigma2 * _q(rate))
    if radius == 0:
        return Codebook(n, rate, 0.0, np.zeros((1, n)))
    g = rng.standard_normal((count, n))
    g *= radius / np.linalg.norm(g, axis=1, keepdims=True)
    return Codebook(n, rate, radius, g)


def vq_encode(s: np.ndarray, cb: Codebook, epsilon: float):
    """Index of the word whose angle to ``s`` is closest to the target, within
    the typicality window; ``None`` when the window is empty."""
    if cb.radius == 0:
        return 0
    target = math.sqrt(_q(cb.rate))
    cos = cb.words @ s / (cb.radius * np.linalg.norm(s))
    gap = np.abs(cos - target)
    gap[gap > epsilon * target] = np.inf
    idx = int(np.argmin(gap))  # first minimum, i.e. lowest index on ties
    return None if math.isinf(gap[idx]) else idx


def vq_joint_decode(y, cb1: Codebook, cb2: Codebook, alpha1, alpha2, rho_t, epsilon):
    """Pair (i, j) minimizing ||y - alpha1 u1_i - alpha2 u2_j|| among pairs whose
    angle cosine is within 7 epsilon of ``rho_t``; ``None`` stands for the
    all-zero pair when no pair qualifies."""
    if len(cb1.words) * len(cb2.words) > 1 << JOINT_BITS_MAX:
        raise BudgetExceeded("joint decoding is limited to 2^24 codeword pairs")
    w1, w2 = cb1.words, cb2.words
    p1 = w1 @ y
    p2 = w2 @ y
    n1 = np.einsum("ij,ij->i", w1, w1)
    n2 = np.einsum("ij,ij->i", w2, w2)
    norm = max(cb1.radius * cb2.radius, np.finfo(float).tiny)
    best, best_ij = np.inf, None
    chunk = max(1, (1 << 22) // max(len(w2), 1))
    for start in range(0, len(w1), chunk):
        rows = slice(start, start + chunk)
        gram = w1[rows] @ w2.T
        # ||y||^2 is common to every pair and dropped
        metric = (alpha1 * alpha1 * n1[rows, None] + alpha2 * alpha2 * n2[None, :]
                  - 2 * alpha1 * p1[rows, None] - 2 * alpha2 * p2[None, :]
                  + 2 * alpha1 * alpha2 * gram)
        metric[np.abs(rho_t - gram / norm) > DECODE_WINDOW * epsilon] = np.inf
        k = int(np.argmin(metric))
        i, j = divmod(k, len(w2))
        if metric[i, j] < best:
            best, best_ij = metric[i, j], (start + i, j)
    return best_ij


def _log_cos_density(c, n):
    """Log density of the cosine between a fixed direction and a uniform point."""
    logk = gammaln(n / 2) - 0.5 * math.log(math.pi) - gammaln((n - 1) / 2)
    with np.errstate(divide="ignore"):
        return logk + 0.5 * (n - 3) * np.log1p(-np.minimum(c * c, 1.0))


def _log_window_mass(x, target, n):
    """log P(|C - target| <= x) by composite Gauss-Legendre in the offset."""
    lo, hi = max(-1.0, target - x), min(1.0, target + x)
    if hi <= lo:
        return -np.inf
    half = 0.5 * (hi - lo) / _GL_PANELS
    centers = lo + half * (2 * np.arange(_GL_PANELS) + 1)
    nodes = (centers[:, None] + half * _GL_NODES[None, :]).ravel()
    logw = np.log(np.tile(_GL_WEIGHTS, _GL_PANELS))
    return float(math.log(half) + logsumexp(logw + _log_cos_density(nodes, n)))


def sample_selected_word(s: np.ndarray, rate: float, sigma2: float, epsilon: float,
                         rng: np.random.Generator):
    """Draw the encoder's output for a fresh random codebook without building it.

    Returns the selected word, or ``None`` when no word falls in the window.
    """
    n = len(s)
    radius = math.sqrt(n * sigma2 * _q(rate))
    if radius == 0:
        return np.zeros(n)
    target = math.sqrt(_q(rate))
    log_m = _codeword_bits(n, rate) * math.log(2)
    log_e = math.log(rng.standard_exponential())

    def log_hazard(log_x):
        lf = _log_window_mass(math.exp(log_x), target, n)
        if lf > -27:  # P(min <= x) = 1 - (1 - F)^M, exactly
            return log_m + math.log(-math.log1p(-min(math.exp(lf), 1.0)) or np.finfo(float).tiny)
        return log_m + lf

    log_hi = math.log(epsilon * target)
    if log_hazard(log_hi) < log_e:
        return None
    log_lo = -740.0
    if log_hazard(log_lo) >= log_e:
        x = 0.0
    else:
        x = math.exp(brentq(lambda v: log_hazard(v) - log_e, log_lo, log_hi, xtol=1e-13))

    f_minus = _log_cos_density(target - x, n)
    f_plus = _log_cos_density(target + x, n) if target + x < 1 else -np.inf
    p_minus = 1.0 / (1.0 + math.exp(min(f_plus - f_minus, 700.0)))
    cos = target - x if rng.random() < p_minus else target + x

    s_hat = s / np.linalg.norm(s)
    w = rng.standard_normal(n)
    w -= (w @ s_hat) * s_hat
    w /= np.linalg.norm(w)
    return radius * (cos * s_hat + math.sqrt(max(1 - cos * cos, 0.0)) * w)


# --- coded schemes ------------------------------------------------------------


def _explicit(n, rate, mode):
    if mode is DecoderMode.FullJoint:
        return True
    return (1 << min(_codeword_bits(n, rate), 62)) * n <= EXPLICIT_FLOATS_MAX


def _check_joint_budget(cfg, r1, r2):
    if cfg.decoder_mode is DecoderMode.FullJoint:
        bits = _codeword_bits(cfg.n, r1) + _codeword_bits(cfg.n, r2)
        if bits > JOINT_BITS_MAX:
            raise BudgetExceeded(
                f"full joint decoding needs 2^{bits} codeword pairs (limit 2^{JOINT_BITS_MAX})"
            )


def _quantize(cfg, t, s, rate, sigma2, role):
    """Encoder output for one user: (word or zeros, codebook or None, index, failed)."""
    rng = trial_rng(cfg.seed, t, role)
    if _explicit(cfg.n, rate, cfg.decoder_mode):
        cb = build_codebook(cfg.n, rate, sigma2, rng)
        idx = vq_encode(s, cb, cfg.epsilon)
        if idx is None:
            return np.zeros(cfg.n), cb, None, True
        return cb.words[idx], cb, idx, False
    word = sample_selected_word(s, rate, sigma2, cfg.epsilon, rng)
    if word is None:
        return np.zeros(cfg.n), None, None, True
    return word, None, None, False


def _coded_trial(cfg, t, src, ch, rates, gains, decode_gains, estimate):
    """One trial of a quantize-and-superimpose scheme.

    ``gains`` are (direct, codeword) amplitudes per user, ``decode_gains`` the
    effective codeword amplitudes the joint decoder assumes, and ``estimate``
    maps (u1, u2, y) to the two reconstructions.
    """
    s1, s2 = gen_source(src, cfg.n, trial_rng(cfg.seed, t, "source"))
    u1, cb1, i1, f1 = _quantize(cfg, t, s1, rates[0], src.sigma2, "codebook1")
    u2, cb2, i2, f2 = _quantize(cfg, t, s2, rates[1], src.sigma2, "codebook2")
    (a1, b1), (a2, b2) = gains
    x1 = a1 * s1 + b1 * u1
    x2 = a2 * s2 + b2 * u2
    z = math.sqrt(ch.noise) * trial_rng(cfg.seed, t, "noise").standard_normal(cfg.n)
    y = x1 + x2 + z

    decoded, ok = False, True
    if cfg.decoder_mode is DecoderMode.FullJoint:
        pair = vq_joint_decode(y, cb1, cb2, decode_gains[0], decode_gains[1],
                               rho_tilde(RatePair(*rates), src.rho), cfg.epsilon)
        hat1 = cb1.words[pair[0]] if pair else np.zeros(cfg.n)
        hat2 = cb2.words[pair[1]] if pair else np.zeros(cfg.n)
        if not (f1 or f2):
            decoded, ok = True, pair == (i1, i2)
    else:
        hat1, hat2 = u1, u2
    e1, e2 = estimate(hat1, hat2, y)
    return _Trial(cfg.n, (s1 - e1) ** 2, (s2 - e2) ** 2,
                  float(np.mean(x1 * x1)), float(np.mean(x2 * x2)),
                  enc_fail=int(f1) + int(f2), decoded=decoded, decode_ok=ok)


def sim_vq(cfg: SimConfig, src: SourceParams, ch: MacChannel, r: RatePair) -> SchemeEmpirics:
    _check_joint_budget(cfg, r.r1, r.r2)
    co = vq_estimator_coeffs(r, src.rho, src.sigma2, ch)
    gains = ((0.0, co.alpha1), (0.0, co.alpha2))

    def estimate(u1, u2, y):
        return co.gamma11 * u1 + co.gamma12 * u2, co.gamma22 * u1 + co.gamma21 * u2

    def one(t):
        return _coded_trial(cfg, t, src, ch, (r.r1, r.r2), gains,
                            (co.alpha1, co.alpha2), estimate)

    return _run(cfg, one)


def sim_superposition(cfg: SimConfig, src: SourceParams, ch: MacChannel,
                      sp: SuperpositionConfig) -> SchemeEmpirics:
    _check_joint_budget(cfg, sp.r1, sp.r2)
    d = sp_derive(sp, src, ch)
    gains = ((sp.alpha1, d.beta1), (sp.alpha2, d.beta2))
    g1, g2 = d.gamma1, d.gamma2

    def estimate(u1, u2, y):
        return g1[0] * u1 + g1[1] * u2 + g1[2] * y, g2[0] * u1 + g2[1] * u2 + g2[2] * y

    def one(t):
        return _coded_trial(cfg, t, src, ch, (sp.r1, sp.r2), gains,
                            (d.beta1p, d.beta2p), estimate)

    return _run(cfg, one)
