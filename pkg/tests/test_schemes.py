import math

import numpy as np
import pytest

from conftest import lmmse_mse
from gaussmac.errors import InfeasibleAlpha, OutOfDomain, SingularK, ZeroInput
from gaussmac.model import MacChannel, RatePair, SourceParams
from gaussmac.schemes import (
    R_MIN,
    SuperpositionConfig,
    alpha_max,
    mac_uncoded,
    mac_uncoded_is_optimal,
    pt2pt_threshold_gamma,
    pt2pt_uncoded,
    rho_tilde,
    sp_beta,
    sp_derive,
    sp_distortions,
    sp_rate_feasible,
    vq_distortions,
    vq_estimator_coeffs,
    vq_rate_feasible,
)


def joint_cov(sigma2, rho, q1=0.0, q2=0.0, gains=None, noise=1.0):
    """Covariance of (S1, S2, U1, U2, Y) under the test channel
    U_i = q_i S_i + sqrt(q_i (1 - q_i) sigma2) V_i with independent V_i, and
    Y = a1 S1 + b1 U1 + a2 S2 + b2 U2 + Z."""
    base = np.diag([sigma2, sigma2, 1.0, 1.0, noise])
    base[0, 1] = base[1, 0] = rho * sigma2
    a1, b1, a2, b2 = gains or (0.0, 0.0, 0.0, 0.0)
    m = np.zeros((5, 5))
    m[0, 0] = m[1, 1] = 1.0
    m[2, 0], m[2, 2] = q1, math.sqrt(q1 * (1 - q1) * sigma2)
    m[3, 1], m[3, 3] = q2, math.sqrt(q2 * (1 - q2) * sigma2)
    m[4] = a1 * m[0] + b1 * m[2] + a2 * m[1] + b2 * m[3]
    m[4, 4] = 1.0
    return m @ base @ m.T


def q(r):
    return 1 - 2.0 ** (-2 * r)


# --- uncoded ---------------------------------------------------------------


def test_pt2pt_examples(src):
    d = pt2pt_uncoded(1.0, 1.0, src, 1.0, 2.0)
    assert (d.d1, d.d2) == pytest.approx((0.75, 0.75), abs=1e-12)
    d = pt2pt_uncoded(1.0, 0.0, src, 3.0, 1.0)
    assert d.d1 == pytest.approx(1.0 * 1.0 / 4.0)
    with pytest.raises(ZeroInput):
        pt2pt_uncoded(0.0, 0.0, src, 1.0, 1.0)


def test_pt2pt_matches_lmmse():
    rng = np.random.default_rng(1)
    for _ in range(50):
        s, rho = rng.uniform(0.5, 3), rng.uniform(0, 0.95)
        a, b, p, n = rng.uniform(0, 2), rng.uniform(0.01, 2), rng.uniform(0.1, 10), rng.uniform(0.1, 5)
        kappa = math.sqrt(p / (s * (a * a + 2 * rho * a * b + b * b)))
        cov = joint_cov(s, rho, gains=(kappa * a, 0.0, kappa * b, 0.0), noise=n)
        d = pt2pt_uncoded(a, b, SourceParams(s, rho), p, n)
        assert d.d1 == pytest.approx(lmmse_mse(cov, 0, [4]), rel=1e-10)
        assert d.d2 == pytest.approx(lmmse_mse(cov, 1, [4]), rel=1e-10)


def test_pt2pt_threshold(src):
    assert pt2pt_threshold_gamma(0.375, src) == pytest.approx(7 / 3, abs=1e-12)
    assert pt2pt_threshold_gamma(0.8, src) == math.inf
    with pytest.raises(OutOfDomain):
        pt2pt_threshold_gamma(0.0, src)


def test_mac_uncoded_examples(src, ch12):
    d = mac_uncoded(src, ch12)
    assert (d.d1, d.d2) == pytest.approx((0.55, 0.55), abs=1e-12)
    d = mac_uncoded(src, MacChannel(1.0, 4.0, 1.0))
    assert (d.d1, d.d2) == pytest.approx((0.5, 0.21875), abs=1e-12)


def test_mac_uncoded_matches_lmmse():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s, rho = rng.uniform(0.5, 3), rng.uniform(0, 0.95)
        p1, p2, n = rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(0.1, 5)
        cov = joint_cov(s, rho, gains=(math.sqrt(p1 / s), 0, math.sqrt(p2 / s), 0), noise=n)
        d = mac_uncoded(SourceParams(s, rho), MacChannel(p1, p2, n))
        assert d.d1 == pytest.approx(lmmse_mse(cov, 0, [4]), rel=1e-10)
        assert d.d2 == pytest.approx(lmmse_mse(cov, 1, [4]), rel=1e-10)


def test_mac_uncoded_optimality(src, ch12):
    ok, slack = mac_uncoded_is_optimal(src, ch12)
    assert ok and slack == pytest.approx(0.625)
    # symmetric case: optimal exactly up to P/N = rho / (1 - rho^2)
    for snr in np.linspace(0.05, 3, 60):
        ok, _ = mac_uncoded_is_optimal(src, MacChannel(snr, snr, 1.0))
        assert ok == (snr <= 0.5 / 0.75 + 1e-12)


# --- vector quantizer ----------------------------------------------------------


def test_vq_example(src):
    d = vq_distortions(RatePair(1.0, 1.0), src)
    assert d.d1 == pytest.approx(0.25 * (1 - 0.25 * 0.75) / (1 - 0.375 ** 2), abs=1e-12)
    assert d.d1 == pytest.approx(0.2363636364, abs=1e-9)
    assert rho_tilde(RatePair(1.0, 1.0), 0.5) == pytest.approx(0.375)


def test_vq_matches_lmmse():
    rng = np.random.default_rng(3)
    for _ in range(50):
        s, rho = rng.uniform(0.5, 3), rng.uniform(0, 0.95)
        r1, r2 = rng.uniform(0.01, 3, size=2)
        cov = joint_cov(s, rho, q(r1), q(r2))
        d = vq_distortions(RatePair(r1, r2), SourceParams(s, rho))
        assert d.d1 == pytest.approx(lmmse_mse(cov, 0, [2, 3]), rel=1e-9)
        assert d.d2 == pytest.approx(lmmse_mse(cov, 1, [2, 3]), rel=1e-9)


def test_vq_estimator_weights_are_lmmse():
    rng = np.random.default_rng(4)
    for _ in range(20):
        rho = rng.uniform(0, 0.95)
        r1, r2 = rng.uniform(0.05, 3, size=2)
        cov = joint_cov(1.0, rho, q(r1), q(r2))
        k = cov[np.ix_([2, 3], [2, 3])]
        w1 = np.linalg.solve(k, cov[0, [2, 3]])
        w2 = np.linalg.solve(k, cov[1, [2, 3]])
        co = vq_estimator_coeffs(RatePair(r1, r2), rho)
        assert (co.gamma11, co.gamma12) == pytest.approx(tuple(w1), rel=1e-10)
        assert (co.gamma22, co.gamma21) == pytest.approx(tuple(w2), rel=1e-10)


def test_vq_estimator_frozen():
    co = vq_estimator_coeffs(RatePair(1.0, 1.0), 0.5, ch=MacChannel(2.0, 2.0, 1.0))
    assert co.gamma11 == pytest.approx(0.8125 / 0.859375)
    assert co.gamma12 == pytest.approx(0.125 / 0.859375)
    assert co.alpha1 == pytest.approx(math.sqrt(2 / 0.75))
    assert math.isnan(vq_estimator_coeffs(RatePair(1.0, 1.0), 0.5).alpha1)


def test_vq_feasibility(src):
    # sum constraint at R = 1: (2P(1 + 0.375) + N) / (N (1 - 0.375^2)) vs 2^4
    ok, slacks = vq_rate_feasible(RatePair(1.0, 1.0), src, MacChannel(5.0, 5.0, 1.0))
    assert ok and slacks[2] == pytest.approx(0.5 * math.log2(14.75 / 0.859375) - 2)
    p_edge = (16 * 0.859375 - 1) / (2 * 1.375)
    assert vq_rate_feasible(RatePair(1.0, 1.0), src, MacChannel(p_edge * 1.001, p_edge * 1.001, 1))[0]
    assert not vq_rate_feasible(RatePair(1.0, 1.0), src, MacChannel(p_edge * 0.999, p_edge * 0.999, 1))[0]


# --- superposition ------------------------------------------------------------


def test_sp_beta_power():
    for alpha in (0.0, 0.3, 0.9):
        for r in (0.1, 1.0, 2.5):
            b = sp_beta(alpha, r, 1.0, 1.0)
            # alpha^2 s + 2 alpha beta s q + beta^2 s q
            assert alpha ** 2 + 2 * alpha * b * q(r) + b * b * q(r) == pytest.approx(1.0)
    assert sp_beta(alpha_max(1.0, 1.0), 1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InfeasibleAlpha):
        sp_beta(1.5, 1.0, 1.0, 1.0)


def test_sp_config_errors(src, ch12):
    with pytest.raises(OutOfDomain):
        SuperpositionConfig(0.0, 1.0)
    with pytest.raises(InfeasibleAlpha):
        SuperpositionConfig(1.0, 1.0, -0.1, 0.0)
    with pytest.raises(SingularK):
        sp_derive(SuperpositionConfig(R_MIN / 2, 1.0), src, ch12)


def test_sp_matches_lmmse():
    rng = np.random.default_rng(6)
    for _ in range(60):
        s, rho = rng.uniform(0.5, 3), rng.uniform(0, 0.95)
        p1, p2, n = rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(0.1, 5)
        r1, r2 = rng.uniform(0.01, 3, size=2)
        a1 = rng.uniform(0, 1) * alpha_max(p1, s)
        a2 = rng.uniform(0, 1) * alpha_max(p2, s)
        cfg = SuperpositionConfig(r1, r2, a1, a2)
        src, ch = SourceParams(s, rho), MacChannel(p1, p2, n)
        der = sp_derive(cfg, src, ch)
        cov = joint_cov(s, rho, q(r1), q(r2), (a1, der.beta1, a2, der.beta2), n)
        d = sp_distortions(der, src)
        assert d.d1 == pytest.approx(lmmse_mse(cov, 0, [2, 3, 4]), rel=1e-8, abs=1e-12)
        assert d.d2 == pytest.approx(lmmse_mse(cov, 1, [2, 3, 4]), rel=1e-8, abs=1e-12)
        assert der.residual <= 1e-10
        # the K matrix is the covariance of (U1, U2, Y)
        assert der.k == pytest.approx(cov[np.ix_([2, 3, 4], [2, 3, 4])], rel=1e-10, abs=1e-12)


def test_sp_power_per_user():
    rng = np.random.default_rng(7)
    for _ in range(20):
        s = rng.uniform(0.5, 3)
        p1, p2 = rng.uniform(0.1, 10, size=2)
        r1, r2 = rng.uniform(0.05, 3, size=2)
        a1 = rng.uniform(0, 1) * alpha_max(p1, s)
        der = sp_derive(SuperpositionConfig(r1, r2, a1, 0.0), SourceParams(s, 0.3), MacChannel(p1, p2, 1))
        cov = joint_cov(s, 0.3, q(r1), q(r2))
        x1 = a1 ** 2 * s + 2 * a1 * der.beta1 * cov[0, 2] + der.beta1 ** 2 * cov[2, 2]
        assert x1 == pytest.approx(p1, rel=1e-10)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("snr", [0.2, 1.0, 5.0, 50.0])
def test_sp_reduces_to_vq(r, snr, src):
    ch = MacChannel(snr, snr * 1.5, 1.0)
    rates = RatePair(r, r * 0.7)
    der = sp_derive(SuperpositionConfig(rates.r1, rates.r2), src, ch)
    dsp, dvq = sp_distortions(der, src), vq_distortions(rates, src)
    assert (dsp.d1, dsp.d2) == pytest.approx((dvq.d1, dvq.d2), abs=1e-12)
    ok_sp, s_sp = sp_rate_feasible(der, src)
    ok_vq, s_vq = vq_rate_feasible(rates, src, ch)
    assert ok_sp == ok_vq
    assert s_sp == pytest.approx(s_vq, abs=1e-12)


def test_sp_symmetric_closed_forms(src):
    # equal rates: a_i collapses to rho 2^{-2R} / (1 - rho~^2)
    r, alpha = 0.8, 0.4
    der = sp_derive(SuperpositionConfig(r, r, alpha, alpha), src, MacChannel(2.0, 2.0, 1.0))
    qq, b = q(r), 1 - q(r)
    rt = 0.5 * qq
    assert der.a1 == pytest.approx(0.5 * b / (1 - rt * rt), rel=1e-12)
    assert der.a1 == pytest.approx(der.a2)
    assert der.nu1 == pytest.approx(der.nu2)
    assert der.beta1p == pytest.approx(der.beta2p)
