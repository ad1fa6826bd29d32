import math

import numpy as np
import pytest
from scipy.special import ndtr

from ctxbo.probit import (
    binary_entropy_bits,
    inv_mills,
    moments_of_probit,
    norm_pdf,
    probit_loglik_derivs,
)


def test_value_and_first_derivative_at_zero():
    value, d1, _ = probit_loglik_derivs(1, 0.0)
    assert value == pytest.approx(math.log(0.5), rel=1e-12)
    assert d1 == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-12)


def test_sign_flip_for_failure_outcome():
    _, d1, _ = probit_loglik_derivs(0, 0.0)
    assert d1 == pytest.approx(-math.sqrt(2.0 / math.pi), rel=1e-12)


def test_contradicted_observation_stays_finite_and_linear():
    # for c=1 and very negative f the slope approaches |f|
    _, d1, d2 = probit_loglik_derivs(1, -8.0)
    assert np.isfinite(d1) and np.isfinite(d2)
    assert d1 > 0

    # high-precision reference for phi/Phi at -8 via mpmath's erfc
    import mpmath

    mpmath.mp.dps = 40
    t = mpmath.mpf(-8)
    ratio = mpmath.npdf(t) / (mpmath.erfc(-t / mpmath.sqrt(2)) / 2)
    assert d1 == pytest.approx(float(ratio), rel=1e-9)
    assert d1 == pytest.approx(8.0, rel=0.02)


def test_totality_for_extreme_arguments():
    for f in (-500.0, -50.0, 50.0, 500.0):
        for c in (0, 1):
            value, d1, d2 = probit_loglik_derivs(c, f)
            assert np.isfinite(value) and np.isfinite(d1) and np.isfinite(d2)


def test_curvature_strictly_positive():
    f = np.linspace(-30, 30, 301)
    for c in (0, 1):
        _, _, d2 = probit_loglik_derivs(np.full_like(f, c), f)
        assert np.all(-d2 > 0)


def test_derivatives_match_finite_differences(rng):
    eps = 1e-6
    for _ in range(50):
        f = float(rng.uniform(-6, 6))
        c = int(rng.integers(0, 2))
        v_plus = probit_loglik_derivs(c, f + eps)[0]
        v_minus = probit_loglik_derivs(c, f - eps)[0]
        d1_plus = probit_loglik_derivs(c, f + eps)[1]
        d1_minus = probit_loglik_derivs(c, f - eps)[1]
        value, d1, d2 = probit_loglik_derivs(c, f)
        fd1 = (v_plus - v_minus) / (2 * eps)
        fd2 = (d1_plus - d1_minus) / (2 * eps)
        assert abs(d1 - fd1) / max(abs(fd1), 1e-12) < 1e-6
        assert abs(d2 - fd2) / max(abs(fd2), 1e-12) < 1e-5


def test_inv_mills_asymptotics():
    t = np.array([-300.0, -40.0, -10.0])
    r = inv_mills(t)
    assert np.all(np.isfinite(r))
    # r(t) ~ -t + 1/t for t << 0 up to O(t^-3)
    assert np.allclose(r, -t - 1.0 / t, rtol=1e-3)


def test_probit_moments_degenerate_variance():
    mean, var = moments_of_probit(np.array([0.7]), np.array([0.0]))
    assert mean[0] == pytest.approx(ndtr(0.7), rel=1e-12)
    assert var[0] == pytest.approx(0.0, abs=1e-12)


def test_probit_moments_symmetry():
    m_plus, v_plus = moments_of_probit(np.array([0.9]), np.array([0.5]))
    m_minus, v_minus = moments_of_probit(np.array([-0.9]), np.array([0.5]))
    assert m_plus[0] == pytest.approx(1.0 - m_minus[0], rel=1e-10)
    assert v_plus[0] == pytest.approx(v_minus[0], rel=1e-10)
    m_zero, _ = moments_of_probit(np.array([0.0]), np.array([1.3]))
    assert m_zero[0] == pytest.approx(0.5, abs=1e-12)


def test_probit_moments_match_monte_carlo(rng):
    for _ in range(5):
        mu = float(rng.uniform(-2, 2))
        var = float(rng.uniform(0.01, 4.0))
        draws = ndtr(mu + math.sqrt(var) * rng.standard_normal(1_000_000))
        mc_mean = float(np.mean(draws))
        mc_var = float(np.var(draws))
        se_mean = float(np.std(draws)) / 1000.0
        mean, variance = moments_of_probit(np.array([mu]), np.array([var]))
        assert abs(mean[0] - mc_mean) < 3 * se_mean + 1e-9
        # variance standard error estimated from the fourth moment
        m4 = float(np.mean((draws - mc_mean) ** 4))
        se_var = math.sqrt(max(m4 - mc_var**2, 0.0)) / 1000.0
        assert abs(variance[0] - mc_var) < 3 * se_var + 1e-9


def test_binary_entropy_endpoints():
    assert binary_entropy_bits(0.0) == 0.0
    assert binary_entropy_bits(1.0) == 0.0
    assert binary_entropy_bits(0.5) == pytest.approx(1.0, rel=1e-12)
