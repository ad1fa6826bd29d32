import math

import numpy as np
import pytest
from scipy.integrate import dblquad
from scipy.special import ndtr

from conftest import make_binary_state
from ctxbo.domain import Box
from ctxbo.kernels import ProductContext, SquaredExponential, gram
from ctxbo.laplace import (
    fit_laplace,
    log_marginal_likelihood,
    posterior_mean_argmax,
    predict_class_prob,
    predict_latent,
    refit_with_observation,
)
from ctxbo.probit import norm_pdf, probit_loglik_derivs


def _bisect_fixed_point():
    # oracle: unique root of f = phi(f)/Phi(f)
    g = lambda f: norm_pdf(f) / ndtr(f) - f
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_single_observation_mode_matches_fixed_point_oracle():
    oracle = _bisect_fixed_point()
    state = fit_laplace(
        np.array([[0.0]]), np.array([1.0]), SquaredExponential(lengthscales=[1.0], variance=1.0)
    )
    assert state.f0[0] == pytest.approx(oracle, abs=1e-6)
    assert oracle == pytest.approx(0.506054, abs=1e-5)


def test_symmetric_pair_has_zero_mode():
    kernel = SquaredExponential(lengthscales=[1.0], variance=1.0)
    state = fit_laplace(np.array([[0.2], [0.2]]), np.array([1.0, 0.0]), kernel)
    assert np.allclose(state.f0, 0.0, atol=1e-7)
    # and the whole predictive mean stays flat
    mu, _ = state.predict_latent(np.linspace(-1, 1, 11)[:, None])
    assert np.allclose(mu, 0.0, atol=1e-7)


def test_self_consistency_residual_below_tolerance():
    for seed in range(5):
        state = make_binary_state(n=10, dim=2, seed=seed)
        grad = probit_loglik_derivs(state.c, state.f0)[1]
        assert np.max(np.abs(state.f0 - state.K @ grad)) < 1e-8


def test_newton_objective_monotone():
    for seed in range(5):
        state = make_binary_state(n=12, dim=1, seed=seed)
        psi = np.array(state.newton_objectives)
        assert np.all(np.diff(psi) >= -1e-12)


def test_far_field_reverts_to_prior():
    state = make_binary_state(n=8, dim=1, lengthscale=0.05, variance=1.7, seed=3)
    mu, var = state.predict_latent(np.array([[25.0]]))  # hundreds of lengthscales away
    assert abs(mu[0]) < 1e-6
    assert var[0] == pytest.approx(1.7, abs=1e-6)


def test_predictions_match_naive_inversion_oracle(rng):
    # dense reference computation with explicit inverses
    for seed in range(6):
        state = make_binary_state(n=5, dim=2, lengthscale=0.6, seed=seed)
        P = rng.uniform(0, 1, size=(7, 2))
        mu, var = state.predict_latent(P)

        K = state.K
        Ks = state.kernel.eval_matrix(P, state.X)
        grad = probit_loglik_derivs(state.c, state.f0)[1]
        mu_ref = Ks @ np.linalg.inv(K) @ state.f0
        W_inv = np.diag(1.0 / state.W)
        cov_ref = state.kernel.eval_matrix(P, P) - Ks @ np.linalg.inv(K + W_inv) @ Ks.T
        var_ref = np.diag(cov_ref)

        assert np.max(np.abs(mu - mu_ref)) / max(np.max(np.abs(mu_ref)), 1e-12) < 1e-8
        assert np.max(np.abs(var - var_ref)) / np.max(np.abs(var_ref)) < 1e-8


def test_class_prob_identity_and_monte_carlo(rng):
    state = make_binary_state(n=9, dim=1, seed=11)
    p = np.array([[0.35]])
    mu, var = state.predict_latent(p)
    prob = state.predict_class_prob(p)[0]
    assert prob == pytest.approx(ndtr(mu[0] / math.sqrt(1 + var[0])), rel=1e-12)

    draws = ndtr(mu[0] + math.sqrt(var[0]) * rng.standard_normal(1_000_000))
    se = float(np.std(draws)) / 1000.0
    assert abs(prob - float(np.mean(draws))) < 3 * se + 1e-9


def test_class_prob_monotone_in_mu_and_shrinks_with_variance():
    mus = np.linspace(-2, 2, 21)
    probs = [ndtr(m / math.sqrt(1 + 0.5)) for m in mus]
    assert np.all(np.diff(probs) > 0)
    # growing variance pulls any fixed nonzero mean toward 1/2
    p_small = ndtr(1.0 / math.sqrt(1 + 0.1))
    p_large = ndtr(1.0 / math.sqrt(1 + 10.0))
    assert abs(p_large - 0.5) < abs(p_small - 0.5)


def test_scalar_wrappers():
    state = make_binary_state(n=6, dim=1, seed=2)
    mu, var = predict_latent(state, [0.5])
    assert isinstance(mu, float) and isinstance(var, float)
    assert 0.0 < predict_class_prob(state, [0.5]) < 1.0


def test_evidence_pinned_latent_limit():
    # kernel variance -> 0 pins the latent at zero: evidence -> ln(1/2)
    kernel = SquaredExponential(lengthscales=[1.0], variance=1e-10)
    state = fit_laplace(np.array([[0.0]]), np.array([1.0]), kernel)
    assert state.log_evidence == pytest.approx(math.log(0.5), abs=1e-4)


def test_evidence_matches_dense_quadrature_oracle():
    # two symmetric observations: evidence = iint Phi(f1)Phi(-f2) N(f|0,K) df
    kernel = SquaredExponential(lengthscales=[0.7], variance=1.0)
    X = np.array([[0.0], [0.4]])
    c = np.array([1.0, 0.0])
    state = fit_laplace(X, c, kernel)

    K = gram(kernel, X)
    Kinv = np.linalg.inv(K)
    norm = 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(K)))

    def integrand(f2, f1):
        f = np.array([f1, f2])
        return ndtr(f1) * ndtr(-f2) * norm * math.exp(-0.5 * f @ Kinv @ f)

    val, err = dblquad(integrand, -8, 8, lambda _: -8, lambda _: 8, epsabs=1e-10)
    oracle = math.log(val)
    assert state.log_evidence == pytest.approx(oracle, abs=0.05)
    assert state.log_evidence <= 2 * math.log(0.5) + 1e-12


def test_evidence_rises_when_observation_agrees():
    kernel = SquaredExponential(lengthscales=[0.5], variance=1.0)
    X = np.array([[0.0], [0.05], [0.1]])
    c = np.array([1.0, 1.0, 1.0])
    state = fit_laplace(X, c, kernel)
    agree = refit_with_observation(state, [0.07], 1)
    disagree = refit_with_observation(state, [0.07], 0)
    # per-observation evidence: adding a consistent outcome costs less evidence
    assert agree.log_evidence - state.log_evidence > disagree.log_evidence - state.log_evidence
    assert log_marginal_likelihood(agree) == agree.log_evidence


def test_posterior_mean_argmax_matches_grid_oracle():
    state = make_binary_state(n=6, dim=1, lengthscale=0.25, seed=7, contextual=True)
    box = Box(np.zeros(1), np.ones(1))
    s0 = np.array([0.8])
    x_star, mu_star = posterior_mean_argmax(state, s0, box, restarts=12, seed=0)

    grid = np.linspace(0, 1, 10_001)[:, None]
    P = np.concatenate([np.full((10_001, 1), 0.8), grid], axis=1)
    vals = state.value_mean(P)
    assert mu_star >= float(np.max(vals)) - 1e-3
    assert mu_star == pytest.approx(float(np.max(vals)), abs=1e-3)


def test_posterior_mean_argmax_flat_tie_break():
    kernel = SquaredExponential(lengthscales=[1.0], variance=1.0)
    state = fit_laplace(np.array([[0.3], [0.3]]), np.array([1.0, 0.0]), kernel)
    box = Box(np.array([-2.0]), np.array([6.0]))
    x_star, mu_star = posterior_mean_argmax(state, np.empty(0), box)
    assert mu_star == pytest.approx(0.0, abs=1e-9)
    assert x_star[0] == pytest.approx(2.0)  # box centre


def test_posterior_mean_argmax_invariant_to_permutation(rng):
    state = make_binary_state(n=8, dim=1, lengthscale=0.3, seed=9, contextual=True)
    box = Box(np.zeros(1), np.ones(1))
    _, v1 = posterior_mean_argmax(state, np.array([0.6]), box, seed=0)

    perm = rng.permutation(state.n)
    state2 = fit_laplace(state.X[perm], state.c[perm], state.kernel)
    _, v2 = posterior_mean_argmax(state2, np.array([0.6]), box, seed=0)
    assert v1 == pytest.approx(v2, abs=1e-9)


def test_fit_rejects_bad_inputs():
    kernel = SquaredExponential(lengthscales=[1.0], variance=1.0)
    with pytest.raises(ValueError):
        fit_laplace(np.empty((0, 1)), np.empty(0), kernel)
    with pytest.raises(ValueError):
        fit_laplace(np.array([[0.0]]), np.array([2.0]), kernel)
