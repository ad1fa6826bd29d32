import numpy as np
import pytest

from conftest import make_binary_state
from ctxbo.domain import Box
from ctxbo.features import build_feature_map
from ctxbo.kernels import PreferenceKernel, ProductContext, SquaredExponential
from ctxbo.laplace import fit_laplace
from ctxbo.sampling import FunctionSample, sample_argmax, sample_decoupled, sample_weight_space

UNIT = Box(np.array([0.0]), np.array([1.0]))


def test_prior_weight_space_covariance_matches_kernel():
    kernel = SquaredExponential(lengthscales=[0.25], variance=1.0)
    fmap = build_feature_map(kernel, UNIT, rank=128)
    rng = np.random.default_rng(0)
    samples = sample_weight_space(None, fmap, rng=rng, size=2000)
    Z = np.linspace(0.1, 0.9, 9)[:, None]
    evals = np.array([s(Z) for s in samples])
    emp_cov = np.cov(evals.T)
    exact = kernel.eval_matrix(Z, Z)
    assert np.max(np.abs(emp_cov - exact)) < 0.05 * 1.0 + 3 * np.sqrt(2.0 / 2000)


def test_infinite_regularization_zeroes_the_mean():
    state = make_binary_state(n=10, dim=1, seed=1)
    fmap = build_feature_map(state.kernel, UNIT, rank=64)
    rng = np.random.default_rng(1)
    samples = sample_weight_space(state, fmap, reg=1e6, rng=rng, size=400)
    omegas = np.array([s.omega for s in samples])
    assert np.max(np.abs(np.mean(omegas, axis=0))) < 0.2  # mean ~ 0, prior spread remains


def test_weight_space_moments_match_laplace_at_training_points():
    state = make_binary_state(n=8, dim=1, lengthscale=0.35, seed=2)
    fmap = build_feature_map(state.kernel, UNIT, rank=256)
    rng = np.random.default_rng(2)
    draws = sample_weight_space(state, fmap, rng=rng, size=4000)
    evals = np.array([s(state.X) for s in draws])
    emp_mean = np.mean(evals, axis=0)
    emp_var = np.var(evals, axis=0)
    mu, var = state.predict_latent(state.X)
    se_mean = np.sqrt(emp_var / 4000)
    se_var = emp_var * np.sqrt(2.0 / 3999)
    assert np.all(np.abs(emp_mean - mu) < 3 * se_mean + 0.02)
    assert np.all(np.abs(emp_var - var) < 3 * se_var + 0.02)


def test_decoupled_interpolation_identity():
    # K v reproduces y - Phi omega exactly; the sample's own update differs
    # only by the documented diagonal jitter
    state = make_binary_state(n=7, dim=1, seed=3)
    fmap = build_feature_map(state.kernel, UNIT, rank=64)
    rng = np.random.default_rng(3)
    sample = sample_decoupled(state, fmap, rng=rng)

    target = sample.train_latents - fmap.phi(state.X) @ sample.omega
    reproduced = state.K @ sample.v
    assert np.max(np.abs(reproduced - target)) < 1e-8

    update = sample(state.X) - fmap.phi(state.X) @ sample.omega
    jitter = 1e-9 * state.kernel.signal_variance
    assert np.all(np.abs(update - reproduced) <= jitter * np.abs(sample.v) + 1e-10)


def test_decoupled_moments_match_laplace_at_test_points():
    state = make_binary_state(n=9, dim=1, lengthscale=0.3, seed=4)
    fmap = build_feature_map(state.kernel, UNIT, rank=256)
    rng = np.random.default_rng(4)
    draws = sample_decoupled(state, fmap, rng=rng, size=4000)
    Z = np.linspace(0.05, 0.95, 10)[:, None]
    evals = np.array([s(Z) for s in draws])
    emp_mean = np.mean(evals, axis=0)
    emp_var = np.var(evals, axis=0)
    mu, var = state.predict_latent(Z)
    se_mean = np.sqrt(emp_var / 4000)
    se_var = emp_var * np.sqrt(2.0 / 3999)
    assert np.all(np.abs(emp_mean - mu) < 3 * se_mean + 0.02)
    assert np.all(np.abs(emp_var - var) < 3 * se_var + 0.03)


def test_decoupled_far_field_variance_stays_at_prior():
    # data clustered at the left end; probe 20+ lengthscales away
    rng = np.random.default_rng(5)
    kernel = SquaredExponential(lengthscales=[0.02], variance=1.0)
    X = rng.uniform(0.0, 0.3, size=(40, 1))
    c = rng.integers(0, 2, size=40).astype(float)
    state = fit_laplace(X, c, kernel)
    fmap = build_feature_map(state.kernel, UNIT, rank=512)
    draws = sample_decoupled(state, fmap, rng=rng, size=4000)
    Z = np.array([[0.85]])
    evals = np.array([s(Z)[0] for s in draws])
    assert abs(np.var(evals) - 1.0) < 0.10


def make_starvation_state(sites=40, reps=30, lengthscale=0.04, hi=0.8):
    """Dense pinned observations spanning most of the box, gap on the right.

    With a feature basis whose shortest wavelength exceeds the gap, every
    weight direction is data-constrained, so the weight-space flavor loses
    its far-field variance while the decoupled flavor keeps the prior's.
    """
    kernel = SquaredExponential(lengthscales=[lengthscale], variance=1.0)
    xs = np.linspace(0.0, hi, sites)
    X = np.repeat(xs, reps)[:, None]
    c = np.tile(np.arange(reps) % 2, sites).astype(float)
    return fit_laplace(X, c, kernel)


def test_weight_space_variance_starvation_vs_decoupled():
    state = make_starvation_state()
    fmap = build_feature_map(state.kernel, UNIT, rank=5)
    rng = np.random.default_rng(6)
    Z = np.array([[0.98]])
    ws = sample_weight_space(state, fmap, rng=rng, size=2000)
    dec = sample_decoupled(state, fmap, rng=rng, size=2000)
    var_ws = np.var([s(Z)[0] for s in ws])
    var_dec = np.var([s(Z)[0] for s in dec])
    assert var_ws < 0.7 * var_dec


def test_preferential_samples_exactly_antisymmetric():
    base = ProductContext(base=SquaredExponential(lengthscales=[0.3], variance=1.0))
    pref = PreferenceKernel(base=base)
    rng = np.random.default_rng(7)
    X = np.column_stack(
        [rng.uniform(0.2, 1, 10), rng.uniform(0, 1, 10), rng.uniform(0, 1, 10)]
    )
    c = rng.integers(0, 2, size=10).astype(float)
    state = fit_laplace(X, c, pref)
    fmap = build_feature_map(pref, Box(np.zeros(3), np.ones(3)), rank=64)
    for maker in (sample_weight_space, sample_decoupled):
        sample = maker(state, fmap, rng=rng)
        for _ in range(10):
            s = rng.uniform(0.1, 1)
            x1, x2 = rng.uniform(0, 1, size=2)
            forward = sample.duel_value([s], [x1], [x2])
            backward = sample.duel_value([s], [x2], [x1])
            assert forward == -backward  # exact, not approximate


def test_sample_argmax_matches_grid_oracle():
    state = make_binary_state(n=8, dim=1, lengthscale=0.2, seed=8)
    fmap = build_feature_map(state.kernel, UNIT, rank=128)
    rng = np.random.default_rng(8)
    sample = sample_decoupled(state, fmap, rng=rng)
    x_star = sample_argmax(sample, UNIT, s0=np.empty(0), restarts=16, seed=0)
    grid = np.linspace(0, 1, 10_001)[:, None]
    vals = sample(grid)
    assert sample(np.atleast_2d(x_star))[0] >= float(np.max(vals)) - 1e-3


def test_constant_sample_returns_box_centre():
    kernel = SquaredExponential(lengthscales=[0.3], variance=1.0)
    fmap = build_feature_map(kernel, UNIT, rank=16)
    sample = FunctionSample(fmap=fmap, omega=np.zeros(fmap.rank))
    x_star = sample_argmax(sample, UNIT, s0=np.empty(0))
    assert x_star[0] == pytest.approx(0.5)


def test_argmax_invariant_under_positive_scaling():
    state = make_binary_state(n=6, dim=1, lengthscale=0.25, seed=9)
    fmap = build_feature_map(state.kernel, UNIT, rank=64)
    rng = np.random.default_rng(9)
    sample = sample_weight_space(state, fmap, rng=rng)
    scaled = FunctionSample(fmap=fmap, omega=3.7 * sample.omega)
    a = sample_argmax(sample, UNIT, s0=np.empty(0), seed=1)
    b = sample_argmax(scaled, UNIT, s0=np.empty(0), seed=1)
    assert abs(a[0] - b[0]) < 1e-6


def test_seeded_draws_reproducible():
    state = make_binary_state(n=6, dim=1, seed=10)
    fmap = build_feature_map(state.kernel, UNIT, rank=64)
    s1 = sample_decoupled(state, fmap, rng=np.random.default_rng(42))
    s2 = sample_decoupled(state, fmap, rng=np.random.default_rng(42))
    assert np.array_equal(s1.omega, s2.omega)
    assert np.array_equal(s1.v, s2.v)


def test_decoupled_two_sample_energy_test_against_dense_posterior():
    # joint draws at 10 points vs direct Gaussian draws from Laplace moments
    state = make_binary_state(n=8, dim=1, lengthscale=0.3, seed=11)
    fmap = build_feature_map(state.kernel, UNIT, rank=256)
    rng = np.random.default_rng(11)
    Z = np.linspace(0.05, 0.95, 10)[:, None]

    n_draws = 2000
    draws = sample_decoupled(state, fmap, rng=rng, size=n_draws)
    A = np.array([s(Z) for s in draws])

    Ks = state.kernel.eval_matrix(Z, state.X)
    mu = Ks @ state.grad
    W_inv = np.diag(1.0 / state.W)
    cov = state.kernel.eval_matrix(Z, Z) - Ks @ np.linalg.inv(state.K + W_inv) @ Ks.T
    L = np.linalg.cholesky(cov + 1e-10 * np.eye(10))
    B = mu + rng.standard_normal((n_draws, 10)) @ L.T

    p = _energy_permutation_test(A, B, rng, n_perm=200)
    assert p > 0.01


def _energy_permutation_test(A, B, rng, n_perm=200):
    from scipy.spatial.distance import cdist

    n, m = A.shape[0], B.shape[0]
    Z = np.vstack([A, B])
    D = cdist(Z, Z)

    def energy(idx_a, idx_b):
        d_ab = D[np.ix_(idx_a, idx_b)].mean()
        d_aa = D[np.ix_(idx_a, idx_a)].mean()
        d_bb = D[np.ix_(idx_b, idx_b)].mean()
        return 2 * d_ab - d_aa - d_bb

    obs = energy(np.arange(n), np.arange(n, n + m))
    count = 0
    for _ in range(n_perm):
        perm = rng.permutation(n + m)
        stat = energy(perm[:n], perm[n:])
        if stat >= obs:
            count += 1
    return (count + 1) / (n_perm + 1)
