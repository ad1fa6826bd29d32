import numpy as np
import pytest

from ctxbo.hyperfit import (
    HyperFitError,
    fit_hyperparameters,
    fit_kernel_to_binary_responses,
    fit_kernel_to_function_samples,
)
from ctxbo.kernels import LinearContextSum, SquaredExponential, gram


def _gp_draw(lengthscale, n, seed, d=2, variance=1.0, noise=1e-4):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 2, size=(n, d))
    kernel = SquaredExponential(lengthscales=[lengthscale] * d, variance=variance)
    K = gram(kernel, X) + noise * np.eye(n)
    y = np.linalg.cholesky(K) @ rng.standard_normal(n)
    return X, y


def test_lengthscale_recovery_within_30_percent():
    X, y = _gp_draw(lengthscale=0.5, n=1000, seed=0)
    kernel, noise = fit_kernel_to_function_samples(
        X,
        y,
        "se-ard",
        bounds={"lengthscale": (0.05, 5.0), "variance": (0.05, 20.0), "noise": (1e-6, 1e-1)},
        n_restarts=3,
        seed=0,
    )
    for ls in kernel.lengthscales:
        assert 0.35 < ls < 0.65


def test_constant_targets_drive_variance_to_lower_bound():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, size=(60, 1))
    y = np.zeros(60)
    kernel, _ = fit_kernel_to_function_samples(
        X,
        y,
        "se-ard",
        bounds={"lengthscale": (0.1, 2.0), "variance": (1e-3, 10.0), "noise": (1e-6, 1e-6)},
        n_restarts=3,
        seed=1,
    )
    assert kernel.variance == pytest.approx(1e-3, rel=0.01)


def test_pinned_bounds_returned_unchanged():
    X, y = _gp_draw(lengthscale=0.5, n=80, seed=2)
    kernel, noise = fit_kernel_to_function_samples(
        X,
        y,
        "se-ard",
        bounds={
            "lengthscale": (0.77, 0.77),
            "variance": (2.5, 2.5),
            "noise": (1e-4, 1e-4),
        },
        n_restarts=3,
        seed=2,
    )
    assert np.allclose(kernel.lengthscales, 0.77)
    assert kernel.variance == 2.5
    assert noise == 1e-4


def test_matern_families_fit_without_error():
    for family in ("matern32", "matern52"):
        X, y = _gp_draw(lengthscale=0.6, n=120, seed=3)
        kernel, _ = fit_kernel_to_function_samples(
            X, y, family,
            bounds={"lengthscale": (0.05, 5.0), "variance": (0.05, 20.0)},
            n_restarts=2, seed=3,
        )
        assert np.all(kernel.lengthscales > 0.05)


def test_gradient_matches_finite_differences_of_nll():
    # internal consistency of the analytic marginal-likelihood gradient
    from ctxbo.hyperfit import _kernel_and_grads, _sqdist_per_dim

    rng = np.random.default_rng(4)
    X = rng.uniform(0, 1, size=(40, 2))
    y = rng.standard_normal(40)
    sq = _sqdist_per_dim(X)
    for family in ("se-ard", "matern32", "matern52"):

        def nll(log_ls0, log_ls1, log_var):
            ls = np.exp([log_ls0, log_ls1])
            K, _ = _kernel_and_grads(family, X, ls, np.exp(log_var), sq)
            Kn = K + 1e-4 * np.eye(40)
            cf = np.linalg.cholesky(Kn)
            alpha = np.linalg.solve(Kn, y)
            return 0.5 * y @ alpha + np.sum(np.log(np.diag(cf)))

        theta = np.array([np.log(0.4), np.log(0.7), np.log(1.3)])
        ls = np.exp(theta[:2])
        K, dls = _kernel_and_grads(family, X, ls, np.exp(theta[2]), sq)
        Kn = K + 1e-4 * np.eye(40)
        Kinv = np.linalg.inv(Kn)
        alpha = Kinv @ y
        M = np.outer(alpha, alpha) - Kinv
        grads = [-0.5 * np.sum(M * dK) for dK in dls] + [-0.5 * np.sum(M * K)]
        eps = 1e-6
        for i in range(3):
            t_hi, t_lo = theta.copy(), theta.copy()
            t_hi[i] += eps
            t_lo[i] -= eps
            fd = (nll(*t_hi) - nll(*t_lo)) / (2 * eps)
            assert grads[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_binary_path_via_builder():
    rng = np.random.default_rng(5)
    n = 120
    S = rng.uniform(0.0, 1.5, size=(n, 1))
    X = rng.uniform(-1, 1, size=(n, 1))
    latent = 2.0 * S[:, 0] * (1 - X[:, 0] ** 2)
    c = (rng.random(n) < 0.5 * (1 + np.tanh(latent))).astype(float)
    P = np.concatenate([S, X], axis=1)

    def builder(params):
        ls, var, theta = params
        return LinearContextSum(
            base=SquaredExponential(lengthscales=[ls], variance=var), theta=theta
        )

    kernel = fit_kernel_to_binary_responses(
        P, c, builder, bounds=[(0.1, 5.0), (0.1, 50.0), (0.1, 50.0)], n_restarts=2, seed=5
    )
    assert isinstance(kernel, LinearContextSum)
    assert kernel.theta > 0


def test_dispatching_wrapper():
    X, y = _gp_draw(lengthscale=0.5, n=60, seed=6)
    kernel = fit_hyperparameters(
        (X, y), family="se-ard",
        bounds={"lengthscale": (0.1, 2.0), "variance": (0.1, 5.0)},
        n_restarts=2, seed=6,
    )
    assert isinstance(kernel, SquaredExponential)
    with pytest.raises(ValueError):
        fit_hyperparameters((X, y), family=None)


def test_unknown_family_rejected():
    X, y = _gp_draw(lengthscale=0.5, n=30, seed=7)
    with pytest.raises(ValueError):
        fit_kernel_to_function_samples(X, y, "cubic-spline", n_restarts=1)
