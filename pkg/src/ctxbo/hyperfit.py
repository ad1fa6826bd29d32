"""Kernel hyperparameter estimation by maximum likelihood.

Two data regimes:

* real-valued function samples — exact GP-regression marginal likelihood
  with analytic gradients in log-parameter space (used to pre-fit benchmark
  surrogates);
* binary responses — the Laplace-approximation evidence of the classification
  model (used to pre-fit the psychometric surrogate), optimized with
  finite differences since each evaluation is itself an inner Newton solve.

Both run bound-constrained L-BFGS-B from multiple seeded starts and are
deterministic given the seed. Bounds with equal endpoints pin a parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import qmc

from .kernels import make_stationary
from .laplace import LaplaceError, fit_laplace


class HyperFitError(RuntimeError):
    pass


def _sqdist_per_dim(X):
    return [(X[:, d][:, None] - X[:, d][None, :]) ** 2 for d in range(X.shape[1])]


def _kernel_and_grads(family, X, lengthscales, variance, sq_cols):
    """K and its derivatives w.r.t. log lengthscales and log variance."""
    d = X.shape[1]
    scaled = sum(sq_cols[i] / lengthscales[i] ** 2 for i in range(d))
    r = np.sqrt(np.maximum(scaled, 0.0))
    if family == "se-ard":
        K = variance * np.exp(-0.5 * scaled)
        dlogls = [K * (sq_cols[i] / lengthscales[i] ** 2) for i in range(d)]
    elif family == "matern32":
        e = np.exp(-np.sqrt(3.0) * r)
        K = variance * (1.0 + np.sqrt(3.0) * r) * e
        dlogls = [3.0 * variance * e * (sq_cols[i] / lengthscales[i] ** 2) for i in range(d)]
    elif family == "matern52":
        e = np.exp(-np.sqrt(5.0) * r)
        K = variance * (1.0 + np.sqrt(5.0) * r + 5.0 * r**2 / 3.0) * e
        coef = (5.0 / 3.0) * variance * (1.0 + np.sqrt(5.0) * r) * e
        dlogls = [coef * (sq_cols[i] / lengthscales[i] ** 2) for i in range(d)]
    else:
        raise ValueError(f"unknown kernel family {family!r}")
    return K, dlogls


@dataclass(frozen=True)
class _Param:
    name: str
    low: float
    high: float

    @property
    def pinned(self) -> bool:
        return self.low == self.high


def _expand_bounds(bounds: dict, dims: int) -> list[_Param]:
    ls_lo, ls_hi = bounds.get("lengthscale", (1e-3, 1e3))
    params = [_Param(f"lengthscale[{d}]", ls_lo, ls_hi) for d in range(dims)]
    v_lo, v_hi = bounds.get("variance", (1e-4, 1e4))
    params.append(_Param("variance", v_lo, v_hi))
    n_lo, n_hi = bounds.get("noise", (1e-6, 1e-1))
    params.append(_Param("noise", n_lo, n_hi))
    return params


def _starts(params: list[_Param], n_restarts: int, seed: int, center=None):
    free = [p for p in params if not p.pinned]
    logs_lo = np.log([p.low for p in free])
    logs_hi = np.log([p.high for p in free])
    starts = []
    if center is not None:
        starts.append(np.clip(np.log(center), logs_lo, logs_hi))
    else:
        starts.append(0.5 * (logs_lo + logs_hi))
    if n_restarts > 1 and free:
        import numpy as _np

        sampler = qmc.Sobol(d=len(free), scramble=True, seed=seed)
        u = sampler.random_base2(int(_np.ceil(_np.log2(max(n_restarts - 1, 2)))))
        starts.extend(logs_lo + u[: n_restarts - 1] * (logs_hi - logs_lo))
    return free, logs_lo, logs_hi, starts


def fit_kernel_to_function_samples(
    X,
    y,
    family: str,
    bounds: dict | None = None,
    n_restarts: int = 10,
    seed: int = 0,
):
    """Stationary-kernel MLE on noisy real-valued samples.

    Returns ``(kernel, noise_variance)`` at the best of the multi-start local
    optima. Raises :class:`HyperFitError` when no start improves on its
    initialization.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    bounds = bounds or {}
    params = _expand_bounds(bounds, d)
    sq_cols = _sqdist_per_dim(X)

    # data-driven center: median pairwise distance and the sample variance
    med = []
    for i in range(d):
        vals = np.sqrt(sq_cols[i][np.triu_indices(n, 1)])
        med.append(max(np.median(vals), 1e-6))
    center_all = np.array(med + [max(np.var(y), 1e-6), 1e-3])

    free, logs_lo, logs_hi, starts = _starts(
        params,
        n_restarts,
        seed,
        center=[c for c, p in zip(center_all, params) if not p.pinned],
    )
    fixed = {p.name: p.low for p in params if p.pinned}

    def unpack(theta_log):
        full = []
        it = iter(theta_log)
        for p in params:
            full.append(fixed[p.name] if p.pinned else float(np.exp(next(it))))
        ls = np.array(full[:d])
        return ls, full[d], full[d + 1]

    def nll_and_grad(theta_log):
        ls, variance, noise = unpack(theta_log)
        K, dlogls = _kernel_and_grads(family, X, ls, variance, sq_cols)
        Kn = K + noise * np.eye(n)
        try:
            cf = cho_factor(Kn, lower=True)
        except np.linalg.LinAlgError:
            return 1e10, np.zeros(len(theta_log))
        alpha = cho_solve(cf, y)
        nll = 0.5 * y @ alpha + np.sum(np.log(np.diag(cf[0]))) + 0.5 * n * np.log(2 * np.pi)
        Kinv = cho_solve(cf, np.eye(n))
        M = np.outer(alpha, alpha) - Kinv
        grads_full = [-0.5 * np.sum(M * dK) for dK in dlogls]
        grads_full.append(-0.5 * np.sum(M * K))            # d/dlog variance
        grads_full.append(-0.5 * noise * np.trace(M))      # d/dlog noise
        g = np.array([gv for gv, p in zip(grads_full, params) if not p.pinned])
        return float(nll), g

    if not free:
        ls, variance, noise = unpack([])
        return make_stationary(family, ls, variance), noise

    best = None
    lbfgs_bounds = list(zip(logs_lo, logs_hi))
    for x0 in starts:
        res = minimize(
            nll_and_grad, x0, jac=True, method="L-BFGS-B", bounds=lbfgs_bounds
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e10:
        raise HyperFitError("every restart failed to produce a usable optimum")
    ls, variance, noise = unpack(best.x)
    return make_stationary(family, ls, variance), noise


def fit_kernel_to_binary_responses(
    X,
    c,
    builder,
    bounds: list[tuple[float, float]],
    n_restarts: int = 10,
    seed: int = 0,
):
    """Maximize the Laplace evidence over kernel parameters.

    ``builder`` maps a positive parameter vector to a kernel; ``bounds`` give
    one (low, high) pair per parameter. Finite-difference L-BFGS-B on the log
    parameters.
    """
    X = np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    params = [_Param(f"p{i}", lo, hi) for i, (lo, hi) in enumerate(bounds)]
    free, logs_lo, logs_hi, starts = _starts(params, n_restarts, seed)
    fixed = {p.name: p.low for p in params if p.pinned}

    def unpack(theta_log):
        full = []
        it = iter(theta_log)
        for p in params:
            full.append(fixed[p.name] if p.pinned else float(np.exp(next(it))))
        return np.array(full)

    def neg_evidence(theta_log):
        kernel = builder(unpack(theta_log))
        try:
            state = fit_laplace(X, c, kernel)
        except (LaplaceError, np.linalg.LinAlgError):
            return 1e10
        return -state.log_evidence

    if not free:
        return builder(unpack([]))

    best = None
    lbfgs_bounds = list(zip(logs_lo, logs_hi))
    for x0 in starts:
        res = minimize(
            neg_evidence,
            x0,
            method="L-BFGS-B",
            bounds=lbfgs_bounds,
            options={"eps": 1e-4, "maxiter": 60},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or best.fun >= 1e10:
        raise HyperFitError("all evidence evaluations failed")
    return builder(unpack(best.x))


def fit_hyperparameters(data, family=None, bounds=None, *, builder=None, **kwargs):
    """Dispatching wrapper: regression MLE or binary-evidence MLE.

    ``data`` is ``(X, y)``; real-valued targets route to the GP-regression
    path (requires ``family``), binary targets to the evidence path
    (requires ``builder`` and a bounds list).
    """
    X, y = data
    y = np.asarray(y, dtype=float).ravel()
    binary = np.all((y == 0) | (y == 1)) and builder is not None
    if binary:
        return fit_kernel_to_binary_responses(X, y, builder, bounds, **kwargs)
    if family is None:
        raise ValueError("family required for the regression path")
    kernel, _ = fit_kernel_to_function_samples(X, y, family, bounds, **kwargs)
    return kernel
