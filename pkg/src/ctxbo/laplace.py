"""Gaussian-process classification with a probit link via the Laplace approximation.

The posterior over latent values at the training points is approximated by a
Gaussian centred at the mode, found by Newton iteration in the standard
``B = I + W^{1/2} K W^{1/2}`` parameterization. The fitted state is immutable
and exposes batched latent/class predictions plus the evidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import ndtr
from scipy.stats import qmc

from .domain import Box, as_packed
from .kernels import Kernel, PreferenceKernel, gram
from .probit import probit_loglik_derivs


class LaplaceError(RuntimeError):
    pass


def _as_matrix(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    return P


@dataclass(frozen=True)
class LaplaceState:
    """Fitted probit-GP posterior at the training points.

    ``grad`` is the likelihood gradient at the mode, which by the mode's
    self-consistency equals ``K^{-1} f0``; predictions use it directly.
    """

    kernel: Kernel
    X: np.ndarray           # (n, D) packed training points
    c: np.ndarray           # (n,) binary outcomes
    f0: np.ndarray          # (n,) latent mode
    grad: np.ndarray        # (n,) d log p(c|f) / df at the mode
    W: np.ndarray           # (n,) negative likelihood curvature (diagonal)
    K: np.ndarray           # (n, n) jittered training covariance
    L_B: np.ndarray         # lower Cholesky of B = I + W^1/2 K W^1/2
    log_evidence: float
    newton_objectives: tuple = ()
    residual: float = 0.0
    _cov_chol_cache: list = field(default_factory=list, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def sqrt_W(self) -> np.ndarray:
        return np.sqrt(self.W)

    def _cross(self, P) -> np.ndarray:
        return self.kernel.eval_matrix(_as_matrix(P), self.X)

    def predict_latent(self, P):
        """Latent mean and variance at packed points ``P``; vectorized."""
        P = _as_matrix(P)
        Ks = self._cross(P)                      # (m, n)
        mu = Ks @ self.grad
        V = solve_triangular(self.L_B, (Ks * self.sqrt_W).T, lower=True)
        var = self.kernel.diag(P) - np.sum(V**2, axis=0)
        return mu, np.maximum(var, 0.0)

    def predict_class_prob(self, P):
        mu, var = self.predict_latent(P)
        return ndtr(mu / np.sqrt(1.0 + var))

    def latent_mean(self, P):
        return self._cross(_as_matrix(P)) @ self.grad

    def posterior_cov_train(self) -> np.ndarray:
        """Posterior covariance (K^{-1} + W)^{-1} at the training points."""
        SK = self.sqrt_W[:, None] * self.K       # W^1/2 K
        V = solve_triangular(self.L_B, SK, lower=True)
        return self.K - V.T @ V

    def posterior_chol_train(self) -> np.ndarray:
        if not self._cov_chol_cache:
            cov = self.posterior_cov_train()
            eps = 1e-10 * max(1.0, float(np.max(np.diag(cov))))
            self._cov_chol_cache.append(
                cholesky(cov + eps * np.eye(self.n), lower=True)
            )
        return self._cov_chol_cache[0]

    def sample_latent_train(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Draws from the Gaussian posterior over latents at training points."""
        L = self.posterior_chol_train()
        z = rng.standard_normal((size, self.n))
        return self.f0[None, :] + z @ L.T

    # --- value-function views (identical to the latent for non-duel kernels) ---

    def _value_cross(self, P) -> np.ndarray:
        if isinstance(self.kernel, PreferenceKernel):
            return self.kernel.cross_value_matrix(_as_matrix(P), self.X)
        return self._cross(P)

    def value_mean(self, P):
        """Posterior mean of the value function at packed (s, x) points."""
        return self._value_cross(P) @ self.grad

    def value_mean_grad(self, p):
        """Gradient of ``value_mean`` at a single packed value point."""
        p = as_packed(p)
        if isinstance(self.kernel, PreferenceKernel):
            G = self.kernel.grad_value_wrt_first(p, self.X)
        else:
            G = self.kernel.grad_wrt_first(p, self.X)
        return G.T @ self.grad


def fit_laplace(
    X,
    c,
    kernel: Kernel,
    tol: float = 1e-8,
    max_iter: int = 100,
    a_init=None,
) -> LaplaceState:
    """Find the probit-likelihood posterior mode by damped Newton iteration.

    Each step is computed in the well-conditioned ``B`` form and halved until
    the unnormalized log posterior does not decrease. ``a_init`` warm-starts
    the iteration in gradient space (``f = K a``); hypothetical one-point
    updates pass the previous mode's likelihood gradient extended by zero.
    Raises :class:`LaplaceError` if the self-consistency residual is still
    above ``tol`` after ``max_iter`` iterations.
    """
    X = _as_matrix(X)
    c = np.asarray(c, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("training set must be nonempty")
    if X.shape[0] != c.size:
        raise ValueError("points/outcomes length mismatch")
    if not np.all((c == 0) | (c == 1)):
        raise ValueError("outcomes must be 0 or 1")

    n = X.shape[0]
    K = gram(kernel, X)
    if a_init is None:
        a = np.zeros(n)      # a = K^{-1} f throughout
        f = np.zeros(n)
    else:
        a = np.asarray(a_init, dtype=float).copy()
        f = K @ a
    loglik, d1, d2 = probit_loglik_derivs(c, f)
    psi = float(np.sum(loglik) - 0.5 * a @ f)
    objectives = [psi]

    L_B = np.eye(n)
    W = -d2
    for _ in range(max_iter):
        W = -d2
        sW = np.sqrt(W)
        B = np.eye(n) + (sW[:, None] * K) * sW[None, :]
        L_B = cholesky(B, lower=True)
        b = W * f + d1
        v = solve_triangular(L_B, sW * (K @ b), lower=True)
        a_new = b - sW * solve_triangular(L_B.T, v, lower=False)

        # line search on the unnormalized log posterior, halving toward the
        # previous iterate; a stays consistent with f = K a
        step = 1.0
        accepted = None
        for _ in range(30):
            a_try = a + step * (a_new - a)
            f_try = K @ a_try
            ll_try = np.sum(probit_loglik_derivs(c, f_try)[0])
            psi_try = float(ll_try - 0.5 * a_try @ f_try)
            if psi_try >= psi - 1e-12:
                accepted = (a_try, f_try, psi_try)
                break
            step *= 0.5
        if accepted is None:
            break
        a, f, psi = accepted
        objectives.append(psi)
        loglik, d1, d2 = probit_loglik_derivs(c, f)
        residual = float(np.max(np.abs(f - K @ d1)))
        if residual < tol:
            break

    residual = float(np.max(np.abs(f - K @ d1)))
    if residual >= tol:
        raise LaplaceError(
            f"Newton iteration did not converge: residual {residual:.3e} after {max_iter} iterations"
        )

    W = -d2
    sW = np.sqrt(W)
    B = np.eye(n) + (sW[:, None] * K) * sW[None, :]
    L_B = cholesky(B, lower=True)
    evidence = float(np.sum(loglik) - 0.5 * a @ f - np.sum(np.log(np.diag(L_B))))
    return LaplaceState(
        kernel=kernel,
        X=X,
        c=c,
        f0=f,
        grad=d1,
        W=W,
        K=K,
        L_B=L_B,
        log_evidence=evidence,
        newton_objectives=tuple(objectives),
        residual=residual,
    )


def fit_from_observations(observations, kernel: Kernel, **kwargs) -> LaplaceState:
    """Fit from an iterable of (packed point, outcome) pairs."""
    X = np.array([as_packed(p) for p, _ in observations], dtype=float)
    c = np.array([o for _, o in observations], dtype=float)
    return fit_laplace(X, c, kernel, **kwargs)


def predict_latent(state: LaplaceState, p):
    mu, var = state.predict_latent(as_packed(p))
    return float(mu[0]), float(var[0])


def predict_class_prob(state: LaplaceState, p) -> float:
    return float(state.predict_class_prob(as_packed(p))[0])


def log_marginal_likelihood(state: LaplaceState) -> float:
    return state.log_evidence


def refit_with_observation(
    state: LaplaceState, z, c: int, tol: float = 1e-10, max_iter: int = 100
) -> LaplaceState:
    """Refit with one extra observation appended.

    Used by the knowledge gradient's hypothetical updates; Newton warm-starts
    from the current mode extended by the prior mean at the new point.
    """
    X = np.vstack([state.X, as_packed(z)[None, :]])
    c_all = np.append(state.c, float(c))
    a_init = np.append(state.grad, 0.0)
    return fit_laplace(X, c_all, state.kernel, tol=tol, max_iter=max_iter, a_init=a_init)


def _sobol_points(box: Box, count: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=box.dim, scramble=True, seed=seed)
    u = sampler.random_base2(int(np.ceil(np.log2(max(count, 2)))))[:count]
    return box.lo + u * (box.hi - box.lo)


def maximize_scalar_field(
    value_fn,
    grad_fn,
    box: Box,
    restarts: int = 20,
    seed: int = 0,
    scan: int = 256,
    polish_iters: int = 200,
    extra_starts=None,
):
    """Multi-start bound-constrained ascent of a differentiable field.

    A scrambled-Sobol scan picks the most promising starts, which are then
    polished with L-BFGS-B. Returns the best point/value found; ties across a
    numerically flat field fall back to the box centre.
    """
    from scipy.optimize import minimize

    cand = _sobol_points(box, scan, seed)
    cand = np.vstack([cand, box.center[None, :]])
    if extra_starts is not None and len(extra_starts):
        cand = np.vstack([cand, _as_matrix(extra_starts)])
    vals = value_fn(cand)

    spread = float(np.max(vals) - np.min(vals))
    if not np.isfinite(spread) or spread < 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        center = box.center
        return center, float(value_fn(center[None, :])[0])

    order = np.argsort(vals)[::-1][:restarts]
    bounds = list(zip(box.lo, box.hi))
    best_x = cand[order[0]]
    best_v = float(vals[order[0]])
    for idx in order:
        if grad_fn is None:
            res = minimize(
                lambda x: -value_fn(x[None, :])[0],
                cand[idx],
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": polish_iters},
            )
        else:
            res = minimize(
                lambda x: (-value_fn(x[None, :])[0], -grad_fn(x)),
                cand[idx],
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": polish_iters},
            )
        if np.isfinite(res.fun) and -res.fun > best_v:
            best_v = float(-res.fun)
            best_x = box.clip(res.x)
    return best_x, best_v


def posterior_mean_argmax(
    state: LaplaceState,
    s0,
    x_box: Box,
    restarts: int = 20,
    seed: int = 0,
    scan: int = 256,
):
    """Argmax over x of the posterior value mean at fixed context ``s0``.

    Works for both binary states (latent mean) and preferential states
    (value-function mean through the duel cross-covariance).
    """
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))

    def value(Xc):
        P = np.concatenate([np.tile(s0, (Xc.shape[0], 1)), Xc], axis=1)
        return state.value_mean(P)

    def grad(x):
        p = np.concatenate([s0, x])
        return state.value_mean_grad(p)[s0.size:]

    x_star, mu_star = maximize_scalar_field(
        value, grad, x_box, restarts=restarts, seed=seed, scan=scan
    )
    return x_star, mu_star
