"""Query-selection rules for contextual binary and preferential optimization.

Covers the joint knowledge-gradient rule (with its envelope-theorem
gradient), the binary upper-credible-bound and Thompson rules for choosing
parameters, mutual-information (BALD) context selection, and the two duel
rules (self-sparring and maximally uncertain challenge).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from .domain import Box, Domain, as_packed
from .features import FeatureMap
from .kernels import PreferenceKernel
from .laplace import (
    LaplaceState,
    maximize_scalar_field,
    posterior_mean_argmax,
    refit_with_observation,
)
from .probit import binary_entropy_bits, moments_of_probit, norm_pdf
from .sampling import sample_argmax, sample_decoupled

UCB_BETA_DEFAULT = float(ndtri(0.95))
BALD_C = np.sqrt(np.pi * np.log(2.0) / 2.0)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Optimizer knobs shared by all rules."""

    ucb_beta: float = UCB_BETA_DEFAULT
    restarts: int = 20
    scan: int = 256
    quad_order: int = 61
    s_grid: int = 512
    inner_restarts: int = 8
    inner_scan: int = 192
    kg_scan: int = 24
    kg_polish: int = 4

    def __post_init__(self):
        if self.ucb_beta < 0:
            raise ValueError("ucb_beta must be nonnegative")
        if self.quad_order < 21 or self.quad_order % 2 == 0:
            raise ValueError("quadrature order must be odd and at least 21")


@dataclass(frozen=True)
class Decision:
    """One round's chosen query with optimizer diagnostics."""

    s: np.ndarray
    x: np.ndarray
    x2: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def packed(self) -> np.ndarray:
        parts = [self.s, self.x] + ([self.x2] if self.x2 is not None else [])
        return np.concatenate([np.atleast_1d(p) for p in parts])


# ---------------------------------------------------------------------------
# knowledge gradient
# ---------------------------------------------------------------------------


def _kg_parts(state, z, s0, x_box, config: AcquisitionConfig):
    z = as_packed(z)
    mu, var = state.predict_latent(z)
    mu_c = float(np.asarray(moments_of_probit(mu, var, config.quad_order)[0])[0])
    out = {"mu_c": mu_c}
    for c in (0, 1):
        st = refit_with_observation(state, z, c)
        x_star, mu_star = posterior_mean_argmax(
            st, s0, x_box, restarts=config.inner_restarts, seed=0, scan=config.inner_scan
        )
        out[c] = (st, x_star, mu_star)
    return out


def current_best_mean(state, s0, x_box, config: AcquisitionConfig) -> float:
    _, mu_star = posterior_mean_argmax(
        state, s0, x_box, restarts=config.inner_restarts, seed=0, scan=config.inner_scan
    )
    return mu_star


def kg_binary(
    state: LaplaceState,
    candidate,
    s0,
    x_box: Box,
    config: AcquisitionConfig | None = None,
    mu_star_t: float | None = None,
) -> float:
    """One-step expected gain in the maximum posterior mean at context s0.

    ``mu_star_t`` may be precomputed (it is candidate-independent) or set to
    0.0 when only the argmax over candidates matters.
    """
    config = config or AcquisitionConfig()
    parts = _kg_parts(state, candidate, s0, x_box, config)
    if mu_star_t is None:
        mu_star_t = current_best_mean(state, s0, x_box, config)
    mu_c = parts["mu_c"]
    return mu_c * parts[1][2] + (1.0 - mu_c) * parts[0][2] - mu_star_t


def _class_prob_grad(state, z, config):
    """Value and gradient of the predictive class probability at z."""
    z = as_packed(z)
    mu, var = state.predict_latent(z)
    mu, var = float(mu[0]), float(var[0])
    G = state.kernel.grad_wrt_first(z, state.X)       # (n, D)
    dmu = G.T @ state.grad

    Ks = state.kernel.eval_matrix(z, state.X)[0]      # (n,)
    sW = state.sqrt_W
    from scipy.linalg import solve_triangular

    u = solve_triangular(state.L_B, sW * Ks, lower=True)
    w = sW * solve_triangular(state.L_B.T, u, lower=False)  # (K + W^-1)^-1 k
    dvar = state.kernel.grad_diag(z) - 2.0 * (G.T @ w)

    denom = np.sqrt(1.0 + var)
    a = mu / denom
    prob = float(np.asarray(moments_of_probit(np.array([mu]), np.array([var]), config.quad_order)[0])[0])
    dprob = norm_pdf(a) * (dmu / denom - 0.5 * mu * dvar / denom**3)
    return prob, dprob


def _mu_star_gradient(st_aug, z, x_star, s0):
    """Envelope-theorem gradient of the refitted max posterior mean wrt z."""
    z = as_packed(z)
    n1 = st_aug.n
    p_star = np.concatenate([np.atleast_1d(s0), x_star])
    k_vec = st_aug.kernel.eval_matrix(st_aug.X, p_star)[:, 0]   # (n+1,)
    grad_y = st_aug.grad
    W = st_aug.W

    # dk(z, p*)/dz enters through the appended training point
    dk_last = st_aug.kernel.grad_wrt_first(z, p_star)[0]        # (D,)
    term1 = grad_y[-1] * dk_last

    # dy/dz = (I + K W)^{-1} (dK/dz) grad_y, using (I+KW)^{-1} = W^{-1/2} B^{-1} W^{1/2}
    G = st_aug.kernel.grad_wrt_first(z, st_aug.X[:-1])          # (n, D)
    corner = st_aug.kernel.grad_diag(z)                          # (D,)
    U = np.empty((n1, G.shape[1]))
    U[:-1, :] = G * grad_y[-1]
    U[-1, :] = G.T @ grad_y[:-1] + corner * grad_y[-1]

    from scipy.linalg import solve_triangular

    sW = st_aug.sqrt_W
    rhs = sW[:, None] * U
    half = solve_triangular(st_aug.L_B, rhs, lower=True)
    dy = solve_triangular(st_aug.L_B.T, half, lower=False) / sW[:, None]

    term2 = -(k_vec * W) @ dy
    return term1 + term2


def kg_gradient(
    state: LaplaceState,
    candidate,
    s0,
    x_box: Box,
    config: AcquisitionConfig | None = None,
) -> np.ndarray:
    """Gradient of ``kg_binary`` with respect to the candidate (s, x)."""
    config = config or AcquisitionConfig()
    z = as_packed(candidate)
    parts = _kg_parts(state, z, s0, x_box, config)
    mu_c = parts["mu_c"]
    st1, x1, mu1 = parts[1]
    st0, x0, mu0 = parts[0]
    _, dmu_c = _class_prob_grad(state, z, config)
    g1 = _mu_star_gradient(st1, z, x1, s0)
    g0 = _mu_star_gradient(st0, z, x0, s0)
    return dmu_c * (mu1 - mu0) + mu_c * g1 + (1.0 - mu_c) * g0


def maximize_ckg(
    state: LaplaceState,
    domain: Domain,
    config: AcquisitionConfig | None = None,
    seed: int = 0,
) -> Decision:
    """Joint (s, x) selection by multi-start ascent of the knowledge gradient."""
    config = config or AcquisitionConfig()
    t0 = time.perf_counter()
    box = domain.value_box
    s0 = domain.context_box.center
    mu_star_t = current_best_mean(state, s0, domain.search_box, config)

    def value(z):
        return kg_binary(state, z, s0, domain.search_box, config, mu_star_t=mu_star_t)

    from .laplace import _sobol_points

    cand = _sobol_points(box, config.kg_scan, seed)
    vals = np.array([value(z) for z in cand])
    order = np.argsort(vals)[::-1][: config.kg_polish]

    best_z, best_v = cand[order[0]], float(vals[order[0]])
    bounds = list(zip(box.lo, box.hi))
    for idx in order:
        res = minimize(
            lambda z: -value(z),
            cand[idx],
            jac=lambda z: -kg_gradient(state, z, s0, domain.search_box, config),
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 40},
        )
        if np.isfinite(res.fun) and -res.fun > best_v:
            best_v, best_z = float(-res.fun), box.clip(res.x)
    point = domain.unpack(best_z)
    return Decision(
        s=point.s,
        x=point.x,
        diagnostics={
            "acq_value": best_v,
            "restarts": int(config.kg_polish),
            "wall_time": time.perf_counter() - t0,
        },
    )


# ---------------------------------------------------------------------------
# sequential x-rules
# ---------------------------------------------------------------------------


def ucb_values(state, P, beta, quad_order=61):
    mu, var = state.predict_latent(P)
    mean, variance = moments_of_probit(mu, var, quad_order)
    return mean + beta * np.sqrt(variance)


def select_x_ucb(
    state: LaplaceState,
    s0,
    x_box: Box,
    config: AcquisitionConfig | None = None,
    seed: int = 0,
):
    """Maximize E[Φ(f)] + β √V[Φ(f)] over x at the given context."""
    config = config or AcquisitionConfig()
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))

    def value(Xc):
        P = np.concatenate([np.tile(s0, (Xc.shape[0], 1)), Xc], axis=1)
        return ucb_values(state, P, config.ucb_beta, config.quad_order)

    x_star, val = maximize_scalar_field(
        value, None, x_box, restarts=config.restarts, seed=seed, scan=config.scan
    )
    return x_star, val


def select_x_ts(
    state: LaplaceState | None,
    fmap: FeatureMap,
    s0,
    x_box: Box,
    rng: np.random.Generator,
    config: AcquisitionConfig | None = None,
):
    """Thompson draw: maximize one decoupled posterior sample over x."""
    config = config or AcquisitionConfig()
    sample = sample_decoupled(state, fmap, rng)
    seed = int(rng.integers(2**31))
    return sample_argmax(
        sample, x_box, s0, restarts=config.restarts, seed=seed, scan=config.scan
    )


# ---------------------------------------------------------------------------
# BALD context selection
# ---------------------------------------------------------------------------


def bald_mi_from_moments(mu, var):
    """Approximate mutual information (bits) between outcome and latent."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    marginal = binary_entropy_bits(
        np.asarray(moments_of_probit(mu, var)[0])
    )
    c2 = BALD_C**2
    conditional = BALD_C / np.sqrt(var + c2) * np.exp(-(mu**2) / (2.0 * (var + c2)))
    return np.maximum(marginal - conditional, 0.0)


def bald_mi(state: LaplaceState, candidate) -> float:
    mu, var = state.predict_latent(as_packed(candidate))
    return float(bald_mi_from_moments(mu, var)[0])


def _bald_batch(state, P):
    mu, var = state.predict_latent(P)
    return bald_mi_from_moments(mu, var)


def select_s_bald(
    state: LaplaceState,
    x_fixed,
    s_box: Box,
    config: AcquisitionConfig | None = None,
    x2_fixed=None,
):
    """Maximize outcome/latent mutual information over the context.

    ``x_fixed`` (and ``x2_fixed`` for duels) stay pinned; a dense grid over
    the context is polished with a local bounded search.
    """
    config = config or AcquisitionConfig()
    x_fixed = np.atleast_1d(np.asarray(x_fixed, dtype=float))
    tail = x_fixed if x2_fixed is None else np.concatenate([x_fixed, np.atleast_1d(x2_fixed)])

    def value(S):
        P = np.concatenate([S, np.tile(tail, (S.shape[0], 1))], axis=1)
        return _bald_batch(state, P)

    if s_box.dim == 1:
        grid = np.linspace(s_box.lo[0], s_box.hi[0], config.s_grid)[:, None]
    else:
        from .laplace import _sobol_points

        grid = _sobol_points(s_box, config.s_grid, 0)
    vals = value(grid)
    best = int(np.argmax(vals))
    res = minimize(
        lambda s: -value(s[None, :])[0],
        grid[best],
        method="L-BFGS-B",
        bounds=list(zip(s_box.lo, s_box.hi)),
        options={"maxiter": 60},
    )
    if np.isfinite(res.fun) and -res.fun >= vals[best]:
        return s_box.clip(res.x)
    return grid[best]


def select_joint_bald(
    state: LaplaceState,
    domain: Domain,
    config: AcquisitionConfig | None = None,
    seed: int = 0,
):
    """Maximize the BALD objective jointly over the full query point."""
    config = config or AcquisitionConfig()
    box = domain.packed_box

    def value(P):
        return _bald_batch(state, P)

    z, _ = maximize_scalar_field(
        value, None, box, restarts=max(8, config.restarts // 2), seed=seed, scan=config.scan
    )
    return domain.unpack(z)


# ---------------------------------------------------------------------------
# duel rules
# ---------------------------------------------------------------------------


def select_duel_kss(
    state: LaplaceState | None,
    fmap: FeatureMap,
    s0,
    x_box: Box,
    rng: np.random.Generator,
    config: AcquisitionConfig | None = None,
):
    """Self-sparring: two independent Thompson draws fight each other."""
    config = config or AcquisitionConfig()
    x1 = select_x_ts(state, fmap, s0, x_box, rng, config)
    x2 = select_x_ts(state, fmap, s0, x_box, rng, config)
    return x1, x2


def duel_outcome_variance(state, s0, x1, X2, quad_order=61):
    """Variance of the duel outcome probability Φ(f(s,x1) − f(s,x)) per row of X2."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    X2 = np.asarray(X2, dtype=float)
    if X2.ndim == 1:
        X2 = X2[None, :]
    head = np.concatenate([s0, x1])
    P = np.concatenate([np.tile(head, (X2.shape[0], 1)), X2], axis=1)
    mu, var = state.predict_latent(P)
    return moments_of_probit(mu, var, quad_order)[1]


def select_duel_muc(
    state: LaplaceState,
    s0,
    x_box: Box,
    config: AcquisitionConfig | None = None,
    seed: int = 0,
):
    """Champion (posterior-mean argmax) versus maximally uncertain challenger."""
    config = config or AcquisitionConfig()
    if not isinstance(state.kernel, PreferenceKernel):
        raise ValueError("MUC requires a preferential model")
    x1, _ = posterior_mean_argmax(
        state, s0, x_box, restarts=config.inner_restarts, seed=seed, scan=config.inner_scan
    )

    def value(X2):
        return duel_outcome_variance(state, s0, x1, X2, config.quad_order)

    x2, _ = maximize_scalar_field(
        value, None, x_box, restarts=config.restarts, seed=seed, scan=config.scan
    )
    return x1, x2
