"""Approximate posterior function draws for probit-GP models.

Two flavors:

* weight-space — latents at the training points are drawn from the Laplace
  posterior, then weights from the Bayesian linear model conditional; cheap
  but its variance collapses far from data once observations outnumber
  features (variance starvation);
* decoupled — a weight-space *prior* draw plus an exact kernel-basis update
  toward posterior latents, which keeps far-field variance at the prior
  level.

Samples are deterministic functions once drawn; for preferential models the
sample represents the latent value function, so duel evaluations are exact
differences and therefore anti-symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky

from .domain import Box, as_packed
from .features import FeatureMap
from .kernels import PreferenceKernel
from .laplace import LaplaceState, maximize_scalar_field

DEFAULT_REG = 1e-3


@dataclass(frozen=True)
class FunctionSample:
    """A finite-rank posterior (or prior) function draw.

    Evaluation is ``phi_value(z) @ omega`` plus, for the decoupled flavor, a
    kernel-basis correction anchored at the training points.
    """

    fmap: FeatureMap
    omega: np.ndarray                  # (rank,)
    v: np.ndarray | None = None        # (n,) update coefficients
    anchors: np.ndarray | None = None  # (n, D) packed training points
    kernel: object | None = None
    flavor: str = "weight-space"
    train_latents: np.ndarray | None = None  # y draw behind the update, diagnostics

    def __call__(self, P) -> np.ndarray:
        """Value-function evaluation at packed (s, x) points."""
        P = np.asarray(P, dtype=float)
        squeeze = P.ndim == 1
        if squeeze:
            P = P[None, :]
        out = self.fmap.phi_value(P) @ self.omega
        if self.v is not None:
            out = out + self._cross(P) @ self.v
        return float(out[0]) if squeeze else out

    def _cross(self, P):
        if isinstance(self.kernel, PreferenceKernel):
            return self.kernel.cross_value_matrix(P, self.anchors)
        return self.kernel.eval_matrix(P, self.anchors)

    def grad_x(self, p) -> np.ndarray:
        """Gradient with respect to the x block of a single value point."""
        p = as_packed(p)
        ds = self.fmap.context_dim
        g = self.fmap.phi_value_grad_x(p).T @ self.omega
        if self.v is not None:
            if isinstance(self.kernel, PreferenceKernel):
                G = self.kernel.grad_value_wrt_first(p, self.anchors)
            else:
                G = self.kernel.grad_wrt_first(p, self.anchors)
            g = g + (G.T @ self.v)[ds:]
        return g

    def duel_value(self, s, x1, x2) -> float:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a = np.concatenate([s, np.atleast_1d(x1)])
        b = np.concatenate([s, np.atleast_1d(x2)])
        return self(a) - self(b)


def _draw_weights(Phi, y, reg, rng, size):
    """Bayesian-linear-model conditional draw(s) of the feature weights."""
    rank = Phi.shape[1]
    A = Phi.T @ Phi + reg**2 * np.eye(rank)
    cf = cho_factor(A, lower=True)
    mean = cho_solve(cf, Phi.T @ y.T).T          # (size, rank)
    L = cholesky(A, lower=True)
    # cov = reg^2 A^{-1}; draw via solve against the upper factor
    z = rng.standard_normal((size, rank))
    dev = reg * np.linalg.solve(L.T, z.T).T
    return mean + dev


def sample_weight_space(
    state: LaplaceState | None,
    fmap: FeatureMap,
    reg: float = DEFAULT_REG,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Two-step weight-space draw(s): latents first, then feature weights."""
    rng = np.random.default_rng() if rng is None else rng
    m = 1 if size is None else size
    if state is None or state.n == 0:
        omega = rng.standard_normal((m, fmap.rank))
    else:
        y = state.sample_latent_train(rng, size=m)   # (m, n)
        Phi = fmap.phi(state.X)                      # (n, rank)
        omega = _draw_weights(Phi, y, reg, rng, m)
    samples = [
        FunctionSample(fmap=fmap, omega=omega[i], flavor="weight-space")
        for i in range(m)
    ]
    return samples[0] if size is None else samples


def sample_decoupled(
    state: LaplaceState | None,
    fmap: FeatureMap,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Decoupled-bases draw(s): prior weights plus kernel-basis update."""
    rng = np.random.default_rng() if rng is None else rng
    m = 1 if size is None else size
    omega = rng.standard_normal((m, fmap.rank))
    if state is None or state.n == 0:
        samples = [
            FunctionSample(fmap=fmap, omega=omega[i], flavor="decoupled")
            for i in range(m)
        ]
        return samples[0] if size is None else samples

    y = state.sample_latent_train(rng, size=m)       # (m, n)
    Phi = fmap.phi(state.X)                          # (n, rank)
    resid = y - omega @ Phi.T                        # (m, n)
    cf = cho_factor(state.K, lower=True)
    v = cho_solve(cf, resid.T).T                     # (m, n)
    samples = [
        FunctionSample(
            fmap=fmap,
            omega=omega[i],
            v=v[i],
            anchors=state.X,
            kernel=state.kernel,
            flavor="decoupled",
            train_latents=y[i],
        )
        for i in range(m)
    ]
    return samples[0] if size is None else samples


def sample_argmax(
    sample: FunctionSample,
    x_box: Box,
    s0=None,
    restarts: int = 20,
    seed: int = 0,
    scan: int = 256,
):
    """Argmax over x of a sampled function at fixed context ``s0``."""
    ds = sample.fmap.context_dim
    s0 = np.zeros(ds) if s0 is None else np.atleast_1d(np.asarray(s0, dtype=float))

    def value(Xc):
        P = np.concatenate([np.tile(s0, (Xc.shape[0], 1)), Xc], axis=1)
        return sample(P)

    def grad(x):
        return sample.grad_x(np.concatenate([s0, x]))

    x_star, _ = maximize_scalar_field(
        value, grad, x_box, restarts=restarts, seed=seed, scan=scan
    )
    return x_star
