"""Gaussian prior/noise model, posterior covariance, and the design objective.

The unknown coefficient vector has a block-diagonal squared-exponential prior
over the subdomain midpoints (no cross-correlation between the two material
parameters), the noise is white, and the design objective is the trace of the
weighted posterior covariance.  The posterior is data independent, so the
whole objective and its design gradient run offline.

The gradient uses the reduced identity

    d/dp_k tr(W Gamma_post) = -2 tr(W H_k^T F'_k Gamma_post),

with ``H = S^{-1} F Gamma_pr`` and ``H_k`` its rows in block k, obtained by
differentiating the posterior covariance and cancelling the prior terms; the
literal product-rule expansion is kept alongside for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "PriorCovariance",
    "PosteriorSummary",
    "BayesError",
    "build_prior",
    "roi_weights",
    "posterior",
    "woodbury_covariance",
    "a_optimality_target",
    "a_optimality_gradient",
    "a_optimality_gradient_expanded",
    "posterior_mean",
]


class BayesError(RuntimeError):
    """Raised when a covariance factorization fails."""


@dataclass
class PriorCovariance:
    """Block-diagonal prior: diag(std_lambda^2 G0, std_mu^2 G0) with
    squared-exponential G0 over the subdomain midpoints."""

    matrix: np.ndarray  # (2N, 2N)
    length_scale: float
    std_lambda: float
    std_mu: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class PosteriorSummary:
    covariance: np.ndarray  # (2N, 2N)
    mean: np.ndarray | None = None


def build_prior(
    midpoints: np.ndarray,
    length_scale: float,
    std_lambda: float = 1.0,
    std_mu: float = 1.0,
    jitter: float = 1e-12,
) -> PriorCovariance:
    """Squared-exponential prior over subdomain midpoints.

    ``jitter * tr(G0) / N`` is added to the diagonal of the base kernel before
    scaling; squared-exponential matrices at these length scales are close to
    singular and the jitter keeps factorizations positive definite without
    visibly moving the objective.
    """
    if not length_scale > 0:
        raise BayesError(f"correlation length must be positive, got {length_scale}")
    pts = np.asarray(midpoints, dtype=float)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    base = np.exp(-d2 / (2.0 * length_scale**2))
    n = base.shape[0]
    base[np.diag_indices(n)] += jitter * np.trace(base) / n

    matrix = np.zeros((2 * n, 2 * n))
    matrix[:n, :n] = std_lambda**2 * base
    matrix[n:, n:] = std_mu**2 * base
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise BayesError("prior covariance is not positive definite") from exc
    return PriorCovariance(
        matrix=matrix,
        length_scale=length_scale,
        std_lambda=std_lambda,
        std_mu=std_mu,
    )


def roi_weights(mask: np.ndarray) -> np.ndarray:
    """Diagonal 0/1 weights over the coefficient vector from a subdomain mask
    (applied to both parameter blocks)."""
    mask = np.asarray(mask)
    return np.concatenate([mask, mask]).astype(float)


def _inner_factor(F: np.ndarray, prior: PriorCovariance, noise_variance: float):
    """Cholesky factor of S = F P F^T + noise, with G = F P."""
    if noise_variance <= 0:
        raise BayesError(f"noise variance must be positive, got {noise_variance}")
    G = F @ prior.matrix  # (KM, 2N)
    S = G @ F.T
    S[np.diag_indices_from(S)] += noise_variance
    try:
        chol = sla.cho_factor(S, lower=True)
    except np.linalg.LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(S)[0])
        raise BayesError(
            f"inner covariance factorization failed; smallest eigenvalue {smallest:.3e}"
        ) from exc
    return chol, G


def posterior(
    F: np.ndarray,
    prior: PriorCovariance,
    noise_variance: float,
    measurements: np.ndarray | None = None,
) -> PosteriorSummary:
    """Posterior covariance (and mean, when measurements are given)."""
    chol, G = _inner_factor(F, prior, noise_variance)
    H = sla.cho_solve(chol, G)  # S^{-1} F P
    cov = prior.matrix - G.T @ H
    mean = None
    if measurements is not None:
        mean = G.T @ sla.cho_solve(chol, np.asarray(measurements, dtype=float))
    return PosteriorSummary(covariance=cov, mean=mean)


def woodbury_covariance(F: np.ndarray, prior: PriorCovariance, noise_variance: float) -> np.ndarray:
    """Posterior covariance via the coefficient-space form
    (P^{-1} + F^T F / noise)^{-1}; cross-check for the measurement-space path."""
    n = prior.size
    info = np.linalg.inv(prior.matrix) + (F.T @ F) / noise_variance
    return np.linalg.solve(info, np.eye(n))


def a_optimality_target(
    F: np.ndarray,
    prior: PriorCovariance,
    noise_variance: float,
    weights: np.ndarray | None = None,
) -> float:
    """Weighted posterior-covariance trace; the design objective.

    ``weights`` is the diagonal of the 0/1 selection matrix; None means all
    coefficients count.
    """
    chol, G = _inner_factor(F, prior, noise_variance)
    H = sla.cho_solve(chol, G)
    diag = np.diag(prior.matrix) - np.einsum("ki,ki->i", G, H)
    if weights is None:
        return float(diag.sum())
    return float(diag @ np.asarray(weights, dtype=float))


def a_optimality_gradient(
    F: np.ndarray,
    dblocks: np.ndarray,
    prior: PriorCovariance,
    noise_variance: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of the objective with respect to each activation position.

    ``dblocks`` holds the per-activation derivative blocks, shape (K, M, 2N);
    the stacked derivative of F with respect to p_k vanishes outside row
    block k.
    """
    K, M, n2 = dblocks.shape
    if F.shape != (K * M, n2):
        raise ValueError(f"F shape {F.shape} does not match {K} blocks of {(M, n2)}")
    chol, G = _inner_factor(F, prior, noise_variance)
    H = sla.cho_solve(chol, G)  # (KM, 2N)
    cov = prior.matrix - G.T @ H
    w = np.ones(n2) if weights is None else np.asarray(weights, dtype=float)
    grad = np.empty(K)
    for k in range(K):
        Hk = H[k * M : (k + 1) * M]  # (M, 2N)
        C = dblocks[k] @ cov  # (M, 2N)
        grad[k] = -2.0 * np.einsum("mi,mi,i->", Hk, C, w)
    return grad


def a_optimality_gradient_expanded(
    F: np.ndarray,
    dblocks: np.ndarray,
    prior: PriorCovariance,
    noise_variance: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Literal product-rule form of the gradient (reference implementation).

    Builds d(Gamma_post)/dp_k = -P Fdot^T S^{-1} F P - P F^T S^{-1} Fdot P
    + P F^T S^{-1} (Fdot P F^T + F P Fdot^T) S^{-1} F P term by term; kept
    for validating the reduced form.
    """
    K, M, n2 = dblocks.shape
    P = prior.matrix
    chol, G = _inner_factor(F, prior, noise_variance)
    Sinv_FP = sla.cho_solve(chol, G)
    w = np.ones(n2) if weights is None else np.asarray(weights, dtype=float)
    W = np.diag(w)
    grad = np.empty(K)
    for k in range(K):
        Fdot = np.zeros_like(F)
        Fdot[k * M : (k + 1) * M] = dblocks[k]
        SiFdotP = sla.cho_solve(chol, Fdot @ P)
        term1 = -P @ Fdot.T @ Sinv_FP
        term2 = -Sinv_FP.T @ Fdot @ P
        mid = Fdot @ P @ F.T + F @ P @ Fdot.T
        term3 = Sinv_FP.T @ mid @ Sinv_FP
        dcov = term1 + term2 + term3
        grad[k] = float(np.trace(W @ dcov @ W.T))
    return grad


def posterior_mean(
    F: np.ndarray, prior: PriorCovariance, noise_variance: float, measurements: np.ndarray
) -> np.ndarray:
    """Reconstruction of the coefficient vector from measurements."""
    return posterior(F, prior, noise_variance, measurements=measurements).mean
