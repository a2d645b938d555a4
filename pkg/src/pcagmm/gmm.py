"""Full-dimensional Gaussian mixture models fitted by EM.

This is both the baseline method of the benchmark tables and the numerical
foundation reused by the reduced model: log-domain densities, responsibility
computation and weighted-moment updates.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import DegenerateDensity, EmptyComponent, InvalidShape
from .linalg import cholesky_spd, regularize_spd

_LOG_2PI = np.log(2.0 * np.pi)
_EMPTY_REL = 1e-12  # column mass below _EMPTY_REL * N counts as starved


@dataclass
class GmmParams:
    """Mixture weights plus per-component mean and covariance.

    alpha : (K,) nonnegative, sums to one
    means : (K, n)
    covs  : (K, n, n) symmetric positive definite
    """

    alpha: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def n_components(self):
        return self.alpha.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def validate(self):
        K, n = self.n_components, self.dim
        if self.means.shape != (K, n) or self.covs.shape != (K, n, n):
            raise InvalidShape("inconsistent parameter shapes")
        assert np.all(self.alpha >= 0.0)
        assert abs(self.alpha.sum() - 1.0) <= 1e-12
        for k in range(K):
            cholesky_spd(self.covs[k])
        return self


@dataclass
class EmConfig:
    max_iters: int = 100
    tol: float = 1e-5  # stop when the relative objective decrease drops below


@dataclass
class EmTrace:
    """Objective value before the first update and after every iteration."""

    objective: np.ndarray
    n_reseeds: int = 0
    mean_norms: np.ndarray | None = None


def gauss_logpdf(x, mu, sigma):
    """Log density of a multivariate normal, evaluated through the Cholesky
    factor rather than an explicit inverse."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != mu.shape or sigma.shape != (x.size, x.size):
        raise InvalidShape("inconsistent density argument shapes")
    L = cholesky_spd(sigma)
    z = solve_triangular(L, x - mu, lower=True)
    return float(
        -0.5 * x.size * _LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * z @ z
    )


def _logpdf_rows(X, mu, L):
    """Log densities of the rows of X under N(mu, L L^T)."""
    Z = solve_triangular(L, (X - mu).T, lower=True)
    return (
        -0.5 * X.shape[1] * _LOG_2PI
        - np.sum(np.log(np.diag(L)))
        - 0.5 * np.einsum("ij,ij->j", Z, Z)
    )


def _log_joint(params, X):
    """N x K matrix of log(alpha_k) + log density of x_i under component k."""
    N = X.shape[0]
    K = params.n_components
    out = np.empty((N, K))
    with np.errstate(divide="ignore"):
        log_alpha = np.log(params.alpha)
    for k in range(K):
        L = cholesky_spd(params.covs[k])
        out[:, k] = log_alpha[k] + _logpdf_rows(X, params.means[k], L)
    return out


def _normalize_rows(log_joint):
    norm = logsumexp(log_joint, axis=1)
    if not np.all(np.isfinite(norm)):
        raise DegenerateDensity(
            "some sample has zero density under every component"
        )
    return np.exp(log_joint - norm[:, None]), norm


def gmm_nll(params, X):
    """Negative log-likelihood, accumulated in the log domain."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return 0.0
    _, norm = _normalize_rows(_log_joint(params, X))
    return float(-np.sum(norm))


def gmm_estep(params, X):
    """Row-stochastic responsibilities of each component for each sample."""
    X = np.asarray(X, dtype=float)
    beta, _ = _normalize_rows(_log_joint(params, X))
    return beta


def gmm_mstep(X, beta):
    """Maximum-likelihood update from responsibilities: mixture weights,
    weighted means and mean-centered weighted covariances."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    N, n = X.shape
    cols = beta.sum(axis=0)
    starved = np.flatnonzero(cols < _EMPTY_REL * N)
    if starved.size:
        raise EmptyComponent(starved)
    K = beta.shape[1]
    alpha = cols / N
    means = (beta.T @ X) / cols[:, None]
    covs = np.empty((K, n, n))
    for k in range(K):
        D = X - means[k]
        covs[k] = regularize_spd((D.T * beta[:, k]) @ D / cols[k])
    return GmmParams(alpha=alpha, means=means, covs=covs)


def kmeanspp_indices(X, K, rng):
    """Indices of K seed samples chosen by squared-distance-weighted sampling."""
    N = X.shape[0]
    chosen = [int(rng.integers(N))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(K - 1):
        total = d2.sum()
        if total <= 0.0:
            chosen.append(int(rng.integers(N)))
            continue
        chosen.append(int(rng.choice(N, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((X - X[chosen[-1]]) ** 2, axis=1))
    return np.asarray(chosen)


def _init_params(X, K, rng):
    N, n = X.shape
    seeds = kmeanspp_indices(X, K, rng)
    base_cov = regularize_spd(np.cov(X.T, bias=True).reshape(n, n))
    return GmmParams(
        alpha=np.full(K, 1.0 / K),
        means=X[seeds].copy(),
        covs=np.repeat(base_cov[None], K, axis=0),
    )


def _reseed(params, X, beta, starved, base_cov):
    """Move each starved component onto the worst-explained sample."""
    worst_order = np.argsort(beta.max(axis=1))
    for j, k in enumerate(starved):
        params.means[k] = X[worst_order[j % len(worst_order)]]
        params.covs[k] = base_cov.copy()
        params.alpha[k] = 1.0 / params.n_components
    params.alpha /= params.alpha.sum()


def fit_gmm(X, K, config=None, seed=0):
    """EM fit of a K-component mixture; returns the parameters and the
    objective trace, which is nonincreasing up to floating-point reduction
    order except across reseeds of starved components.

    One density pass per iteration serves both the responsibilities and the
    objective entry; the trace holds the objective of the initial parameters
    and of the parameters after every update.
    """
    X = np.asarray(X, dtype=float)
    config = config or EmConfig()
    N, n = X.shape
    if N < K:
        raise InvalidShape(f"need at least K={K} samples, got {N}")
    rng = np.random.default_rng(seed)
    params = _init_params(X, K, rng)
    base_cov = params.covs[0].copy()

    objective = []
    n_reseeds = 0
    updates = 0
    prev = None
    while True:
        beta, norm = _normalize_rows(_log_joint(params, X))
        nll = float(-np.sum(norm))
        objective.append(nll)
        if prev is not None and prev - nll < config.tol * max(abs(prev), 1.0):
            break
        if updates >= config.max_iters:
            break
        cols = beta.sum(axis=0)
        starved = np.flatnonzero(cols < _EMPTY_REL * N)
        if starved.size:
            _reseed(params, X, beta, starved, base_cov)
            n_reseeds += len(starved)
            beta = gmm_estep(params, X)
        params = gmm_mstep(X, beta)
        updates += 1
        prev = nll
    return params, EmTrace(objective=np.asarray(objective), n_reseeds=n_reseeds)
