"""Gaussian mixtures with a per-component low-dimensional subspace.

Each component models the data as a d-dimensional Gaussian living on an
affine subspace (orthonormal frame U, offset b) plus isotropic residual
noise of scale sigma off the subspace. Such a component is equivalent to a
full-dimensional Gaussian with mean U mu + b and covariance
U Sigma U^T + sigma^2 (I - U U^T); all mixture computations stay in the
reduced dimension and only the lifting below ever forms the n x n form.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDensity, EmptyComponent, InvalidShape
from .gmm import (
    EmConfig,
    EmTrace,
    _EMPTY_REL,
    _logpdf_rows,
    kmeanspp_indices,
)
from .linalg import cholesky_spd, regularize_spd, stiefel_defect
from .palm import MStepProblem, SolverConfig, ipalm_minimize, palm_minimize
from .stats import SufficientStats, accumulate_stats

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class PcaGmmModel:
    """Mixture of subspace Gaussians.

    alpha  : (K,) mixture weights on the simplex
    bases  : (K, n, d) orthonormal frames
    offsets: (K, n) subspace offsets
    means  : (K, d) reduced means
    covs   : (K, d, d) reduced covariances, symmetric positive definite
    sigma  : residual noise scale off the subspace, > 0
    """

    alpha: np.ndarray
    bases: np.ndarray
    offsets: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    sigma: float

    @property
    def n_components(self):
        return self.alpha.shape[0]

    @property
    def dim(self):
        return self.bases.shape[1]

    @property
    def reduced_dim(self):
        return self.bases.shape[2]

    def validate(self):
        K, n, d = self.n_components, self.dim, self.reduced_dim
        if (
            self.bases.shape != (K, n, d)
            or self.offsets.shape != (K, n)
            or self.means.shape != (K, d)
            or self.covs.shape != (K, d, d)
        ):
            raise InvalidShape("inconsistent parameter shapes")
        assert d <= n and self.sigma > 0.0
        assert np.all(self.alpha >= 0.0)
        assert abs(self.alpha.sum() - 1.0) <= 1e-12
        for k in range(K):
            assert stiefel_defect(self.bases[k]) <= 1e-10
            cholesky_spd(self.covs[k])
        return self


@dataclass(frozen=True)
class LiftedGaussian:
    """Full-dimensional equivalent of one subspace component."""

    mean: np.ndarray
    cov: np.ndarray


def lift_component(basis, offset, mean, cov, sigma):
    """Full-dimensional mean and covariance of a subspace component.

    Uses the explicit form U Sigma U^T + sigma^2 (I - U U^T), which costs
    O(n^2 d) and never inverts an n x n matrix.
    """
    basis = np.asarray(basis, dtype=float)
    n = basis.shape[0]
    lifted_cov = basis @ np.asarray(cov, dtype=float) @ basis.T
    lifted_cov += sigma**2 * (np.eye(n) - basis @ basis.T)
    return LiftedGaussian(
        mean=basis @ np.asarray(mean, dtype=float) + offset,
        cov=0.5 * (lifted_cov + lifted_cov.T),
    )


def _log_joint(model, X):
    """N x K matrix of per-component log scores.

    Works entirely with reduced densities plus the off-subspace residual
    energy, computed as ||y||^2 - ||U^T y||^2.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    K = model.n_components
    inv_two_sig2 = 0.5 / model.sigma**2
    out = np.empty((N, K))
    with np.errstate(divide="ignore"):
        log_alpha = np.log(model.alpha)
    for k in range(K):
        Y = X - model.offsets[k]
        P = Y @ model.bases[k]
        residual = np.einsum("ij,ij->i", Y, Y) - np.einsum("ij,ij->i", P, P)
        L = cholesky_spd(model.covs[k])
        out[:, k] = (
            log_alpha[k]
            + _logpdf_rows(P, model.means[k], L)
            - inv_two_sig2 * residual
        )
    return out


def pcagmm_objective(model, X):
    """Negative log of the mixture of reduced densities times the residual
    factor, summed over samples; evaluated in the log domain."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return 0.0
    norm = logsumexp(_log_joint(model, X), axis=1)
    if not np.all(np.isfinite(norm)):
        raise DegenerateDensity("some sample has zero density under every component")
    return float(-np.sum(norm))


def pcagmm_estep(model, X):
    """Row-stochastic responsibilities, computed in the log domain."""
    X = np.asarray(X, dtype=float)
    lj = _log_joint(model, X)
    norm = logsumexp(lj, axis=1)
    if not np.all(np.isfinite(norm)):
        raise DegenerateDensity("some sample has zero density under every component")
    return np.exp(lj - norm[:, None])


def recover_component(stats, basis, offset, weight_floor=1e-12):
    """Reduced mean and covariance implied by the optimized frame and offset.

    The covariance is the offset-centered second moment projected into the
    subspace; it is intentionally not re-centered at the recovered mean, so
    the pair (mean, cov) matches the objective the solver minimized. The
    norm of the returned mean measures how far the offset optimization is
    from absorbing the subspace component of the data mean.
    """
    if stats.weight < weight_floor:
        raise EmptyComponent()
    w = stats.weight
    resid = stats.sum_x - w * offset
    scatter = (
        stats.sum_outer
        - np.outer(stats.sum_x, offset)
        - np.outer(offset, stats.sum_x)
        + w * np.outer(offset, offset)
    )
    mean = basis.T @ resid / w
    cov = regularize_spd(basis.T @ scatter @ basis / w)
    return mean, cov


def _init_model(X, K, d, sigma, rng):
    """Per-cluster PCA initialization: offset at the cluster mean, frame from
    the top eigenvectors of the cluster scatter, zero reduced mean."""
    N, n = X.shape
    seeds = kmeanspp_indices(X, K, rng)
    d2 = ((X[:, None, :] - X[seeds][None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)

    bases = np.empty((K, n, d))
    offsets = np.empty((K, n))
    covs = np.empty((K, d, d))
    for k in range(K):
        pts = X[labels == k]
        if pts.shape[0] < 2:
            pts = X
        center = pts.mean(axis=0)
        Y = pts - center
        cov_full = Y.T @ Y / pts.shape[0]
        evals, evecs = np.linalg.eigh(cov_full)
        top = evals[::-1][:d]
        floor = 1e-6 * max(top[0], 0.0) + 1e-12
        bases[k] = evecs[:, ::-1][:, :d]
        offsets[k] = center
        covs[k] = np.diag(np.maximum(top, floor))
    return PcaGmmModel(
        alpha=np.full(K, 1.0 / K),
        bases=bases,
        offsets=offsets,
        means=np.zeros((K, d)),
        covs=covs,
        sigma=float(sigma),
    )


def _floored_stats(stats):
    """Add an isotropic jitter of 1e-10 times the mean diagonal to the second
    moment. Clusters of near-constant patches have numerically rank-deficient
    scatter, on which the frame objective is unbounded below; the jitter keeps
    every projected scatter factorable without visibly moving the optimum."""
    n = stats.sum_x.size
    eps = 1e-10 * (float(np.trace(stats.sum_outer)) / n + 1e-12)
    return SufficientStats(
        weight=stats.weight,
        sum_x=stats.sum_x,
        sum_outer=stats.sum_outer + eps * np.eye(n),
    )


def _reseed(model, X, beta, starved, rng):
    worst_order = np.argsort(beta.max(axis=1))
    d = model.reduced_dim
    for j, k in enumerate(starved):
        x = X[worst_order[j % len(worst_order)]]
        model.offsets[k] = x
        model.means[k] = np.zeros(d)
        model.covs[k] = np.eye(d) * max(1e-6, model.sigma**2)
        model.alpha[k] = 1.0 / model.n_components
    model.alpha /= model.alpha.sum()


def fit_pcagmm(X, K, d, sigma, em_config=None, solver_config=None, seed=0):
    """EM fit of the subspace mixture.

    Every iteration runs the responsibility update, accumulates per-component
    moments, minimizes each component's frame/offset objective warm-started
    at the previous iterate, and recovers the reduced mean and covariance.
    Returns the model and a trace holding the objective after every iteration
    plus the per-component reduced-mean norms (the gauge diagnostic).
    """
    X = np.asarray(X, dtype=float)
    em_config = em_config or EmConfig()
    solver_config = solver_config or SolverConfig()
    N, n = X.shape
    if N < K:
        raise InvalidShape(f"need at least K={K} samples, got {N}")
    if not 1 <= d <= n:
        raise InvalidShape(f"need 1 <= d <= n, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    model = _init_model(X, K, d, sigma, rng)
    minimize = (
        palm_minimize if solver_config.extrapolation == "none" else ipalm_minimize
    )

    objective = []
    mean_norms = []
    n_reseeds = 0
    updates = 0
    prev = None
    while True:
        lj = _log_joint(model, X)
        norm = logsumexp(lj, axis=1)
        if not np.all(np.isfinite(norm)):
            raise DegenerateDensity(
                "some sample has zero density under every component"
            )
        objective.append(float(-np.sum(norm)))
        mean_norms.append(np.linalg.norm(model.means, axis=1))
        if prev is not None and prev - objective[-1] < em_config.tol * max(
            abs(prev), 1.0
        ):
            break
        if updates >= em_config.max_iters:
            break
        prev = objective[-1]
        beta = np.exp(lj - norm[:, None])
        cols = beta.sum(axis=0)
        starved = np.flatnonzero(cols < _EMPTY_REL * N)
        if starved.size:
            _reseed(model, X, beta, starved, rng)
            n_reseeds += len(starved)
            beta = pcagmm_estep(model, X)
            cols = beta.sum(axis=0)
        model.alpha = cols / N
        for k in range(model.n_components):
            stats = _floored_stats(accumulate_stats(X, beta, k))
            problem = MStepProblem(stats=stats, sigma=model.sigma, n=n, d=d)
            U, b, _ = minimize(
                problem, model.bases[k], model.offsets[k], solver_config
            )
            model.bases[k] = U
            model.offsets[k] = b
            model.means[k], model.covs[k] = recover_component(stats, U, b)
        updates += 1
    return model, EmTrace(
        objective=np.asarray(objective),
        n_reseeds=n_reseeds,
        mean_norms=np.asarray(mean_norms),
    )
