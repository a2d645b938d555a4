"""Small dense linear-algebra kernels shared by all modules.

Everything here operates on plain float64 ndarrays and is a pure function,
so any number of workers may call these concurrently.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ConvergenceDomainViolated,
    InvalidShape,
    NotPositiveDefinite,
    RankDeficient,
)

# Relative scale of the one-shot diagonal shift applied to a near-singular
# matrix before Cholesky gives up. The absolute fallback keeps an all-zero
# scatter (identical samples) factorable.
SPD_FLOOR_SCALE = 1e-6
_FLOOR_ABS = 1e-12


def try_cholesky(M):
    """Lower Cholesky factor of ``M``, or None if the factorization fails."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(L)):
        return None
    return L


def _floor_shift(M):
    return SPD_FLOOR_SCALE * max(float(np.trace(M)) / M.shape[0], _FLOOR_ABS)


def cholesky_spd(M):
    """Lower-triangular L with L L^T = M for symmetric positive definite M.

    A failing factorization gets one trace-scaled diagonal shift before the
    matrix is rejected; EM covariances estimated from few samples routinely
    need this.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidShape(f"expected a square matrix, got shape {M.shape}")
    L = try_cholesky(M)
    if L is None:
        L = try_cholesky(M + _floor_shift(M) * np.eye(M.shape[0]))
    if L is None:
        raise NotPositiveDefinite("Cholesky failed even after the diagonal shift")
    return L


def regularize_spd(M):
    """Return a symmetrized copy of M, diagonally shifted if needed so that
    Cholesky succeeds. Raises NotPositiveDefinite if the shift is not enough."""
    M = 0.5 * (np.asarray(M, dtype=float) + np.asarray(M, dtype=float).T)
    if try_cholesky(M) is not None:
        return M
    M = M + _floor_shift(M) * np.eye(M.shape[0])
    if try_cholesky(M) is None:
        raise NotPositiveDefinite("matrix is not positive definite")
    return M


def logdet_spd(M):
    """log det M computed as 2 sum(log diag L) from the Cholesky factor."""
    L = cholesky_spd(M)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def solve_spd(M, B):
    """Solve M X = B for symmetric positive definite M via Cholesky."""
    L = cholesky_spd(M)
    Y = solve_triangular(L, B, lower=True)
    return solve_triangular(L.T, Y, lower=False)


def project_stiefel(A):
    """Orthonormal polar factor of A, the nearest point with orthonormal columns.

    Computed from the thin SVD A = P diag(s) Q^T as P Q^T.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise InvalidShape(f"expected a tall matrix, got shape {A.shape}")
    P, s, Qt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0 or s[-1] < 1e-12 * s[0]:
        raise RankDeficient("matrix does not have full column rank")
    U = P @ Qt
    assert stiefel_defect(U) <= 1e-10
    return U


def schulz_polar(A, tol=1e-14, max_iters=100):
    """Orthonormal polar factor by the quadratic iteration
    X <- X (I + (I - X^T X) / 2), valid only when ||I - A^T A||_F < 1.

    Callers should fall back to project_stiefel when the domain guard fires,
    which is the common case for gradient steps of meaningful length.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise InvalidShape(f"expected a tall matrix, got shape {A.shape}")
    eye = np.eye(A.shape[1])
    if np.linalg.norm(eye - A.T @ A) >= 1.0:
        raise ConvergenceDomainViolated(
            "||I - A^T A||_F >= 1; the iteration would not converge"
        )
    X = A.copy()
    for _ in range(max_iters):
        R = eye - X.T @ X
        if np.linalg.norm(R) <= tol:
            break
        X = X @ (eye + 0.5 * R)
    return X


def random_stiefel(n, d, seed):
    """Deterministic random point with orthonormal columns, shape (n, d)."""
    if d > n or d < 1:
        raise InvalidShape(f"need 1 <= d <= n, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    return project_stiefel(rng.standard_normal((n, d)))


def stiefel_defect(U):
    """Frobenius distance of U^T U from the identity."""
    U = np.asarray(U)
    return float(np.linalg.norm(U.T @ U - np.eye(U.shape[1])))
