"""Empirical HSIC with a linear kernel on the embedding, and its pairwise form.

The centering matrix ``H = I - 11^T / N`` is never materialised; ``center``
subtracts column means instead.
"""

import numpy as np

from .errors import ShapeError
from .kernel import as_data, check_sigma, gaussian_kernel


def center(M):
    M = np.asarray(M, dtype=np.float64)
    return M - M.mean(axis=0, keepdims=True)


def double_center(K):
    """H K H for a square K."""
    K = np.asarray(K, dtype=np.float64)
    return K - K.mean(axis=0, keepdims=True) - K.mean(axis=1, keepdims=True) + K.mean()


def _as_columns(U):
    U = np.asarray(U, dtype=np.float64)
    return U[:, None] if U.ndim == 1 else U


def hsic(K_tilde, U):
    """(1/(N-1)^2) tr(K_tilde H U U^T H)."""
    K_tilde = np.asarray(K_tilde, dtype=np.float64)
    U = _as_columns(U)
    n = K_tilde.shape[0]
    if K_tilde.shape != (n, n) or U.shape[0] != n:
        raise ShapeError(f"kernel {K_tilde.shape} and embedding {U.shape} disagree")
    Uc = center(U)
    return float(np.sum(Uc * (K_tilde @ Uc))) / (n - 1) ** 2


def gamma_matrix(U, d):
    """Pairwise weights D^{-1/2} H U U^T H D^{-1/2}.

    Positive entries attract the two embedded samples, negative ones repel.
    """
    U = _as_columns(U)
    d = np.asarray(d, dtype=np.float64)
    if d.ndim == 2:
        d = np.diag(d)
    if U.shape[0] != d.size:
        raise ShapeError(f"embedding {U.shape} does not match degree length {d.size}")
    V = center(U) / np.sqrt(d)[:, None]
    G = V @ V.T
    return 0.5 * (G + G.T)


def clumping_objective(Z, Gamma, sigma):
    """sum_ij Gamma_ij exp(-|z_i - z_j|^2 / (2 sigma^2))."""
    Z = as_data(Z, "Z")
    Gamma = np.asarray(Gamma, dtype=np.float64)
    n = Z.shape[0]
    if Gamma.shape != (n, n):
        raise ShapeError(f"Gamma {Gamma.shape} does not match {n} embedded rows")
    return float(np.sum(Gamma * gaussian_kernel(Z, check_sigma(sigma))))
