"""Normalized Laplacian and its leading eigenvectors (the spectral embedding)."""

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .errors import InputValidationError, ParameterError, ShapeError
from .hsic import double_center
from .kernel import degree_matrix, gaussian_kernel, normalize_kernel

# above this size a few Lanczos iterations beat the dense solver by 10x or more
LANCZOS_MIN_N = 1000


def laplacian(K, d):
    """H D^{-1/2} K D^{-1/2} H, symmetrised so L == L.T bit for bit."""
    L = double_center(normalize_kernel(K, d))
    return 0.5 * (L + L.T)


def fix_signs(U):
    """Flip columns so each one's largest-magnitude entry (first on ties) is positive."""
    U = np.array(U, dtype=np.float64, copy=True)
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def top_eigenpairs(M, c):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"matrix must be square, got {M.shape}")
    n = M.shape[0]
    c = int(c)
    if not 1 <= c <= n:
        raise ParameterError(f"need 1 <= c <= N, got c={c}, N={n}")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-8:
        raise InputValidationError("matrix is not symmetric within 1e-8")
    w, V = None, None
    if n >= LANCZOS_MIN_N and 4 * c < n:
        w, V = _lanczos(M, c)
    if w is None:
        w, V = scipy.linalg.eigh(M, subset_by_index=[n - c, n - 1])
    order = np.argsort(-w, kind="stable")
    return w[order], fix_signs(V[:, order])


def _lanczos(M, c):
    """Largest-algebraic eigenpairs by ARPACK; (None, None) if not trustworthy."""
    v0 = np.random.default_rng(0).standard_normal(M.shape[0])
    try:
        w, V = eigsh(M, k=c, which="LA", tol=1e-12, v0=v0)
    except (ArpackNoConvergence, ArpackError):
        return None, None
    scale = max(np.max(np.abs(w)), 1.0)
    if np.max(np.abs(M @ V - V * w)) > 1e-8 * scale:
        return None, None
    return w, V


def top_eigenvectors(M, c):
    """Orthonormal eigenvectors of the ``c`` largest eigenvalues, descending."""
    return top_eigenpairs(M, c)[1]


def spectral_embedding(X, sigma, c):
    K = gaussian_kernel(X, sigma)
    return top_eigenvectors(laplacian(K, degree_matrix(K)), c)
