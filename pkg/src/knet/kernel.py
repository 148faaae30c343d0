"""Gaussian kernels, degree vectors and the median bandwidth heuristic."""

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegeneracyError, InputValidationError, ParameterError, ShapeError


def as_data(X, name="X"):
    """Return ``X`` as a finite 2-D float64 array or raise."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputValidationError(f"{name} contains non-finite entries")
    return X


def check_sigma(sigma):
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"bandwidth must be positive, got {sigma}")
    return sigma


def sq_distances(X, Y=None):
    """Squared Euclidean distances between rows; exactly symmetric when ``Y`` is None."""
    if Y is None:
        sq = np.einsum("ij,ij->i", X, X)
        D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    else:
        D = (np.einsum("ij,ij->i", X, X)[:, None]
             + np.einsum("ij,ij->i", Y, Y)[None, :] - 2.0 * (X @ Y.T))
    np.maximum(D, 0.0, out=D)
    return D


def gaussian_kernel(X, sigma):
    """K[i, j] = exp(-|x_i - x_j|^2 / (2 sigma^2))."""
    X = as_data(X)
    sigma = check_sigma(sigma)
    return np.exp(-sq_distances(X) / (2.0 * sigma * sigma))


def degree_matrix(K):
    """Row sums of ``K``, returned as the diagonal vector of the degree matrix."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"kernel must be square, got shape {K.shape}")
    d = K.sum(axis=1)
    if np.any(d <= 0):
        raise DegeneracyError("kernel has a non-positive row sum")
    return d


def normalize_kernel(K, d):
    """K[i, j] / sqrt(d_i d_j)."""
    K = np.asarray(K, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if d.ndim == 2:
        d = np.diag(d)
    if K.shape != (d.size, d.size):
        raise ShapeError(f"kernel {K.shape} does not match degree length {d.size}")
    if np.any(d <= 0):
        raise DegeneracyError("degree vector has non-positive entries")
    s = 1.0 / np.sqrt(d)
    return K * s[:, None] * s[None, :]


def median_sigma(X):
    """Median of all pairwise Euclidean distances between the rows of ``X``."""
    X = as_data(X)
    if X.shape[0] < 2:
        raise ParameterError("median bandwidth needs at least two samples")
    sigma = float(np.median(pdist(X)))
    if sigma <= 0:
        raise DegeneracyError("median pairwise distance is zero; points are (mostly) identical")
    return sigma
