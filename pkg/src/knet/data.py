"""Synthetic generators, CSV I/O, standardization, PCA and subsampling."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataFormatError, ParameterError, PreprocessingError
from .spectral import top_eigenpairs


@dataclass
class LabeledDataset:
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "data"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.X.shape[0],):
                raise ParameterError("label vector length must equal the number of rows")

    @property
    def n_clusters(self):
        return None if self.labels is None else int(np.unique(self.labels).size)

    def take(self, idx, name=None):
        labels = None if self.labels is None else self.labels[idx]
        return LabeledDataset(self.X[idx], labels, name or self.name)


def _split_counts(n, k):
    base, extra = divmod(n, k)
    return [base + (i < extra) for i in range(k)]


def gen_moons(n=1000, noise_std=0.05, seed=0):
    """Two interleaving unit half-circles, ``n // 2`` points each (odd n: first moon gets one more)."""
    if n < 4:
        raise ParameterError("moons need n >= 4")
    rng = np.random.default_rng(seed)
    n_out, n_in = _split_counts(n, 2)
    t_out = np.linspace(0.0, math.pi, n_out)
    t_in = np.linspace(0.0, math.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    X = np.vstack([outer, inner])
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, size=X.shape)
    labels = np.repeat([0, 1], [n_out, n_in])
    return LabeledDataset(X, labels, "moons")


def _spiral_arc_length(t, omega):
    # length of r = t, angle = omega t from 0 to t
    return 0.5 * (t * np.sqrt(1.0 + (omega * t) ** 2) + np.arcsinh(omega * t) / omega)


def gen_spirals(n=3000, arms=3, noise_std=0.03, seed=0, turns=0.75, r_min=0.2):
    """``arms`` Archimedean arms r = t, angle = 2 pi turns t + 2 pi k / arms, t in [r_min, 1].

    Points are evenly spaced in arc length, so the outer ends of the arms are
    as dense as the inner parts.
    """
    if arms < 1 or n < 3 * arms:
        raise ParameterError("spirals need n >= 3 * arms")
    if not 0.0 <= r_min < 1.0 or turns <= 0:
        raise ParameterError("need 0 <= r_min < 1 and turns > 0")
    rng = np.random.default_rng(seed)
    omega = 2.0 * math.pi * turns
    grid = np.linspace(r_min, 1.0, 4097)
    arc = _spiral_arc_length(grid, omega)
    parts, labels = [], []
    for k, m in enumerate(_split_counts(n, arms)):
        t = np.interp(np.linspace(arc[0], arc[-1], m), arc, grid)
        angle = omega * t + 2.0 * math.pi * k / arms
        parts.append(np.column_stack([t * np.cos(angle), t * np.sin(angle)]))
        labels.append(np.full(m, k))
    X = np.vstack(parts)
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, size=X.shape)
    return LabeledDataset(X, np.concatenate(labels), "spirals")


def gen_blobs(n=100, centers=((-5.0, 0.0), (5.0, 0.0)), std=0.5, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    counts = _split_counts(n, len(centers))
    X = np.vstack([c + rng.normal(0.0, std, size=(m, centers.shape[1]))
                   for c, m in zip(centers, counts)])
    return LabeledDataset(X, np.repeat(np.arange(len(centers)), counts), "blobs")


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def inverse(self, Xs):
        return np.asarray(Xs, dtype=np.float64) * self.std + self.mean


def standardize(X, names=None):
    """Zero-mean, unit population std per feature."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    bad = np.flatnonzero(std == 0)
    if bad.size:
        label = names[bad[0]] if names is not None else f"#{bad[0]}"
        raise PreprocessingError(f"feature {label} has zero variance")
    st = Standardizer(mean, std)
    return st.transform(X), st


@dataclass
class PCABasis:
    mean: np.ndarray
    components: np.ndarray  # d x k, orthonormal columns
    variances: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components

    def inverse(self, Z):
        return np.asarray(Z, dtype=np.float64) @ self.components.T + self.mean


def pca_reduce(X, d_target):
    """Project centered ``X`` onto the leading eigenvectors of its sample covariance."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if not 1 <= d_target <= d:
        raise ParameterError(f"d_target must be in [1, {d}], got {d_target}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    w, V = top_eigenpairs(0.5 * (cov + cov.T), d_target)
    basis = PCABasis(mean, V, w)
    return basis.transform(X), basis


def load_csv(path, label_column=None, name=None):
    """Read a headered CSV; every column except ``label_column`` must be numeric.

    Label values become integer ids in order of first appearance. Row numbers
    in errors count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if label_column is not None and label_column not in header:
        raise DataFormatError(f"{path}: no column named {label_column!r}", column=label_column)
    label_idx = header.index(label_column) if label_column is not None else None
    feat_idx = [i for i in range(len(header)) if i != label_idx]
    feats, raw_labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {r} has {len(row)} fields, expected {len(header)}", row=r)
        vals = []
        for i in feat_idx:
            try:
                vals.append(float(row[i]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric value {row[i]!r} at row {r}, column {header[i]!r}",
                    row=r, column=header[i]) from None
        feats.append(vals)
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())
    X = np.asarray(feats, dtype=np.float64).reshape(len(feats), len(feat_idx))
    labels = None
    if label_idx is not None:
        ids = {}
        labels = np.array([ids.setdefault(v, len(ids)) for v in raw_labels], dtype=np.int64)
    return LabeledDataset(X, labels, name or path.stem)


def write_csv(path, ds):
    """Write ``ds`` with shortest round-trip floats (``repr``) and an optional label column."""
    path = Path(path)
    d = ds.X.shape[1]
    header = ["x", "y"] if d == 2 else [f"x{i}" for i in range(d)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + (["label"] if ds.labels is not None else []))
        for i, row in enumerate(ds.X):
            out = [repr(float(v)) for v in row]
            if ds.labels is not None:
                out.append(str(int(ds.labels[i])))
            w.writerow(out)


def subsample(ds, fraction, seed=0, n_clusters=None):
    """Uniform split without replacement into (subset, holdout)."""
    if not 0.0 < fraction <= 1.0:
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction}")
    n = ds.X.shape[0]
    m = math.ceil(fraction * n)
    c = n_clusters or ds.n_clusters or 1
    if m < 2 * c:
        raise ParameterError(f"subset of {m} rows is too small for {c} clusters")
    perm = np.random.default_rng(seed).permutation(n)
    keep, rest = np.sort(perm[:m]), np.sort(perm[m:])
    return ds.take(keep, f"{ds.name}-subset"), ds.take(rest, f"{ds.name}-holdout")
