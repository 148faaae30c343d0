"""The alternating KNet loop: pretrain, spectral init, then theta-epochs and U updates."""

import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .cluster_eval import assign_nearest, kmeans, nmi
from .errors import DivergenceError, ParameterError
from .hsic import gamma_matrix, hsic
from .kernel import as_data, degree_matrix, gaussian_kernel, median_sigma, normalize_kernel
from .network import Adam, MLPParams, forward, pretrain_identity, reconstruct, sga_epoch
from .spectral import laplacian, spectral_embedding, top_eigenvectors
from .stiefel import StiefelAscent, trace_objective

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class KNetConfig:
    c: int = 2
    sigma_mode: str = "median"  # "median" or "fixed"
    sigma: Optional[float] = None  # used when sigma_mode == "fixed"
    lam: float = 0.0
    u_update: str = "EIG"  # "EIG" or "SMA"
    learning_rate: float = 1e-3
    batch_size: int = 5
    max_outer_iters: int = 200
    convergence_tol: float = 1e-3
    kmeans_restarts: int = 10
    seed: int = 0
    hidden_width: Optional[int] = None  # None: 20 for d <= 2, else d
    depth: int = 3
    pretrain_max_epochs: int = 400
    pretrain_tol: float = 1e-4
    pretrain_residual_tol: float = 0.05
    sma_steps: int = 20
    sma_min_gain: float = 1e-6
    # Bandwidth of the embedded kernel; None takes the median heuristic on the
    # pretrained embedding, which is ~ the median of X since Psi(X) ~ X.
    embedding_sigma: Optional[float] = None
    # U stays at the spectral init until k-means on the embedding reproduces
    # the spectral partition (NMI >= warmup_agreement) on warmup_patience
    # consecutive epochs, or for at most max_warmup_epochs. 0 disables.
    max_warmup_epochs: int = 100
    warmup_agreement: float = 0.99
    warmup_patience: int = 3
    # Columns of U that enter Gamma. Centering removes one of the c cluster
    # directions, so the c-th column is a within-cluster mode; "informative"
    # drops it (c - 1 columns), "all" uses every column of U.
    gamma_columns: str = "informative"

    def __post_init__(self):
        if self.c < 2:
            raise ParameterError("need at least two clusters")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.convergence_tol <= 0 or self.learning_rate <= 0:
            raise ParameterError("tolerances and learning rate must be positive")
        if self.lam < 0:
            raise ParameterError("lambda must be non-negative")
        if self.u_update not in ("EIG", "SMA"):
            raise ParameterError(f"u_update must be EIG or SMA, got {self.u_update!r}")
        if self.sigma_mode not in ("median", "fixed"):
            raise ParameterError(f"sigma_mode must be median or fixed, got {self.sigma_mode!r}")
        if self.sigma_mode == "fixed" and (self.sigma is None or self.sigma <= 0):
            raise ParameterError("fixed sigma_mode needs a positive sigma")
        if self.embedding_sigma is not None and self.embedding_sigma <= 0:
            raise ParameterError("embedding_sigma must be positive")
        if self.max_warmup_epochs < 0 or self.warmup_patience < 1:
            raise ParameterError("warm-up budget must be >= 0 and patience >= 1")
        if self.gamma_columns not in ("informative", "all"):
            raise ParameterError(f"gamma_columns must be informative or all, got {self.gamma_columns!r}")
        if self.max_outer_iters < 1 or self.kmeans_restarts < 1:
            raise ParameterError("max_outer_iters and kmeans_restarts must be >= 1")

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self):
        return asdict(self)

    def width_for(self, d):
        if self.hidden_width is not None:
            return self.hidden_width
        return 20 if d <= 2 else d


@dataclass
class KNetModel:
    theta: MLPParams
    theta_prime: MLPParams
    U: np.ndarray
    sigma: float  # bandwidth of the embedded kernel
    centers: np.ndarray
    labels: np.ndarray
    config: KNetConfig
    history: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    embedding: Optional[np.ndarray] = None
    converged: bool = False
    spectral_sigma: Optional[float] = None
    warmup_epochs: int = 0

    @property
    def outer_iterations(self):
        return len(self.history)

    def to_dict(self):
        return {
            "format": "knet-model",
            "version": FORMAT_VERSION,
            "sigma": self.sigma,
            "spectral_sigma": self.spectral_sigma,
            "c": self.config.c,
            "config": self.config.to_dict(),
            "encoder": self.theta.to_dict(),
            "decoder": self.theta_prime.to_dict(),
            "centers": self.centers.tolist(),
            "converged": self.converged,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != "knet-model" or doc.get("version") != FORMAT_VERSION:
            raise ParameterError("not a knet model document of a supported version")
        centers = np.asarray(doc["centers"], dtype=np.float64)
        return cls(
            theta=MLPParams.from_dict(doc["encoder"]),
            theta_prime=MLPParams.from_dict(doc["decoder"]),
            U=np.zeros((0, doc["c"])),
            sigma=float(doc["sigma"]),
            centers=centers,
            labels=np.zeros(0, dtype=np.int64),
            config=KNetConfig.from_dict(doc["config"]),
            converged=bool(doc.get("converged", False)),
            spectral_sigma=doc.get("spectral_sigma"),
        )

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def converged(U_prev, U_curr, tol):
    return kernel_change(U_prev, U_curr) < tol


def kernel_change(U_prev, U_curr):
    """|U U^T - V V^T|_F / sqrt(c), computed without forming N x N matrices."""
    c = U_curr.shape[1]
    # |P - Q|_F^2 = |P|^2 + |Q|^2 - 2 tr(PQ) with P, Q projectors built from U
    a = np.sum((U_prev.T @ U_prev) ** 2)
    b = np.sum((U_curr.T @ U_curr) ** 2)
    cross = np.sum((U_prev.T @ U_curr) ** 2)
    return float(np.sqrt(max(a + b - 2.0 * cross, 0.0)) / np.sqrt(c))


def _embedded_operator(Z, sigma):
    K = gaussian_kernel(Z, sigma)
    d = degree_matrix(K)
    return K, d, laplacian(K, d)


def informative_columns(U, c):
    """The leading c - 1 columns (at least one) of a centered spectral embedding."""
    return U[:, :max(c - 1, 1)]


def spectral_partition(U, c, restarts=10, seed=0):
    """k-means on the leading c - 1 columns of a centered spectral embedding.

    Centering removes one of the c near-unit cluster directions, so the c-th
    column is a within-cluster mode whose eigenvalue competes with the
    cluster directions on elongated or sparse clusters; leaving it out keeps
    k-means from splitting along it.
    """
    return kmeans(informative_columns(U, c), c, restarts, seed=seed)[0]


def resolve_sigma(X, config):
    return float(config.sigma) if config.sigma_mode == "fixed" else median_sigma(X)


def fit(X, config=None):
    """Train KNet on standardized data ``X`` and cluster its embedding."""
    config = config or KNetConfig()
    X = as_data(X)
    n, d = X.shape
    if n < 2 * config.c:
        raise ParameterError(f"{n} samples are too few for {config.c} clusters")
    if np.max(np.abs(X.mean(axis=0))) > 1e-6:
        warnings.warn("input does not look standardized (feature means are not ~0)", stacklevel=2)

    t0 = time.perf_counter()
    spectral_sigma = resolve_sigma(X, config)
    pre = pretrain_identity(
        X, seed=config.seed, hidden_width=config.width_for(d), depth=config.depth,
        lr=config.learning_rate, batch_size=config.batch_size,
        max_epochs=config.pretrain_max_epochs, tol=config.pretrain_tol,
        residual_tol=config.pretrain_residual_tol)
    theta, theta_prime = pre.theta, pre.theta_prime
    U = spectral_embedding(X, spectral_sigma, config.c)
    Z = forward(theta, X)
    sigma = config.embedding_sigma or median_sigma(Z)
    prep = time.perf_counter() - t0
    log.info("pretrained in %d epochs (residual %.4f), sigma=%.4g, embedding sigma=%.4g",
             len(pre.losses) - 1, pre.residual, spectral_sigma, sigma)

    t1 = time.perf_counter()
    rng = np.random.default_rng([config.seed, 1])
    adam = Adam(lr=config.learning_rate)
    ascent = StiefelAscent(max_steps=config.sma_steps, min_gain=config.sma_min_gain)
    _, deg, _ = _embedded_operator(Z, sigma)
    reference = spectral_partition(U, config.c, restarts=3, seed=config.seed)
    warm, streak = config.max_warmup_epochs > 0, 0
    warmup_epochs = 0
    history = []
    done = False
    for it in range(1, config.max_outer_iters + 1):
        U_gamma = informative_columns(U, config.c) if config.gamma_columns == "informative" else U
        Gamma = gamma_matrix(U_gamma, deg)
        loss = sga_epoch(theta, theta_prime, X, Gamma, sigma, config.lam, adam,
                         config.batch_size, rng)
        Z = forward(theta, X)
        if not np.isfinite(loss) or not np.all(np.isfinite(Z)):
            raise DivergenceError(f"training diverged at outer iteration {it}", it)
        K, deg, L = _embedded_operator(Z, sigma)
        before = trace_objective(L, U)
        if warm:
            warmup_epochs = it
            agree = nmi(reference, kmeans(Z, config.c, restarts=3, seed=config.seed)[0])
            streak = streak + 1 if agree >= config.warmup_agreement else 0
            warm = streak < config.warmup_patience and it < config.max_warmup_epochs
            U_new = U
            change = float("nan")
        else:
            if config.u_update == "EIG":
                U_new = top_eigenvectors(L, config.c)
            else:
                U_new = ascent.run(L, U)
            change = kernel_change(U, U_new)
        recon = float(np.sum((reconstruct(theta, theta_prime, X) - X) ** 2) / n)
        history.append({
            "iteration": it,
            "hsic": hsic(normalize_kernel(K, deg), U_new),
            "recon_error": recon,
            "conv_metric": change,
            "trace_before": before,
            "trace_after": trace_objective(L, U_new),
            "epoch_loss": loss,
        })
        log.debug("iter %d: hsic=%.6g recon=%.4g change=%.3g", it, history[-1]["hsic"], recon, change)
        U = U_new
        if change < config.convergence_tol:
            done = True
            break

    labels, centers = kmeans(Z, config.c, config.kmeans_restarts, seed=config.seed)
    run = time.perf_counter() - t1
    return KNetModel(theta, theta_prime, U, sigma, centers, labels, config, history,
                     {"prep_seconds": prep, "run_seconds": run}, Z, done,
                     spectral_sigma=spectral_sigma, warmup_epochs=warmup_epochs)


def embed(model, Y):
    return forward(model.theta, as_data(Y, "Y"))


def predict(model, Y, mode="nearest_center"):
    Z = embed(model, Y)
    if mode == "nearest_center":
        return assign_nearest(model.centers, Z)
    if mode == "kmeans_refit":
        return kmeans(Z, model.config.c, model.config.kmeans_restarts, seed=model.config.seed)[0]
    raise ParameterError(f"unknown prediction mode {mode!r}")


def learned_kernel(model, Z=None):
    """Normalized Gaussian kernel of the embedding: exp(-|z_i-z_j|^2/2s^2)/sqrt(d_i d_j)."""
    Z = model.embedding if Z is None else Z
    K = gaussian_kernel(Z, model.sigma)
    return normalize_kernel(K, degree_matrix(K))
