"""Embedding MLP, identity pretraining and analytic gradients of the KNet loss.

Weights are stored as (fan_in, fan_out) so a layer is ``a @ W + b``. Hidden
layers use tanh, the output layer is linear.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, PretrainingError, ShapeError
from .kernel import sq_distances

ACTIVATIONS = ("tanh", "identity")


@dataclass
class MLPParams:
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")

    @classmethod
    def init(cls, widths, rng, activation="tanh"):
        """Scaled-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def arrays(self):
        return [*self.weights, *self.biases]

    def zeros_like(self):
        return MLPParams([np.zeros_like(W) for W in self.weights],
                         [np.zeros_like(b) for b in self.biases], self.activation)

    def copy(self):
        return MLPParams([W.copy() for W in self.weights],
                         [b.copy() for b in self.biases], self.activation)

    def to_dict(self):
        return {
            "widths": self.widths,
            "activation": self.activation,
            "layers": [{"weight": W.tolist(), "bias": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, doc):
        weights = [np.asarray(layer["weight"], dtype=np.float64).reshape(i, o)
                   for layer, i, o in zip(doc["layers"], doc["widths"][:-1], doc["widths"][1:])]
        biases = [np.asarray(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
        return cls(weights, biases, doc.get("activation", "tanh"))


def encoder_widths(d, hidden_width, depth=3):
    return [d] + [hidden_width] * depth + [d]


def _activations(theta, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != theta.widths[0]:
        raise ShapeError(f"input of shape {X.shape} does not match network width {theta.widths[0]}")
    acts = [X]
    last = len(theta.weights) - 1
    for i, (W, b) in enumerate(zip(theta.weights, theta.biases)):
        a = acts[-1] @ W + b
        if i < last and theta.activation == "tanh":
            a = np.tanh(a)
        acts.append(a)
    return acts


def _backward(theta, acts, delta):
    """Parameter gradients and input gradient given dLoss/dOutput."""
    gW = [None] * len(theta.weights)
    gb = [None] * len(theta.weights)
    for i in range(len(theta.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        delta = delta @ theta.weights[i].T
        if i > 0 and theta.activation == "tanh":
            delta = delta * (1.0 - acts[i] ** 2)
    return MLPParams(gW, gb, theta.activation), delta


def forward(theta, X):
    return _activations(theta, X)[-1]


def reconstruct(theta, theta_prime, X):
    Z = forward(theta, X)
    if theta_prime.widths[0] != Z.shape[1]:
        raise ShapeError("decoder input width does not match encoder output width")
    return forward(theta_prime, Z)


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default=None, repr=False)
    v: list = field(default=None, repr=False)

    def state(self):
        copy = None if self.m is None else [a.copy() for a in self.m]
        return self.t, copy, None if self.v is None else [a.copy() for a in self.v]

    def restore(self, state):
        self.t, self.m, self.v = state

    def step(self, params, grads):
        """In-place descent step on the list of arrays ``params``."""
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class Pretrained(NamedTuple):
    theta: MLPParams
    theta_prime: MLPParams
    losses: list
    residual: float


def identity_residual(theta, X):
    """|Psi(X) - X|_F / |X|_F."""
    return float(np.linalg.norm(forward(theta, X) - X) / np.linalg.norm(X))


def pretrain_identity(X, seed=0, hidden_width=20, depth=3, lr=1e-3, batch_size=5,
                      max_epochs=400, tol=1e-4, residual_tol=0.05, max_rejects=5):
    """Fit encoder and decoder so that Psi(X) ~ X and f(X) ~ X.

    Minimises |X - Psi(X)|^2 + |X - f(X)|^2 (per-row mean) with Adam until an
    epoch improves the full-data loss by less than ``tol`` relatively, or
    ``max_epochs`` is reached. An epoch that increases the loss is rolled back
    (parameters and optimizer state) and retried with a fresh shuffle. Stalling (relative
    gain below ``tol``, or ``max_rejects`` rollbacks in a row) only ends
    training once the residual is already within ``residual_tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ParameterError("pretraining needs at least two samples")
    rng = np.random.default_rng(seed)
    theta = MLPParams.init(encoder_widths(d, hidden_width, depth), rng)
    theta_prime = MLPParams.init(encoder_widths(d, hidden_width, depth), rng)
    params = theta.arrays() + theta_prime.arrays()
    adam = Adam(lr=lr)

    def full_loss():
        Z = forward(theta, X)
        R = forward(theta_prime, Z)
        return float((np.sum((Z - X) ** 2) + np.sum((R - X) ** 2)) / n)

    losses = [full_loss()]
    rejects = 0
    for _ in range(max_epochs):
        snapshot = [p.copy() for p in params]
        saved_adam = adam.state()
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            xb = X[order[start:start + batch_size]]
            enc = _activations(theta, xb)
            dec = _activations(theta_prime, enc[-1])
            scale = 2.0 / xb.shape[0]
            g_dec, dz = _backward(theta_prime, dec, scale * (dec[-1] - xb))
            g_enc, _ = _backward(theta, enc, dz + scale * (enc[-1] - xb))
            adam.step(params, g_enc.arrays() + g_dec.arrays())
        loss = full_loss()
        if not np.isfinite(loss):
            raise PretrainingError("pretraining loss became non-finite")
        if loss > losses[-1]:
            for p, saved in zip(params, snapshot):
                p[...] = saved
            adam.restore(saved_adam)
            rejects += 1
            if rejects >= max_rejects and identity_residual(theta, X) <= residual_tol:
                break
            continue
        rejects = 0
        losses.append(loss)
        # a stall only ends training once the identity contract holds
        if (losses[-2] - loss) < tol * losses[-2] and identity_residual(theta, X) <= residual_tol:
            break
    residual = identity_residual(theta, X)
    if residual > residual_tol:
        raise PretrainingError(
            f"identity pretraining residual {residual:.4f} exceeds {residual_tol}", residual)
    return Pretrained(theta, theta_prime, losses, residual)


def loss_and_grad(theta, theta_prime, batch, X, Z_full, Gamma, sigma, lam=0.0):
    """Mini-batch KNet loss (to be minimised) and its exact gradients.

    loss = -(N/|B|) sum_{i in B, j} Gamma_ij k(z_i, z_j)
           + lam (N/|B|) sum_{i in B} |x_i - f(x_i)|^2

    Rows in ``batch`` are re-embedded with the current parameters; all other
    rows come from ``Z_full`` and are held constant.
    Returns ``(loss, grad_theta, grad_theta_prime)``.
    """
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ParameterError("empty mini-batch")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    scale = n / batch.size
    xb = X[batch]
    enc = _activations(theta, xb)
    zb = enc[-1]
    Z = np.array(Z_full, dtype=np.float64, copy=True)
    Z[batch] = zb

    s2 = sigma * sigma
    Kb = np.exp(-sq_distances(zb, Z) / (2.0 * s2))
    Wt = Gamma[batch] * Kb
    loss = -scale * float(Wt.sum())
    # row terms (i in B, all j) and column terms (j in B, i in B)
    Wbb = Wt[:, batch]
    dz = (Wt.sum(axis=1)[:, None] * zb - Wt @ Z
          + Wbb.sum(axis=0)[:, None] * zb - Wbb.T @ zb)
    dz *= scale / s2

    if lam:
        dec = _activations(theta_prime, zb)
        resid = dec[-1] - xb
        loss += lam * scale * float(np.sum(resid ** 2))
        g_dec, dz_rec = _backward(theta_prime, dec, 2.0 * lam * scale * resid)
        dz = dz + dz_rec
    else:
        g_dec = theta_prime.zeros_like()
    g_enc, _ = _backward(theta, enc, dz)
    return loss, g_enc, g_dec


def sga_epoch(theta, theta_prime, X, Gamma, sigma, lam, adam, batch_size=5, rng=None, Z=None):
    """One pass of mini-batch Adam over a random permutation of the rows.

    Parameters are updated in place; the embedding cache is refreshed for the
    rows of each batch after its step. Returns the mean batch loss.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(rng)
    n = X.shape[0]
    Z = forward(theta, X) if Z is None else Z
    params = theta.arrays() + theta_prime.arrays()
    order = rng.permutation(n)
    total = 0.0
    for start in range(0, n, batch_size):
        batch = order[start:start + batch_size]
        loss, g_enc, g_dec = loss_and_grad(theta, theta_prime, batch, X, Z, Gamma, sigma, lam)
        adam.step(params, g_enc.arrays() + g_dec.arrays())
        Z[batch] = forward(theta, X[batch])
        total += loss * batch.size
    return total / n
