"""Ascent on the Stiefel manifold {U : U^T U = I} with Cayley-type updates.

The update matrix follows the form A(U) = -(G U^T + U G^T) with G the
Euclidean gradient. That A is symmetric rather than skew, so the Cayley map
built from it is not orthogonal; every step is therefore checked and, when
the columns drift from orthonormality, re-orthonormalised with a thin QR.
To first order the combined step moves along the projected gradient
G - U U^T G, so the line search below always finds an ascent step away from
stationary points.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ShapeError, StepFailureError

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
MAX_HALVINGS = 30


@dataclass
class AscentState:
    U: np.ndarray
    tau: float
    objective: float
    accepted: bool = True
    halvings: int = 0
    recovered: bool = False


def _check(L, U):
    L = np.asarray(L, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or U.ndim != 2 or U.shape[0] != L.shape[0]:
        raise ShapeError(f"L {L.shape} and U {U.shape} disagree")
    return L, U


def trace_objective(L, U):
    """tr(U^T L U)."""
    L, U = _check(L, U)
    return float(np.sum(U * (L @ U)))


def gradient_U(L, U):
    L, U = _check(L, U)
    return 2.0 * (L @ U)


def skew_A(G, U):
    G = np.asarray(G, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if G.shape != U.shape:
        raise ShapeError(f"gradient {G.shape} and U {U.shape} disagree")
    return -(G @ U.T + U @ G.T)


def _solve(M, B):
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            X = scipy.linalg.solve(M, B)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise StepFailureError(f"Cayley system is singular: {exc}") from exc
    if not np.all(np.isfinite(X)):
        raise StepFailureError("Cayley step produced non-finite entries")
    return X


def cayley_step(U, A, tau):
    """(I + tau/2 A)^{-1} (I - tau/2 A) U, solving the full N x N system."""
    U = np.asarray(U, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    n = U.shape[0]
    if A.shape != (n, n):
        raise ShapeError(f"A {A.shape} does not match U {U.shape}")
    h = 0.5 * tau
    return _solve(np.eye(n) + h * A, U - h * (A @ U))


def cayley_step_smw(U, G, tau):
    """Same update as ``cayley_step(U, skew_A(G, U), tau)`` via a 2c x 2c solve.

    A = W V^T with W = -[G, U] and V = [U, G], so the inverse follows from
    Sherman-Morrison-Woodbury without forming any N x N matrix.
    """
    U = np.asarray(U, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if G.shape != U.shape:
        raise ShapeError(f"gradient {G.shape} and U {U.shape} disagree")
    h = 0.5 * tau
    W = -np.hstack([G, U])
    V = np.hstack([U, G])
    B = U - h * (W @ (V.T @ U))
    core = np.eye(W.shape[1]) + h * (V.T @ W)
    return B - h * (W @ _solve(core, V.T @ B))


def orthonormality_error(U):
    U = np.asarray(U, dtype=np.float64)
    return float(np.max(np.abs(U.T @ U - np.eye(U.shape[1]))))


def reorthonormalize(U):
    Q, R = np.linalg.qr(U)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def line_search_ascend(L, U, tau0=0.5):
    """One Cayley step whose length is halved until tr(U^T L U) increases.

    Returns the input ``U`` with ``accepted=False`` when no improving step is
    found within ``MAX_HALVINGS`` halvings (a stationary point).
    """
    L, U = _check(L, U)
    f0 = trace_objective(L, U)
    G = gradient_U(L, U)
    direction = G - U @ (U.T @ G)
    if np.linalg.norm(direction) <= 1e-12 * (1.0 + np.linalg.norm(G)):
        return AscentState(U, tau0, f0, accepted=False)
    tau = float(tau0)
    for k in range(MAX_HALVINGS + 1):
        try:
            U_new = cayley_step_smw(U, G, tau)
        except StepFailureError:
            tau *= 0.5
            continue
        recovered = orthonormality_error(U_new) > ORTHO_TOL
        if recovered:
            log.debug("re-orthonormalising Cayley step (tau=%g)", tau)
            U_new = reorthonormalize(U_new)
        f1 = trace_objective(L, U_new)
        if np.isfinite(f1) and f1 > f0:
            return AscentState(U_new, tau, f1, accepted=True, halvings=k, recovered=recovered)
        tau *= 0.5
    return AscentState(U, float(tau0), f0, accepted=False, halvings=MAX_HALVINGS)


@dataclass
class StiefelAscent:
    """Repeated line-searched steps with a step length carried across calls.

    tau starts at 0.5, is halved by the line search on failure and doubled
    (capped at ``tau_max``) after two consecutive first-try acceptances.
    """

    tau: float = 0.5
    tau_max: float = 1.0
    max_steps: int = 20
    min_gain: float = 1e-6
    streak: int = 0
    recoveries: int = 0
    trace: list = field(default_factory=list)

    def run(self, L, U):
        self.trace = [trace_objective(L, U)]
        for _ in range(self.max_steps):
            state = line_search_ascend(L, U, self.tau)
            if not state.accepted:
                break
            self.recoveries += int(state.recovered)
            gain = state.objective - self.trace[-1]
            U = state.U
            self.trace.append(state.objective)
            if state.halvings == 0:
                self.streak += 1
                if self.streak >= 2:
                    self.tau = min(2.0 * self.tau, self.tau_max)
                    self.streak = 0
            else:
                self.streak = 0
                self.tau = state.tau
            if gain < self.min_gain:
                break
        return U
