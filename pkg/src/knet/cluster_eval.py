"""k-means (k-means++ seeding, Lloyd iterations) and normalized mutual information."""

import numpy as np

from .errors import ParameterError, ShapeError


def _sq_dists(Z, centers):
    diff = Z[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assign_nearest(centers, Z):
    """Index of the closest center per row; ties go to the lowest index."""
    centers = np.asarray(centers, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or centers.ndim != 2 or Z.shape[1] != centers.shape[1]:
        raise ShapeError(f"points {Z.shape} and centers {centers.shape} disagree")
    return np.argmin(_sq_dists(Z, centers), axis=1)


def inertia(Z, labels, centers):
    return float(np.sum((Z - centers[labels]) ** 2))


def kmeans_pp_init(Z, c, rng):
    n = Z.shape[0]
    centers = np.empty((c, Z.shape[1]))
    centers[0] = Z[rng.integers(n)]
    d2 = np.sum((Z - centers[0]) ** 2, axis=1)
    for k in range(1, c):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[k] = Z[idx]
        d2 = np.minimum(d2, np.sum((Z - centers[k]) ** 2, axis=1))
    return centers


def lloyd(Z, centers, max_iter=300, trace=None):
    """Lloyd iterations from ``centers`` until the assignment stops changing."""
    c = centers.shape[0]
    centers = centers.copy()
    labels = assign_nearest(centers, Z)
    for _ in range(max_iter):
        for k in range(c):
            members = labels == k
            if members.any():
                centers[k] = Z[members].mean(axis=0)
            else:
                # re-seed on the point farthest from its current center
                far = np.argmax(np.sum((Z - centers[labels]) ** 2, axis=1))
                centers[k] = Z[far]
                labels[far] = k
        if trace is not None:
            trace.append(inertia(Z, labels, centers))
        new = assign_nearest(centers, Z)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, centers


def kmeans(Z, c, restarts=10, seed=0, max_iter=300):
    """Best-inertia k-means over ``restarts`` seeded k-means++ runs.

    Returns ``(labels, centers)``.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ShapeError(f"points must be 2-D, got {Z.shape}")
    c = int(c)
    if c < 1 or Z.shape[0] < c:
        raise ParameterError(f"need 1 <= c <= N, got c={c}, N={Z.shape[0]}")
    best = None
    for child in np.random.default_rng(seed).spawn(max(1, int(restarts))):
        labels, centers = lloyd(Z, kmeans_pp_init(Z, c, child), max_iter)
        score = inertia(Z, labels, centers)
        if best is None or score < best[0]:
            best = (score, labels, centers)
    return best[1], best[2]


def _entropy(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def nmi(a, b):
    """I(A, B) / sqrt(H(A) H(B)) with natural logs.

    When either partition has zero entropy the ratio is undefined; it is
    taken as 1 if the two partitions coincide up to relabeling and 0 otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"label vectors must have equal length, got {a.shape} and {b.shape}")
    n = a.size
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    joint = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(joint, (ia, ib), 1.0)
    joint /= n
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)
    ha, hb = _entropy(pa), _entropy(pb)
    if ha == 0.0 or hb == 0.0:
        return 1.0 if joint.shape == (1, 1) else 0.0
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])))
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))
