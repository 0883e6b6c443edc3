"""The four base clustering algorithms of the ensemble: k-means with random
or given-centroid initialization, principal-direction divisive partitioning
(PDDP), the PDDP-seeded k-means hybrid, and EM for diagonal Gaussian
mixtures. All accept either a DataMatrix or a plain d x n array of column
observations and return a :class:`Clustering`.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import ConfigError, DataError, NumericalError

__all__ = ["Clustering", "ClusterSource", "kmeans", "pddp",
           "pddp_seeded_kmeans", "emgm"]

METRICS = ("euclidean", "spherical")

LLOYD_MAX_ITER = 300
EM_MAX_ITER = 200
EM_TOL = 1e-6


@dataclass(frozen=True)
class ClusterSource:
    """Where a clustering came from: algorithm, data representation, rank,
    the requested cluster count, and the seed (None for deterministic
    algorithms)."""

    algorithm: str
    representation: str = "raw"
    rank: int | None = None
    k_requested: int = 0
    seed: int | None = None


@dataclass(frozen=True)
class Clustering:
    """A hard assignment of n observations to k clusters, ids 0..k-1."""

    assignment: np.ndarray
    k: int
    source: ClusterSource

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        if a.size == 0:
            raise DataError("empty clustering")
        if self.k < 1 or a.min() < 0 or a.max() >= self.k:
            raise DataError(f"cluster ids must lie in [0, {self.k})")
        if np.unique(a).size != self.k:
            raise DataError("cluster ids must be contiguous from 0")

    @property
    def n(self):
        return self.assignment.size


def _columns(X):
    """The observations as a dense d x n float array."""
    if hasattr(X, "dense"):
        return X.dense()
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    return A


def _contiguous(assignment):
    """Relabel so ids are 0..k-1 in sorted order of the original ids."""
    uniq, inv = np.unique(assignment, return_inverse=True)
    return inv.astype(np.int64), uniq.size


def _unit_columns(P, what):
    norms = np.linalg.norm(P, axis=0)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise DataError(f"{what}: spherical metric requires nonzero observations, "
                        f"columns {bad.tolist()[:8]} are zero")
    return P / norms


def _assign(P, C, metric):
    """Nearest-centroid assignment and per-point quality.

    Euclidean returns squared distances to the chosen centroid; spherical
    returns cosines. Ties go to the lowest centroid index.
    """
    if metric == "euclidean":
        d2 = (C * C).sum(axis=0)[:, None] - 2.0 * (C.T @ P) + (P * P).sum(axis=0)[None, :]
        a = np.argmin(d2, axis=0)
        return a, np.maximum(d2[a, np.arange(P.shape[1])], 0.0)
    sims = C.T @ P
    a = np.argmax(sims, axis=0)
    return a, sims[a, np.arange(P.shape[1])]


def _repair_empty(P, C, assign, quality, metric, k):
    """Reseed each empty cluster at the observation farthest from its own
    centroid, moving that observation into the empty cluster."""
    counts = np.bincount(assign, minlength=k)
    for empty in np.nonzero(counts == 0)[0]:
        movable = counts[assign] >= 2
        if not movable.any():
            continue
        if metric == "euclidean":
            cand = np.where(movable, quality, -np.inf)
            worst = int(np.argmax(cand))
        else:
            cand = np.where(movable, quality, np.inf)
            worst = int(np.argmin(cand))
        counts[assign[worst]] -= 1
        counts[empty] += 1
        assign[worst] = empty
        C[:, empty] = P[:, worst]
        quality[worst] = 0.0 if metric == "euclidean" else 1.0
    return assign, C


def _centroids(P, assign, k, metric, previous):
    d = P.shape[0]
    C = np.zeros((d, k))
    counts = np.bincount(assign, minlength=k).astype(np.float64)
    np.add.at(C.T, assign, P.T)
    nonempty = counts > 0
    C[:, nonempty] /= counts[nonempty]
    C[:, ~nonempty] = previous[:, ~nonempty]
    if metric == "spherical":
        norms = np.linalg.norm(C, axis=0)
        ok = norms > 1e-300
        C[:, ok] /= norms[ok]
        C[:, ~ok] = previous[:, ~ok]
    return C


def _lloyd(P, C, metric, max_iter=LLOYD_MAX_ITER, trace=None):
    """Lloyd iteration until the assignment stabilizes. ``trace``, if a
    list, collects the objective after each assignment step."""
    k = C.shape[1]
    prev = None
    assign = None
    for _ in range(max_iter):
        assign, quality = _assign(P, C, metric)
        assign, C = _repair_empty(P, C, assign, quality, metric, k)
        if trace is not None:
            if metric == "euclidean":
                trace.append(float(quality.sum()))
            else:
                trace.append(float(-quality.sum()))
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        C = _centroids(P, assign, k, metric, C)
    return assign, C


def kmeans(X, k, metric="euclidean", init="random", seed=0, max_iter=LLOYD_MAX_ITER):
    """Lloyd k-means under the euclidean or spherical metric.

    ``init`` is either ``"random"`` (k distinct observations drawn with
    ``seed``) or a d x k array of starting centroids. Empty clusters are
    repaired by reseeding at the observation farthest from its own centroid.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    P = _columns(X)
    n = P.shape[1]
    if k < 1 or k > n:
        raise ConfigError(f"k = {k} out of range [1, {n}]")
    if metric == "spherical":
        P = _unit_columns(P, "kmeans")

    seeded = isinstance(init, str)
    if seeded:
        if init != "random":
            raise ConfigError(f"unknown init {init!r}")
        rng = np.random.default_rng(seed)
        idx = rng.choice(n, size=k, replace=False)
        C = P[:, idx].copy()
    else:
        C = np.array(init, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] != P.shape[0]:
            raise ConfigError(f"centroid array must be {P.shape[0]} x k, "
                              f"got {C.shape}")
        k = C.shape[1]
        if k > n:
            raise ConfigError(f"k = {k} out of range [1, {n}]")
        if metric == "spherical":
            norms = np.linalg.norm(C, axis=0)
            ok = norms > 1e-300
            C[:, ok] /= norms[ok]

    assign, _ = _lloyd(P, C, metric, max_iter)
    assign, k_actual = _contiguous(assign)
    src = ClusterSource("kmeans", k_requested=k, seed=seed if seeded else None)
    return Clustering(assign, k_actual, src)


def _principal_direction(C):
    """First left singular vector of a centered block, sign-fixed so its
    largest-magnitude entry is positive."""
    try:
        U, s, _ = scipy.linalg.svd(C, full_matrices=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"principal direction SVD failed: {exc}") from exc
    u = U[:, 0]
    j = int(np.argmax(np.abs(u)))
    return -u if u[j] < 0 else u


def pddp(X, k):
    """Principal-direction divisive partitioning.

    Starting from one leaf holding everything, repeatedly bisect the leaf
    with the largest total scatter along its first principal direction
    (exact-zero projections go to the nonnegative side) until k leaves
    exist. Fully deterministic. If no remaining leaf can split (identical
    points), stops early with fewer clusters.
    """
    P = _columns(X)
    n = P.shape[1]
    if k < 1 or k > n:
        raise ConfigError(f"k = {k} out of range [1, {n}]")

    leaves = [np.arange(n)]
    dead = set()
    while len(leaves) < k:
        best = -1
        best_scatter = 0.0
        for i, leaf in enumerate(leaves):
            if i in dead or leaf.size < 2:
                continue
            block = P[:, leaf]
            centered = block - block.mean(axis=1, keepdims=True)
            scatter = float((centered * centered).sum())
            if scatter > best_scatter:
                best_scatter = scatter
                best = i
        if best < 0:
            break
        leaf = leaves[best]
        block = P[:, leaf]
        centered = block - block.mean(axis=1, keepdims=True)
        u = _principal_direction(centered)
        scores = u @ centered
        pos = scores >= 0.0
        if pos.all() or not pos.any():
            dead.add(best)
            continue
        # nonnegative-side child takes the parent's slot
        leaves[best:best + 1] = [leaf[pos], leaf[~pos]]
        dead = {i if i < best else i + 1 for i in dead}

    assign = np.empty(n, dtype=np.int64)
    for cid, leaf in enumerate(leaves):
        assign[leaf] = cid
    src = ClusterSource("pddp", k_requested=k)
    return Clustering(assign, len(leaves), src)


def pddp_seeded_kmeans(X, k, metric="euclidean"):
    """k-means initialized with the centroids of a PDDP run. Deterministic:
    no randomness is consumed anywhere."""
    P = _columns(X)
    base = pddp(P, k)
    C = np.zeros((P.shape[0], base.k))
    for cid in range(base.k):
        C[:, cid] = P[:, base.assignment == cid].mean(axis=1)
    refined = kmeans(P, base.k, metric=metric, init=C)
    src = ClusterSource("pddp-kmeans", k_requested=k)
    return Clustering(refined.assignment, refined.k, src)


def _em_fit(Y, k, means, tol=EM_TOL, max_iter=EM_MAX_ITER):
    """EM for a diagonal-covariance Gaussian mixture.

    Returns (responsibilities, log-likelihood history). Variances are
    floored relative to the per-feature data variance so collapsing
    components cannot produce singular densities.
    """
    n, d = Y.shape
    feat_var = Y.var(axis=0)
    floor = 1e-8 * (feat_var + 1e-12)
    variances = np.tile(np.maximum(feat_var, floor), (k, 1))
    weights = np.full(k, 1.0 / k)

    history = []
    log_resp = None
    for _ in range(max_iter):
        # E step in log space
        log_prob = np.empty((n, k))
        for c in range(k):
            diff2 = (Y - means[c]) ** 2
            log_prob[:, c] = (np.log(weights[c])
                              - 0.5 * np.sum(np.log(2.0 * np.pi * variances[c]))
                              - 0.5 * np.sum(diff2 / variances[c], axis=1))
        norm = logsumexp(log_prob, axis=1)
        history.append(float(norm.sum()))
        log_resp = log_prob - norm[:, None]
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            break
        # M step
        resp = np.exp(log_resp)
        mass = resp.sum(axis=0) + 1e-300
        weights = mass / n
        means = (resp.T @ Y) / mass[:, None]
        for c in range(k):
            diff2 = (Y - means[c]) ** 2
            variances[c] = np.maximum((resp[:, c] @ diff2) / mass[c], floor)
    return np.exp(log_resp), history


def emgm(X, k, seed=0):
    """Gaussian-mixture clustering by EM with diagonal covariances.

    Means start from a seeded k-means run, covariances from the per-feature
    variance, weights uniform; the final hard assignment takes the maximum
    responsibility."""
    P = _columns(X)
    n = P.shape[1]
    if k < 1 or k > n:
        raise ConfigError(f"k = {k} out of range [1, {n}]")
    warm = kmeans(P, k, metric="euclidean", init="random", seed=seed)
    Y = P.T
    means = np.zeros((warm.k, P.shape[0]))
    for c in range(warm.k):
        means[c] = Y[warm.assignment == c].mean(axis=0)
    resp, _ = _em_fit(Y, warm.k, means)
    assign, k_actual = _contiguous(np.argmax(resp, axis=1))
    src = ClusterSource("emgm", k_requested=k, seed=seed)
    return Clustering(assign, k_actual, src)


def with_source(clustering, **fields):
    """A copy of ``clustering`` with source descriptor fields replaced."""
    return Clustering(clustering.assignment, clustering.k,
                      replace(clustering.source, **fields))
