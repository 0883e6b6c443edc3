"""Dimension reductions: PCA scores, truncated SVD, and a sparse-friendly
nonnegative factorization via alternating constrained least squares (ACLS).

Each reduction maps the m x n data to an r x n matrix whose columns are the
reduced observations, which is what the clustering algorithms consume.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DataError, NumericalError

__all__ = ["RankTriple", "ReducedData", "NmfFactors", "select_ranks", "pca",
           "svd_truncated", "nmf_acls"]

VARIANCE_TARGETS = (0.60, 0.75, 0.90)
FRACTION_TARGETS = (0.01, 0.05, 0.10)
DENSE_SVD_CAP = 2000


@dataclass(frozen=True)
class RankTriple:
    """Three strictly increasing reduction ranks."""

    r1: int
    r2: int
    r3: int

    def __post_init__(self):
        if not (1 <= self.r1 < self.r2 < self.r3):
            raise ConfigError(f"ranks must be strictly increasing positive integers, "
                              f"got ({self.r1}, {self.r2}, {self.r3})")

    def __iter__(self):
        return iter((self.r1, self.r2, self.r3))


@dataclass(frozen=True)
class ReducedData:
    """An r x n reduced representation of the observations."""

    values: np.ndarray
    method: str
    rank: int
    nonnegative: bool


@dataclass(frozen=True)
class NmfFactors:
    """Nonnegative factors W (m x r) and H (r x n) with the fit residual."""

    W: np.ndarray
    H: np.ndarray
    residual: float
    sparsity_w: float
    sparsity_h: float


def _as_array(X):
    return X.dense() if hasattr(X, "dense") else np.asarray(X, dtype=np.float64)


def _squared_singular_values(X):
    """All squared singular values, descending, via the smaller Gram matrix."""
    if sp.issparse(X):
        G = (X.T @ X) if X.shape[0] >= X.shape[1] else (X @ X.T)
        G = np.asarray(G.todense(), dtype=np.float64)
    else:
        A = np.asarray(X, dtype=np.float64)
        G = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    try:
        vals = scipy.linalg.eigvalsh((G + G.T) / 2.0)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram eigensolve failed: {exc}") from exc
    return np.maximum(vals[::-1], 0.0)


def _fix_signs(U, Vt):
    """Flip singular-vector pairs so each left vector's largest-magnitude
    entry is positive, making factorizations deterministic."""
    for i in range(U.shape[1]):
        j = int(np.argmax(np.abs(U[:, i])))
        if U[j, i] < 0:
            U[:, i] = -U[:, i]
            Vt[i, :] = -Vt[i, :]
    return U, Vt


def _svd_factors(X, r, dense_cap=DENSE_SVD_CAP):
    """Leading r singular triplets of X with the deterministic sign fix."""
    m, n = X.shape
    p = min(m, n)
    if not 1 <= r <= p:
        raise ConfigError(f"rank {r} out of range [1, {p}] for a {m}x{n} matrix")
    use_dense = (not sp.issparse(X)) and p <= dense_cap
    if not use_dense and r >= p:
        # iterative solvers cannot reach the full spectrum; fall back to dense
        use_dense = True
    if use_dense:
        A = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)
        try:
            U, s, Vt = scipy.linalg.svd(A, full_matrices=False)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"dense SVD failed: {exc}") from exc
        U, s, Vt = U[:, :r].copy(), s[:r].copy(), Vt[:r].copy()
    else:
        v0 = np.random.default_rng(0).standard_normal(min(m, n))
        try:
            U, s, Vt = spla.svds(X, k=r, v0=v0)
        except spla.ArpackError as exc:
            raise NumericalError(f"iterative SVD did not converge: {exc}") from exc
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]
    U, Vt = _fix_signs(U, Vt)
    return U, s, Vt


def select_ranks(X, policy="variance", dense_cap=DENSE_SVD_CAP):
    """Choose three unique reduction ranks for X.

    The variance policy picks the smallest ranks whose cumulative squared
    singular values reach 60/75/90 percent of the total (uncentered);
    the fraction policy uses roughly 1/5/10 percent of n. Collisions are
    resolved by bumping the later rank upward; if that exceeds min(m, n)
    the data cannot host three unique ranks.
    """
    V = X.values if hasattr(X, "values") else X
    m, n = V.shape
    p = min(m, n)
    if policy == "variance":
        if p > dense_cap:
            raise DataError(f"variance rank policy needs a full SVD, infeasible for "
                            f"min(m, n) = {p} > {dense_cap}; use the fraction policy")
        sq = _squared_singular_values(V)
        total = sq.sum()
        cum = np.cumsum(sq)
        raw = []
        for target in VARIANCE_TARGETS:
            hit = np.nonzero(cum + 1e-12 * max(total, 1.0) >= target * total)[0]
            raw.append(int(hit[0]) + 1 if hit.size else p)
    elif policy == "fraction":
        if n < 30:
            raise DataError(f"fraction rank policy needs n >= 30 observations, got {n}")
        raw = [max(1, int(np.floor(c * n + 0.5))) for c in FRACTION_TARGETS]
    else:
        raise ConfigError(f"unknown rank policy {policy!r}")

    r1 = raw[0]
    r2 = max(raw[1], r1 + 1)
    r3 = max(raw[2], r2 + 1)
    if r3 > p:
        raise DataError(f"cannot pick three unique ranks <= min(m, n) = {p} "
                        f"under the {policy} policy (got {r1}, {r2}, {r3}); "
                        "try the fraction policy or explicit ranks")
    return RankTriple(r1, r2, r3)


def pca(X, r):
    """Principal-component scores of the column observations.

    Columns are centered by the mean observation and projected onto the top
    r left singular vectors of the centered matrix; row i of the result is
    the i-th component's scores, with nonincreasing variance.
    """
    A = _as_array(X)
    mu = A.mean(axis=1, keepdims=True)
    C = A - mu
    U, s, Vt = _svd_factors(C, r)
    scores = U.T @ C
    return ReducedData(scores, "pca", r, bool(scores.size and scores.min() >= 0.0))


def svd_truncated(X, r):
    """Rank-r right factor of the SVD, scaled by the singular values.

    The output rows are sigma_i * v_i^T, so inner products between reduced
    observations approximate those of the original columns.
    """
    V = X.values if hasattr(X, "values") else X
    U, s, Vt = _svd_factors(V, r)
    reduced = s[:, None] * Vt
    return ReducedData(reduced, "svd", r, bool(reduced.size and reduced.min() >= 0.0))


def nmf_acls(X, r, lambda_w=0.5, lambda_h=0.5, seed=0, tol=1e-4, max_sweeps=100,
             acol_samples=20):
    """Nonnegative factorization by alternating constrained least squares.

    W is seeded by averaging ``acol_samples`` random data columns per basis
    vector. Each sweep ridge-solves for H then W, clipping negatives to zero
    after each solve. Clipped updates are not guaranteed monotone, so the
    best (lowest-residual) pair seen is what gets returned.
    """
    nonneg = X.nonnegative if hasattr(X, "nonnegative") else bool(np.min(X) >= 0)
    if not nonneg:
        raise DataError("nmf_acls requires nonnegative data")
    V = X.values if hasattr(X, "values") else np.asarray(X, dtype=np.float64)
    m, n = V.shape
    if not 1 <= r <= min(m, n):
        raise ConfigError(f"rank {r} out of range [1, {min(m, n)}] for a {m}x{n} matrix")

    rng = np.random.default_rng(seed)
    q = min(acol_samples, n)
    W = np.empty((m, r))
    for j in range(r):
        cols = rng.choice(n, size=q, replace=False)
        picked = V[:, cols]
        if sp.issparse(picked):
            picked = picked.toarray()
        W[:, j] = picked.mean(axis=1)

    sq_norm = (V.multiply(V)).sum() if sp.issparse(V) else float((V * V).sum())
    norm_x = float(np.sqrt(sq_norm))
    eye = np.eye(r)

    def residual_of(W, H, WtX):
        # ||X - WH||_F^2 without forming WH: ||X||^2 - 2<WtX, H> + <W'W, HH'>
        val = sq_norm - 2.0 * float(np.sum(WtX * H)) \
            + float(np.sum((W.T @ W) * (H @ H.T)))
        return float(np.sqrt(max(val, 0.0)))

    best = None
    prev_res = None
    H = np.zeros((r, n))
    for _ in range(max_sweeps):
        WtX = (V.T @ W).T if sp.issparse(V) else W.T @ V
        try:
            H = scipy.linalg.solve(W.T @ W + lambda_h * eye, WtX, assume_a="pos")
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"ACLS solve for H failed: {exc}") from exc
        np.maximum(H, 0.0, out=H)
        XHt = (V @ H.T) if sp.issparse(V) else V @ H.T
        XHt = np.asarray(XHt)
        try:
            W = scipy.linalg.solve(H @ H.T + lambda_w * eye, XHt.T, assume_a="pos").T
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"ACLS solve for W failed: {exc}") from exc
        np.maximum(W, 0.0, out=W)

        WtX = (V.T @ W).T if sp.issparse(V) else W.T @ V
        res = residual_of(W, H, WtX)
        if best is None or res < best[0]:
            best = (res, W.copy(), H.copy())
        if prev_res is not None and abs(prev_res - res) < tol * max(norm_x, 1e-30):
            break
        prev_res = res

    res, W, H = best
    return NmfFactors(W, H, res, lambda_w, lambda_h)
