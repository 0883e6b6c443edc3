"""Ensemble execution and the consensus co-clustering matrix.

The ensemble runs every configured algorithm on every configured
representation of the data (raw plus dimension reductions at several ranks)
for every candidate cluster count, then counts how often each pair of
observations lands in the same cluster.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import mmio
from .algos import emgm, kmeans, pddp, pddp_seeded_kmeans, with_source
from .dimred import nmf_acls, pca, select_ranks, svd_truncated
from .errors import ConfigError, DataError, IccError
from .ingest import DataMatrix

__all__ = ["EnsembleConfig", "Ensemble", "ConsensusMatrix", "run_ensemble",
           "build_consensus", "apply_drop_tolerance", "save_consensus"]

ALGORITHMS = ("kmeans-random", "pddp", "pddp-kmeans", "emgm")
REPRESENTATIONS = ("raw", "pca", "svd", "nmf")
REDUCTIONS = ("pca", "svd", "nmf")

_ALG_ID = {name: i for i, name in enumerate(ALGORITHMS)}
_REP_ID = {name: i for i, name in enumerate(REPRESENTATIONS)}
_NMF_SEED_TAG = 97  # seed-mix domain separator for reduction seeding


def _mix_seed(*parts):
    """Deterministic, order-sensitive mix of nonnegative ints into one seed."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class EnsembleConfig:
    """What to run: candidate counts, algorithm and representation rosters,
    reduction ranks (explicit, or None to derive via ``rank_policy`` against
    whatever data the ensemble is given), metric for the k-means variants,
    and the base seed every per-run seed is mixed from."""

    ktilde: tuple
    algorithms: tuple = ALGORITHMS
    representations: tuple = REPRESENTATIONS
    ranks: tuple | None = None
    rank_policy: str = "variance"
    metric: str = "euclidean"
    base_seed: int = 0

    def __post_init__(self):
        kt = tuple(int(k) for k in self.ktilde)
        object.__setattr__(self, "ktilde", kt)
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "representations", tuple(self.representations))
        if self.ranks is not None:
            object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if not kt or any(k < 1 for k in kt) or any(b <= a for a, b in zip(kt, kt[1:])):
            raise ConfigError(f"ktilde must be a strictly increasing sequence of "
                              f"positive integers, got {kt}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if not self.representations:
            raise ConfigError("at least one representation is required")
        for r in self.representations:
            if r not in REPRESENTATIONS:
                raise ConfigError(f"unknown representation {r!r}; "
                                  f"choose from {REPRESENTATIONS}")
        if self.ranks is not None:
            rk = self.ranks
            if any(r < 1 for r in rk) or any(b <= a for a, b in zip(rk, rk[1:])):
                raise ConfigError(f"ranks must be strictly increasing positive "
                                  f"integers, got {rk}")
        if self.metric not in ("euclidean", "spherical"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")

    @property
    def J(self):
        return len(self.ktilde)


@dataclass(frozen=True)
class Ensemble:
    """JN clusterings over the same n observations: N per candidate count."""

    clusterings: tuple
    J: int
    N: int

    def __post_init__(self):
        object.__setattr__(self, "clusterings", tuple(self.clusterings))
        if len(self.clusterings) != self.J * self.N:
            raise DataError(f"ensemble size {len(self.clusterings)} != J*N = "
                            f"{self.J * self.N}")
        sizes = {c.n for c in self.clusterings}
        if len(sizes) > 1:
            raise DataError(f"clusterings cover different observation counts: {sizes}")

    @property
    def size(self):
        return len(self.clusterings)


@dataclass(frozen=True)
class ConsensusMatrix:
    """Symmetric n x n matrix counting pairwise co-cluster events over the
    ensemble; the diagonal always equals the ensemble size."""

    M: np.ndarray
    ensemble_size: int

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64)
        M.setflags(write=False)
        object.__setattr__(self, "M", M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DataError(f"consensus matrix must be square, got {M.shape}")
        if not np.array_equal(M, M.T):
            raise DataError("consensus matrix must be exactly symmetric")
        if M.min() < 0 or M.max() > self.ensemble_size:
            raise DataError(f"consensus counts must lie in [0, {self.ensemble_size}]")
        if not np.array_equal(np.diag(M), np.full(M.shape[0], float(self.ensemble_size))):
            raise DataError("consensus diagonal must equal the ensemble size")
        if not np.array_equal(M, np.rint(M)):
            raise DataError("consensus counts must be integers")

    @property
    def n(self):
        return self.M.shape[0]


def _representations(X, cfg):
    """Materialize the representation roster as (name, rank, data) triples.

    Reductions that cannot be produced (no valid rank triple, or NMF on data
    with negative entries) are skipped with a warning rather than failing
    the whole ensemble.
    """
    reps = []
    if "raw" in cfg.representations:
        reps.append(("raw", None, X))
    wanted = [r for r in REDUCTIONS if r in cfg.representations]
    if not wanted:
        return reps

    ranks = cfg.ranks
    if ranks is None:
        try:
            ranks = tuple(select_ranks(X, cfg.rank_policy))
        except IccError as exc:
            warnings.warn(f"skipping all dimension reductions: {exc}")
            return reps
    p = min(X.m, X.n)
    if max(ranks) > p:
        raise ConfigError(f"explicit ranks {ranks} exceed min(m, n) = {p}")

    for name in wanted:
        if name == "nmf" and not X.nonnegative:
            warnings.warn("skipping nmf representation: data has negative entries")
            continue
        for r in ranks:
            if name == "pca":
                reduced = pca(X, r).values
            elif name == "svd":
                reduced = svd_truncated(X, r).values
            else:
                seed = _mix_seed(cfg.base_seed, _NMF_SEED_TAG, r)
                reduced = nmf_acls(X, r, seed=seed).H
            reps.append((name, r, reduced))
    return reps


def _run_one(alg, data, kt, metric, seed):
    if alg == "kmeans-random":
        return kmeans(data, kt, metric=metric, init="random", seed=seed)
    if alg == "pddp":
        return pddp(data, kt)
    if alg == "pddp-kmeans":
        return pddp_seeded_kmeans(data, kt, metric=metric)
    return emgm(data, kt, seed=seed)


def run_ensemble(X, cfg, workers=1):
    """Run the configured ensemble against X.

    Every (ktilde, algorithm, representation) triple yields one clustering,
    seeded by a deterministic mix of the base seed and the triple's
    coordinates, so results are reproducible and independent of execution
    order. Runs that fail a data precondition (for example a zero-norm
    observation under the spherical metric on some reduced representation)
    are skipped with a warning.
    """
    if max(cfg.ktilde) >= X.n:
        raise ConfigError(f"max(ktilde) = {max(cfg.ktilde)} must be < n = {X.n}")
    reps = _representations(X, cfg)
    if not reps:
        raise DataError("no usable representations; ensemble would be empty")

    tasks = []
    for kt in cfg.ktilde:
        for alg in cfg.algorithms:
            for rep_name, rank, data in reps:
                seed = _mix_seed(cfg.base_seed, _ALG_ID[alg], _REP_ID[rep_name],
                                 rank or 0, kt)
                tasks.append((kt, alg, rep_name, rank, data, seed))

    def execute(task):
        kt, alg, rep_name, rank, data, seed = task
        stochastic = alg in ("kmeans-random", "emgm")
        try:
            c = _run_one(alg, data, kt, cfg.metric, seed)
        except DataError as exc:
            warnings.warn(f"skipping {alg} on {rep_name}"
                          f"{'' if rank is None else f'(r={rank})'} "
                          f"at ktilde={kt}: {exc}")
            return None
        return with_source(c, algorithm=alg, representation=rep_name, rank=rank,
                           k_requested=kt, seed=seed if stochastic else None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, tasks))
    else:
        results = [execute(t) for t in tasks]

    clusterings = [c for c in results if c is not None]
    if not clusterings:
        raise DataError("every ensemble run failed; nothing to build consensus from")
    J = cfg.J
    assert len(clusterings) % J == 0, "per-ktilde run counts diverged"
    return Ensemble(tuple(clusterings), J, len(clusterings) // J)


def build_consensus(ensemble):
    """Count, for every pair of observations, the clusterings that put them
    in the same cluster. The diagonal equals the ensemble size since every
    observation co-clusters with itself."""
    if not ensemble.clusterings:
        raise DataError("empty ensemble")
    n = ensemble.clusterings[0].n
    M = np.zeros((n, n))
    for c in ensemble.clusterings:
        if c.n != n:
            raise DataError(f"clustering length {c.n} != {n}")
        for cid in range(c.k):
            idx = np.nonzero(c.assignment == cid)[0]
            M[np.ix_(idx, idx)] += 1.0
    return ConsensusMatrix(M, ensemble.size)


def apply_drop_tolerance(consensus, tau):
    """Zero every count strictly below ``tau`` times the ensemble size.

    The diagonal always survives, so no observation is ever disconnected
    from itself and the walk's degree matrix stays invertible."""
    if not 0.0 <= tau < 0.5:
        raise ConfigError(f"drop tolerance must lie in [0, 0.5), got {tau}")
    threshold = tau * consensus.ensemble_size
    M = np.where(consensus.M < threshold, 0.0, consensus.M)
    return ConsensusMatrix(M, consensus.ensemble_size)


def save_consensus(consensus, path):
    """Persist as MatrixMarket symmetric coordinate format."""
    mmio.write_coordinate(path, consensus.M, symmetric=True,
                          comment=f" ensemble_size {consensus.ensemble_size}")


def consensus_as_data(consensus):
    """The consensus matrix reinterpreted as column data for the next
    ensemble round."""
    return DataMatrix(np.array(consensus.M))


def iterated_config(cfg, representations=None):
    """The ensemble configuration used when clustering a consensus matrix:
    spherical metric, ranks re-derived from the matrix itself."""
    return replace(cfg, metric="spherical",
                   representations=representations or cfg.representations,
                   ranks=None, rank_policy="variance")


def make_ensemble(clusterings, J=None, N=None):
    """Wrap hand-built clusterings as an Ensemble (J=1 row by default)."""
    cs = tuple(clusterings)
    if J is None and N is None:
        J, N = 1, len(cs)
    return Ensemble(cs, J, N)
