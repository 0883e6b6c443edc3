"""Data loading and term weighting.

Every downstream stage consumes one canonical type, :class:`DataMatrix`,
whose columns are the observations being clustered. Loaders normalize file
layouts into that orientation and validate the result.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import mmio
from .errors import DataError

__all__ = ["DataMatrix", "LabelVector", "load_dense", "load_sparse",
           "load_labels", "tfidf_weight"]


@dataclass(frozen=True)
class DataMatrix:
    """An m x n matrix of column data: m features, n observations.

    Dense values are stored as a read-only float64 array, sparse values as
    CSC. Construction validates finiteness and that there are at least two
    observations; the ``nonnegative`` flag is always computed by scanning.
    """

    values: object
    nonnegative: bool = field(init=False)

    def __post_init__(self):
        v = self.values
        if sp.issparse(v):
            v = v.tocsc().astype(np.float64)
            v.sum_duplicates()
            data = v.data
        else:
            v = np.array(v, dtype=np.float64)
            if v.ndim != 2:
                raise DataError(f"data matrix must be 2-D, got shape {v.shape}")
            v.setflags(write=False)
            data = v
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise DataError(f"need at least 1 feature and 2 observations, got "
                            f"{v.shape[0]}x{v.shape[1]}")
        if data.size and not np.all(np.isfinite(data)):
            raise DataError("data matrix contains NaN or infinite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nonnegative",
                           bool(data.size == 0 or data.min() >= 0.0))

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def storage(self):
        return "sparse" if sp.issparse(self.values) else "dense"

    def dense(self):
        """Values as a dense ndarray (a view for dense storage)."""
        if sp.issparse(self.values):
            return self.values.toarray()
        return self.values


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth class ids for the n observations, densely numbered."""

    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        if self.class_count < 1:
            raise DataError("class_count must be positive")
        if lab.size and (lab.min() < 0 or lab.max() >= self.class_count):
            raise DataError("labels must lie in [0, class_count)")

    def __len__(self):
        return self.labels.size


def load_dense(path, layout="rows-as-observations"):
    """Load a delimiter-separated numeric text file as a DataMatrix.

    ``layout`` says what a file row is: ``rows-as-observations`` (the common
    CSV convention, the matrix is transposed on load) or
    ``columns-as-observations`` (the file already is features x observations).
    Comma and whitespace delimiters are both accepted.
    """
    if layout not in ("rows-as-observations", "columns-as-observations"):
        raise DataError(f"unknown layout {layout!r}")
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            tokens = text.replace(",", " ").split()
            vals = []
            for tok in tokens:
                try:
                    vals.append(float(tok))
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: non-numeric token {tok!r}")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(f"{path}: line {lineno}: expected {width} values, "
                                f"got {len(vals)} (ragged rows)")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: empty file")
    arr = np.array(rows, dtype=np.float64)
    if layout == "rows-as-observations":
        arr = arr.T
    return DataMatrix(arr)


def load_sparse(path):
    """Load a MatrixMarket coordinate file as a sparse DataMatrix.

    Duplicate entries are summed and symmetric-tagged files are expanded to
    full symmetry.
    """
    return DataMatrix(mmio.read_coordinate(path))


def load_labels(path, n):
    """Load one label token per line and map to dense ids 0..class_count-1.

    Ids are assigned in first-appearance order; the file must contain exactly
    ``n`` non-blank lines.
    """
    tokens = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if text:
                tokens.append(text)
    if not tokens:
        raise DataError(f"{path}: empty label file")
    if len(tokens) != n:
        raise DataError(f"{path}: expected {n} labels, found {len(tokens)}")
    mapping = {}
    labels = np.empty(n, dtype=np.int64)
    for i, tok in enumerate(tokens):
        if tok not in mapping:
            mapping[tok] = len(mapping)
        labels[i] = mapping[tok]
    return LabelVector(labels, len(mapping))


def tfidf_weight(X):
    """Apply tf.log-idf weighting and scale every column to unit 2-norm.

    Entry (i, j) becomes ``X_ij * log(n / df_i)`` where ``df_i`` counts the
    nonzero entries of row i; a row present in every column gets weight 0.
    A column that ends up all zero (an observation whose every term was
    global, or one empty to begin with) is an error. Not idempotent: the
    document frequencies of the weighted matrix differ from the raw ones.
    """
    if not X.nonnegative:
        raise DataError("tfidf_weight requires nonnegative raw frequencies")
    n = X.n
    if sp.issparse(X.values):
        df = np.asarray((X.values != 0).sum(axis=1)).ravel()
        idf = np.where(df > 0, np.log(n / np.maximum(df, 1)), 0.0)
        weighted = sp.diags(idf) @ X.values
        norms = np.sqrt(np.asarray(weighted.multiply(weighted).sum(axis=0)).ravel())
        bad = np.nonzero(norms == 0.0)[0]
        if bad.size:
            raise DataError(f"columns {bad.tolist()} are all zero after weighting "
                            "(empty or all-global observations)")
        out = weighted @ sp.diags(1.0 / norms)
    else:
        V = X.values
        df = np.count_nonzero(V, axis=1)
        idf = np.where(df > 0, np.log(n / np.maximum(df, 1)), 0.0)
        weighted = V * idf[:, None]
        norms = np.linalg.norm(weighted, axis=0)
        bad = np.nonzero(norms == 0.0)[0]
        if bad.size:
            raise DataError(f"columns {bad.tolist()} are all zero after weighting "
                            "(empty or all-global observations)")
        out = weighted / norms
    return DataMatrix(out)
