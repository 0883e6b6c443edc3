"""Minimal MatrixMarket coordinate-format reader and writer.

Only the subset needed here is supported: ``matrix coordinate real|integer
general|symmetric``. The reader sums duplicate entries and expands symmetric
storage to full symmetry; the writer emits a deterministic, sorted entry list
so identical matrices produce byte-identical files.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DataError

_FIELDS = ("real", "integer")
_SYMMETRIES = ("general", "symmetric")


def read_coordinate(path):
    """Read a MatrixMarket coordinate file into a CSC matrix.

    Duplicate (i, j) entries are summed. Files tagged ``symmetric`` are
    expanded: every stored off-diagonal entry (i, j) also yields (j, i).
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        if not header:
            raise DataError(f"{path}: empty file")
        tokens = header.strip().split()
        if len(tokens) != 5 or tokens[0] != "%%MatrixMarket":
            raise DataError(f"{path}: malformed MatrixMarket header: {header.strip()!r}")
        obj, fmt, field, symmetry = (t.lower() for t in tokens[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise DataError(f"{path}: only 'matrix coordinate' files are supported, got "
                            f"'{obj} {fmt}'")
        if field not in _FIELDS:
            raise DataError(f"{path}: unsupported field {field!r} (expected real or integer)")
        if symmetry not in _SYMMETRIES:
            raise DataError(f"{path}: unsupported symmetry {symmetry!r} "
                            f"(expected general or symmetric)")

        lineno = 1
        size_line = None
        for line in fh:
            lineno += 1
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            size_line = text
            break
        if size_line is None:
            raise DataError(f"{path}: missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise DataError(f"{path}: line {lineno}: size line must be 'rows cols nnz'")
        try:
            m, n, nnz = (int(p) for p in parts)
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-integer size line {size_line!r}")
        if m <= 0 or n <= 0 or nnz < 0:
            raise DataError(f"{path}: line {lineno}: invalid dimensions {size_line!r}")
        if symmetry == "symmetric" and m != n:
            raise DataError(f"{path}: symmetric matrix must be square, got {m}x{n}")

        rows, cols, vals = [], [], []
        seen = 0
        for line in fh:
            lineno += 1
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            parts = text.split()
            if len(parts) != 3:
                raise DataError(f"{path}: line {lineno}: expected 'i j value', got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                v = float(parts[2])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric entry {text!r}")
            if not (1 <= i <= m) or not (1 <= j <= n):
                raise DataError(f"{path}: line {lineno}: index ({i}, {j}) out of declared "
                                f"bounds {m}x{n}")
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            if symmetry == "symmetric" and i != j:
                rows.append(j - 1)
                cols.append(i - 1)
                vals.append(v)
            seen += 1
        if seen != nnz:
            raise DataError(f"{path}: declared {nnz} entries but found {seen}")

    coo = sp.coo_matrix((vals, (rows, cols)), shape=(m, n), dtype=np.float64)
    out = coo.tocsc()
    out.sum_duplicates()
    return out


def write_coordinate(path, matrix, symmetric=False, comment=None):
    """Write a dense or sparse matrix as a MatrixMarket coordinate file.

    With ``symmetric=True`` only the lower triangle (including the diagonal)
    is stored and the file is tagged ``symmetric``; the caller is responsible
    for the matrix actually being symmetric. Integral matrices are written
    with the ``integer`` field, everything else with ``real`` at full
    precision.
    """
    if sp.issparse(matrix):
        coo = matrix.tocoo()
        rows, cols, vals = coo.row, coo.col, coo.data
    else:
        arr = np.asarray(matrix, dtype=np.float64)
        rows, cols = np.nonzero(arr)
        vals = arr[rows, cols]
    if symmetric:
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]

    # column-major order keeps output stable regardless of input layout
    order = np.lexsort((rows, cols))
    rows, cols, vals = rows[order], cols[order], vals[order]

    m, n = matrix.shape
    integral = vals.size == 0 or bool(np.all(vals == np.rint(vals)))
    field = "integer" if integral else "real"
    symmetry = "symmetric" if symmetric else "general"

    lines = [f"%%MatrixMarket matrix coordinate {field} {symmetry}"]
    if comment:
        for piece in str(comment).splitlines():
            lines.append(f"%{piece}")
    lines.append(f"{m} {n} {vals.size}")
    if integral:
        for i, j, v in zip(rows, cols, vals):
            lines.append(f"{i + 1} {j + 1} {int(round(v))}")
    else:
        for i, j, v in zip(rows, cols, vals):
            lines.append(f"{i + 1} {j + 1} {v:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
