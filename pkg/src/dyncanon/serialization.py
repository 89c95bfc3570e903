"""JSON and CSV encodings of matrices, triples, fields and reports.

Matrices are arrays of rows, each entry a ``[re, im]`` pair.  Floats are
written with Python's shortest round-trip repr, so a decode of an encode is
bit-exact.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import ShapeError

__all__ = [
    "matrix_to_json",
    "matrix_from_json",
    "dumps",
    "field_to_csv",
]


def matrix_to_json(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def matrix_from_json(obj, name="matrix") -> np.ndarray:
    """Decode ``[[[re, im], ...], ...]``; bare reals are accepted as entries."""
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ShapeError(f"{name}: expected a non-empty array of rows")
    ncols = len(obj[0])
    rows = []
    for r in obj:
        if len(r) != ncols:
            raise ShapeError(f"{name}: ragged rows")
        row = []
        for e in r:
            if isinstance(e, (int, float)):
                row.append(complex(e))
            elif isinstance(e, list) and len(e) == 2:
                row.append(complex(float(e[0]), float(e[1])))
            else:
                raise ShapeError(f"{name}: entries must be [re, im] pairs")
        rows.append(row)
    return np.array(rows, dtype=complex).reshape(len(rows), ncols)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _num(v: float) -> str:
    # repr round-trips exactly; adding 0.0 folds -0.0 into 0.0
    return repr(float(v) + 0.0)


def field_to_csv(field) -> str:
    """Serialize a :class:`~dyncanon.explicit.SolutionField` to CSV text.

    Row order: x-major; for each x the Y rows for every t (then row, col),
    followed by the Hcal rows of that x, whose ``t`` column is empty.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "t", "block", "row", "col", "re", "im"])
    m, n = field.Y.shape[2:]
    for ix, x in enumerate(field.xs):
        xs = _num(x)
        for it, t in enumerate(field.ts):
            ts = _num(t)
            Y = field.Y[ix, it]
            for r in range(m):
                for c in range(n):
                    z = Y[r, c]
                    w.writerow([xs, ts, "Y", r, c, _num(z.real), _num(z.imag)])
        H = field.Hcal[ix]
        for r in range(m):
            for c in range(m):
                z = H[r, c]
                w.writerow([xs, "", "Hcal", r, c, _num(z.real), _num(z.imag)])
    return buf.getvalue()
