"""Plain-text dense matrix format.

Line 1 is ``# dense <rows> <cols>``; then one line per row with
whitespace-separated values printed to 17 significant digits. Parsing uses
``float()`` which is locale-independent and expects ``.`` as decimal point.
Vectors are stored as single-column matrices.
"""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np

from .errors import BadShape, NonFiniteEntries

HEADER = "# dense"


def format_matrix(A) -> str:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise BadShape(f"cannot format array of shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteEntries("refusing to write NaN/Inf")
    rows, cols = A.shape
    buf = io.StringIO()
    buf.write(f"{HEADER} {rows} {cols}\n")
    for row in A:
        buf.write(" ".join(format(float(v), ".17g") for v in row))
        buf.write("\n")
    return buf.getvalue()


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise BadShape("empty matrix file")
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != HEADER:
        raise BadShape(f"bad header line: {lines[0]!r}")
    try:
        rows, cols = int(head[2]), int(head[3])
    except ValueError as err:
        raise BadShape(f"bad header line: {lines[0]!r}") from err
    body = lines[1:]
    if len(body) != rows:
        raise BadShape(f"header declares {rows} rows, found {len(body)}")
    out = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        fields = line.split()
        if len(fields) != cols:
            raise BadShape(f"row {i} has {len(fields)} entries, expected {cols}")
        try:
            out[i] = [float(f) for f in fields]
        except ValueError as err:
            raise BadShape(f"row {i}: {err}") from err
    if not np.all(np.isfinite(out)):
        raise NonFiniteEntries("matrix file contains NaN/Inf")
    return out


def write_matrix(path: str | os.PathLike, A) -> None:
    Path(path).write_text(format_matrix(A), encoding="ascii")


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    return parse_matrix(Path(path).read_text(encoding="ascii"))


def read_vector(path: str | os.PathLike) -> np.ndarray:
    A = read_matrix(path)
    if 1 not in A.shape:
        raise BadShape(f"expected a vector, got a {A.shape[0]}x{A.shape[1]} matrix")
    return A.reshape(-1)
