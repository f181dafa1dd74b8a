"""CSV readers and writers for series, matrices and profiles."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def series_to_csv(X) -> str:
    """Series as ``t,x1..xp`` with t starting at 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{j + 1}" for j in range(X.shape[1])])
    for t, row in enumerate(X):
        w.writerow([t] + [_fmt(v) for v in row])
    return buf.getvalue()


def read_series(path) -> np.ndarray:
    """Read a ``t,x1..xp`` CSV (the t column is optional)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    start = 1 if header[0].strip().lower() == "t" else 0
    try:
        X = np.array([[float(v) for v in r[start:]] for r in body], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] != len(header) - start:
        raise FormatError(f"{path}: ragged or empty table")
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path}: non-finite values")
    return X


def matrix_to_csv(A) -> str:
    """Plain matrix dump, one row per line, no header."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in A:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_matrix(path) -> np.ndarray:
    try:
        A = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return A


def read_vector(path) -> np.ndarray:
    """One column (or one row) of numbers; a non-numeric first line is treated as a header."""
    text = Path(path).read_text().strip().splitlines()
    if text and not _numeric(text[0].split(",")[0]):
        text = text[1:]
    vals = [float(v) for line in text for v in line.split(",") if v.strip()]
    return np.array(vals, dtype=float)


def _numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def profile_to_csv(norms) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "norm"])
    for k, v in enumerate(norms):
        w.writerow([k, _fmt(v)])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
