"""CSV readers and writers for trajectories, matrices and reports.

Numbers are written with 17 significant digits by default so that every
double survives a write/read cycle unchanged.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .exceptions import ContractError


class CSVFormatError(ContractError):
    """A CSV file does not follow the expected schema."""


def fmt(value, precision: int = 17) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{precision}g}"


def write_rows(path, header, rows, precision: int = 17) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v, precision) for v in row])
    return path


def _read_numeric(path, expect_header=None):
    """Header and float rows of a CSV; errors name the offending line."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise CSVFormatError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CSVFormatError(f"{path}: empty file") from None
        if expect_header is not None and header[: len(expect_header)] != expect_header:
            raise CSVFormatError(f"{path}, line 1: unexpected header {header}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise CSVFormatError(
                    f"{path}, line {line}: expected {len(header)} fields, found {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CSVFormatError(f"{path}, line {line}: non-numeric field in {row}") from None
    return header, rows


def write_trajectory(path, samples, precision: int = 17) -> Path:
    X = np.asarray(samples)
    header = ["i"] + [f"f{m + 1}" for m in range(X.shape[1])]
    return write_rows(path, header, ([i, *row] for i, row in enumerate(X)), precision)


def read_trajectory(path) -> np.ndarray:
    """Samples from a ``i,f1..fM`` CSV, checking the time index column."""
    header, rows = _read_numeric(path, ["i"])
    M = len(header) - 1
    if M < 1 or header[1:] != [f"f{m + 1}" for m in range(M)]:
        raise CSVFormatError(f"{path}, line 1: header must be i,f1..fM, got {header}")
    data = np.array(rows, dtype=float).reshape(-1, M + 1)
    if data.shape[0] and np.any(data[:, 0] != np.arange(data.shape[0])):
        bad = int(np.argmax(data[:, 0] != np.arange(data.shape[0])))
        raise CSVFormatError(f"{path}, line {bad + 2}: time index out of sequence")
    if not np.all(np.isfinite(data[:, 1:])):
        bad = int(np.argmax(~np.all(np.isfinite(data[:, 1:]), axis=1)))
        raise CSVFormatError(f"{path}, line {bad + 2}: non-finite value")
    return data[:, 1:]


def write_vector(path, values, name: str = "value", index: str = "j", precision: int = 17) -> Path:
    return write_rows(path, [index, name], ((j + 1, v) for j, v in enumerate(values)), precision)


def read_vector(path) -> np.ndarray:
    header, rows = _read_numeric(path)
    if len(header) != 2:
        raise CSVFormatError(f"{path}, line 1: expected two columns, got {header}")
    return np.array([r[1] for r in rows])


def write_matrix(path, A, prefix: str = "c", precision: int = 17) -> Path:
    """Row-major matrix with header ``row,c1..cK``; rows are 1-based."""
    A = np.asarray(A)
    header = ["row"] + [f"{prefix}{j + 1}" for j in range(A.shape[1])]
    return write_rows(path, header, ([i + 1, *r] for i, r in enumerate(A)), precision)


def read_matrix(path) -> np.ndarray:
    header, rows = _read_numeric(path, ["row"])
    return np.array(rows, dtype=float).reshape(-1, len(header))[:, 1:]


def write_long(path, rows, precision: int = 17) -> Path:
    """Long report ``n,replicate,metric,value``."""
    return write_rows(path, ["n", "replicate", "metric", "value"], rows, precision)


def read_long(path) -> list[tuple[int, int, str, float]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["n", "replicate", "metric", "value"]:
            raise CSVFormatError(f"{path}, line 1: expected n,replicate,metric,value")
        out = []
        for row in reader:
            if len(row) != 4:
                raise CSVFormatError(f"{path}, line {reader.line_num}: expected 4 fields")
            out.append((int(row[0]), int(row[1]), row[2], float(row[3])))
    return out


def write_coefficients(path, basis, coeff_rows, precision: int = 17) -> Path:
    """Wavelet coefficient arrays, one per row, columns named ``phi_J_k``/``psi_j_k``."""
    return write_rows(path, basis.labels(), coeff_rows, precision)


def read_coefficients(path, basis) -> np.ndarray:
    header, rows = _read_numeric(path)
    if header != basis.labels():
        raise CSVFormatError(f"{path}, line 1: coefficient labels do not match the basis")
    return np.array(rows, dtype=float).reshape(-1, len(header))


def write_grid_samples(path, basis, sample_rows, precision: int = 17) -> Path:
    """Grid samples, one function per row, columns named by grid point ``x_i``."""
    header = [f"x{i}" for i in range(basis.grid_size)]
    return write_rows(path, header, sample_rows, precision)
