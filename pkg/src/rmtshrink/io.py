"""File formats: spectrum and data CSVs, the SHRK binary blob, and report CSVs.

Floats are written with ``repr`` so files round-trip exactly and repeated
runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import struct
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .errors import InputError
from .shrinkage import ShrinkageResult
from .spectral import PopulationSpectrum, SupportStructure

BLOB_MAGIC = b"SHRK"
_HEADER = struct.Struct("<4sII4x")  # magic, M, N, 4 reserved bytes -> 16 bytes


def fmt(x: float | complex | int | str) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path | None, header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Write rows to ``path`` (or just return the text when ``path`` is None)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# numeric CSV parsing
# --------------------------------------------------------------------------


def _read_numeric_rows(path: str | Path) -> list[tuple[int, list[float]]]:
    """Parse a numeric CSV; a non-numeric first line is treated as a header."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc.strerror}") from exc
    rows: list[tuple[int, list[float]]] = []
    width = None
    for lineno, raw in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in raw]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            if not rows and lineno == 1:
                continue
            raise InputError(f"{p}: line {lineno}: non-numeric value") from None
        if not all(np.isfinite(vals)):
            raise InputError(f"{p}: line {lineno}: non-finite value")
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise InputError(f"{p}: line {lineno}: expected {width} columns, found {len(vals)}")
        rows.append((lineno, vals))
    if not rows:
        raise InputError(f"{p}: no numeric rows")
    return rows


def read_spectrum_csv(
    path: str | Path, sample_size: int, dimension: int | None = None, tau: float = 1e-3
) -> PopulationSpectrum:
    """Population spectrum from one column of eigenvalues or (value, weight) pairs.

    In the two-column form integer weights are eigenvalue counts; otherwise
    they are fractions and ``dimension`` fixes M.
    """
    rows = _read_numeric_rows(path)
    width = len(rows[0][1])
    if width == 1:
        eig = np.array([r[1][0] for r in rows])
        for lineno, (v,) in rows:
            if v < 0:
                raise InputError(f"{path}: line {lineno}: negative eigenvalue")
        return PopulationSpectrum(eig, sample_size, tau)
    if width != 2:
        raise InputError(f"{path}: expected one or two columns, found {width}")
    vals = np.array([r[1][0] for r in rows])
    wts = np.array([r[1][1] for r in rows])
    for lineno, (v, w) in rows:
        if v < 0 or w < 0:
            raise InputError(f"{path}: line {lineno}: values and weights must be nonnegative")
    if np.all(wts == np.round(wts)) and dimension is None:
        return PopulationSpectrum(np.repeat(vals, wts.astype(int)), sample_size, tau)
    if dimension is None:
        raise InputError("fractional weights need the dimension M")
    return PopulationSpectrum.from_weights(vals, wts, sample_size, dimension, tau)


def write_spectrum_csv(path: str | Path, spectrum: PopulationSpectrum) -> str:
    return write_csv(path, ["value", "count"], zip(spectrum.values, spectrum.counts))


def read_data_csv(path: str | Path) -> np.ndarray:
    """Data matrix with rows = variables and columns = observations."""
    rows = _read_numeric_rows(path)
    return np.array([r[1] for r in rows], dtype=float)


# --------------------------------------------------------------------------
# binary blob
# --------------------------------------------------------------------------


def encode_blob(matrix: np.ndarray) -> bytes:
    a = np.asarray(matrix, dtype="<f8")
    if a.ndim != 2:
        raise InputError("blob payload must be a matrix")
    m, n = a.shape
    return _HEADER.pack(BLOB_MAGIC, m, n) + a.tobytes(order="F")


def decode_blob(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise InputError("blob shorter than its 16-byte header")
    magic, m, n = _HEADER.unpack_from(data)
    if magic != BLOB_MAGIC:
        raise InputError("blob magic is not SHRK")
    payload = data[_HEADER.size :]
    if len(payload) != 8 * m * n:
        raise InputError(f"blob payload has {len(payload)} bytes, expected {8 * m * n}")
    return np.frombuffer(payload, dtype="<f8").reshape((m, n), order="F").astype(float)


def write_blob(path: str | Path, matrix: np.ndarray) -> None:
    Path(path).write_bytes(encode_blob(matrix))


def read_blob(path: str | Path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_blob(data)


def read_data(path: str | Path) -> np.ndarray:
    """Data matrix from a SHRK blob (by magic) or a CSV."""
    p = Path(path)
    try:
        head = p.open("rb").read(4)
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc.strerror}") from exc
    return read_blob(p) if head == BLOB_MAGIC else read_data_csv(p)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def write_support_csv(path: str | Path | None, support: SupportStructure) -> str:
    """Classical locations as (index, gamma, gamma_squared, bulk_index); indices are 1-based."""
    g = support.classical_locations
    rows = ((i + 1, g[i], g[i] * g[i], int(support.location_bulk[i]) + 1) for i in range(g.size))
    return write_csv(path, ["index", "gamma", "gamma_squared", "bulk_index"], rows)


def write_edges_csv(path: str | Path | None, support: SupportStructure) -> str:
    rows = []
    for k, (lo, hi) in enumerate(support.bulks):
        rows.append((k + 1, hi, lo, support.bulk_masses[k], support.bulk_counts[k]))
    return write_csv(path, ["bulk_index", "upper_edge", "lower_edge", "mass", "count"], rows)


def write_shrinkage_csv(path: str | Path | None, lambdas: np.ndarray, result: ShrinkageResult) -> str:
    rows = (
        (i + 1, lambdas[i], result.shrunk_eigenvalues[i], result.mode.value, result.loss_kind.value)
        for i in range(lambdas.size)
    )
    return write_csv(path, ["i", "lambda", "shrunk_lambda", "mode", "loss_kind"], rows)


def read_shrinkage_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return (
        np.array([float(r["lambda"]) for r in rows]),
        np.array([float(r["shrunk_lambda"]) for r in rows]),
    )


def write_overlap_csv(path: str | Path | None, records: Iterable[Sequence[object]]) -> str:
    """Rows of (k, i, empirical, predicted, envelope, normalized_error)."""
    return write_csv(path, ["k", "i", "empirical", "predicted", "envelope", "normalized_error"], records)
