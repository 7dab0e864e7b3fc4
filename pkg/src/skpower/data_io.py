"""Matrix ingestion, synthetic generators, binary caching, results CSV.

File formats:

* MatrixMarket (``array`` and ``coordinate``, real, general or symmetric),
  with line-numbered parse errors.
* ``.skpw`` binary cache: magic ``SKPW``, one version byte (1), rows and
  cols as unsigned 64-bit little-endian, then rows*cols float64
  little-endian values in row-major order.  Round-trips are bit-exact.
* Trial-record CSV with a fixed column order; float fields are written
  with ``repr`` so round-trips are lossless.

Synthetic generators rotate a prescribed spectrum by Haar-random
orthonormal factors, so the singular values of the output are known by
construction.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, fields

import numpy as np

from .linalg import as_matrix
from .sketching import substream

_MAGIC = b"SKPW"
_VERSION = 1


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------


def _haar_columns(rows: int, cols: int, seed: int) -> np.ndarray:
    """Haar-random matrix with orthonormal columns (QR of a Gaussian,
    sign-fixed R diagonal)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed]))
    g = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def _rotate_spectrum(m: int, n: int, spectrum: np.ndarray, seed: int) -> np.ndarray:
    u = _haar_columns(m, len(spectrum), substream(seed, 0))
    v = _haar_columns(n, len(spectrum), substream(seed, 1))
    return (u * spectrum) @ v.T


def gen_polydecay(m: int, n: int, seed: int) -> np.ndarray:
    """Random m-by-n matrix with singular values max(m, n)/i, i = 1..min(m, n)."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be >= 1")
    p = min(m, n)
    spectrum = max(m, n) / np.arange(1.0, p + 1.0)
    return _rotate_spectrum(m, n, spectrum, seed)


def gen_expdecay(m: int, n: int, rate: float, seed: int) -> np.ndarray:
    """Random m-by-n matrix with singular values exp(-rate * (i - 1))."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be >= 1")
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    p = min(m, n)
    spectrum = np.exp(-rate * np.arange(p, dtype=np.float64))
    return _rotate_spectrum(m, n, spectrum, seed)


def gen_lowrank_plus_noise(m: int, n: int, r: int, noise: float, seed: int) -> np.ndarray:
    """Rank-r matrix with unit singular values plus ``noise`` * Gaussian entries."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be >= 1")
    if not 1 <= r <= min(m, n):
        raise ValueError(f"need 1 <= r <= min(m, n), got r={r}")
    if noise < 0.0:
        raise ValueError("noise must be >= 0")
    base = _rotate_spectrum(m, n, np.ones(r), seed)
    if noise > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[substream(seed, 2)]))
        base = base + noise * rng.standard_normal((m, n))
    return base


# ---------------------------------------------------------------------------
# MatrixMarket
# ---------------------------------------------------------------------------


def _mm_error(path, lineno: int, message: str) -> ValueError:
    return ValueError(f"{path}:{lineno}: {message}")


def read_matrix_market(path) -> np.ndarray:
    """Read a real MatrixMarket file (array or coordinate, general or symmetric).

    Symmetric storage is expanded to the full matrix.  Malformed headers,
    out-of-bounds indices, and non-real fields raise ``ValueError`` with
    the offending line number.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    if not lines:
        raise _mm_error(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise _mm_error(path, 1, f"malformed MatrixMarket header: {lines[0].rstrip()!r}")
    fmt, field_kind, symmetry = (tok.lower() for tok in header[2:5])
    if fmt not in ("array", "coordinate"):
        raise _mm_error(path, 1, f"unsupported format {fmt!r}")
    if field_kind != "real":
        raise _mm_error(path, 1, f"unsupported field {field_kind!r} (only real)")
    if symmetry not in ("general", "symmetric"):
        raise _mm_error(path, 1, f"unsupported symmetry {symmetry!r}")

    # skip comments / blanks to the size line
    idx = 1
    while idx < len(lines) and (lines[idx].startswith("%") or not lines[idx].strip()):
        idx += 1
    if idx >= len(lines):
        raise _mm_error(path, len(lines), "missing size line")
    size_tokens = lines[idx].split()
    lineno = idx + 1

    def _parse_int(tok, what):
        try:
            value = int(tok)
        except ValueError:
            raise _mm_error(path, lineno, f"invalid {what}: {tok!r}") from None
        return value

    if fmt == "array":
        if len(size_tokens) != 2:
            raise _mm_error(path, lineno, "array size line must be 'rows cols'")
        rows = _parse_int(size_tokens[0], "row count")
        cols = _parse_int(size_tokens[1], "column count")
        if rows < 1 or cols < 1:
            raise _mm_error(path, lineno, "dimensions must be positive")
        if symmetry == "symmetric" and rows != cols:
            raise _mm_error(path, lineno, "symmetric matrices must be square")
        out = np.zeros((rows, cols))
        if symmetry == "general":
            coords = [(i, j) for j in range(cols) for i in range(rows)]
        else:
            coords = [(i, j) for j in range(cols) for i in range(j, rows)]
        pos = 0
        for offset, line in enumerate(lines[idx + 1 :], start=idx + 2):
            text = line.strip()
            if not text or text.startswith("%"):
                continue
            for tok in text.split():
                if pos >= len(coords):
                    raise _mm_error(path, offset, "more entries than rows*cols")
                try:
                    value = float(tok)
                except ValueError:
                    raise _mm_error(path, offset, f"non-real value {tok!r}") from None
                i, j = coords[pos]
                out[i, j] = value
                if symmetry == "symmetric":
                    out[j, i] = value
                pos += 1
        if pos != len(coords):
            raise _mm_error(path, len(lines), f"expected {len(coords)} entries, got {pos}")
        return as_matrix(out, "matrix-market data")

    # coordinate
    if len(size_tokens) != 3:
        raise _mm_error(path, lineno, "coordinate size line must be 'rows cols nnz'")
    rows = _parse_int(size_tokens[0], "row count")
    cols = _parse_int(size_tokens[1], "column count")
    nnz = _parse_int(size_tokens[2], "non-zero count")
    if rows < 1 or cols < 1 or nnz < 0:
        raise _mm_error(path, lineno, "sizes must be positive")
    if symmetry == "symmetric" and rows != cols:
        raise _mm_error(path, lineno, "symmetric matrices must be square")
    out = np.zeros((rows, cols))
    seen = 0
    for offset, line in enumerate(lines[idx + 1 :], start=idx + 2):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        tokens = text.split()
        if len(tokens) != 3:
            raise _mm_error(path, offset, f"expected 'i j value', got {text!r}")
        lineno = offset
        i = _parse_int(tokens[0], "row index")
        j = _parse_int(tokens[1], "column index")
        try:
            value = float(tokens[2])
        except ValueError:
            raise _mm_error(path, offset, f"non-real value {tokens[2]!r}") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise _mm_error(path, offset, f"index ({i}, {j}) out of bounds for {rows}x{cols}")
        out[i - 1, j - 1] = value
        if symmetry == "symmetric":
            out[j - 1, i - 1] = value
        seen += 1
    if seen != nnz:
        raise _mm_error(path, len(lines), f"expected {nnz} entries, got {seen}")
    return as_matrix(out, "matrix-market data")


def write_matrix_market(a, path, symmetric: bool = False) -> None:
    """Write a dense real matrix in MatrixMarket array format."""
    a = as_matrix(a, "a")
    rows, cols = a.shape
    if symmetric and rows != cols:
        raise ValueError("symmetric output needs a square matrix")
    symmetry = "symmetric" if symmetric else "general"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix array real {symmetry}\n")
        fh.write(f"{rows} {cols}\n")
        for j in range(cols):
            start = j if symmetric else 0
            for i in range(start, rows):
                fh.write(f"{float(a[i, j])!r}\n")


# ---------------------------------------------------------------------------
# binary cache
# ---------------------------------------------------------------------------


def write_binary(a, path) -> None:
    """Write the ``SKPW`` binary cache format (bit-exact round trip)."""
    a = as_matrix(a, "a")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION]))
        fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_binary(path) -> np.ndarray:
    """Read a ``SKPW`` binary cache file; truncated or corrupt files raise."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 21:
        raise ValueError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    if blob[4] != _VERSION:
        raise ValueError(f"{path}: unsupported version {blob[4]}")
    rows, cols = struct.unpack("<QQ", blob[5:21])
    expected = 21 + rows * cols * 8
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=21).reshape(rows, cols)
    return as_matrix(data.astype(np.float64), "binary data")


# ---------------------------------------------------------------------------
# trial records
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    """One benchmark measurement row.

    ``time_ms`` is the cumulative wall time of the algorithm up to this
    iterate, so it is non-decreasing in ``q_iter`` within one
    (method, trial) series.
    """

    method: str
    dataset: str
    m: int
    n: int
    k: int
    l: int
    r1: int
    r2: int
    s: int
    q_iter: int
    eps: float
    seed: int
    trial: int
    time_ms: float
    spec_err: float
    frob_err: float
    rel_err: float


_RECORD_FIELDS = [f.name for f in fields(TrialRecord)]
_INT_FIELDS = {"m", "n", "k", "l", "r1", "r2", "s", "q_iter", "seed", "trial"}


def _record_key(rec: TrialRecord) -> tuple:
    return tuple(
        getattr(rec, name) for name in _RECORD_FIELDS if name not in ("q_iter", "time_ms", "spec_err", "frob_err", "rel_err")
    )


def write_records_csv(records, path) -> None:
    """Write trial records with the canonical column order (lossless floats)."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORD_FIELDS)
        for rec in records:
            writer.writerow(_format_record(rec))


def _format_record(rec: TrialRecord) -> list[str]:
    row = []
    for name in _RECORD_FIELDS:
        value = getattr(rec, name)
        if name in ("method", "dataset"):
            row.append(str(value))
        elif name in _INT_FIELDS:
            row.append(str(int(value)))
        else:
            row.append(repr(float(value)))
    return row


def read_records_csv(path) -> list[TrialRecord]:
    """Read trial records; validates the header and time_ms monotonicity."""
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != _RECORD_FIELDS:
            raise ValueError(f"{path}: unexpected header {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_RECORD_FIELDS):
                raise ValueError(f"{path}:{lineno}: expected {len(_RECORD_FIELDS)} fields")
            kwargs = {}
            for name, tok in zip(_RECORD_FIELDS, row):
                if name in ("method", "dataset"):
                    kwargs[name] = tok
                elif name in _INT_FIELDS:
                    kwargs[name] = int(tok)
                else:
                    kwargs[name] = float(tok)
            records.append(TrialRecord(**kwargs))
    last_time: dict[tuple, float] = {}
    for rec in records:
        key = _record_key(rec)
        if key in last_time and rec.time_ms < last_time[key]:
            raise ValueError(
                f"{path}: time_ms decreases within series {rec.method}/trial {rec.trial}"
            )
        last_time[key] = rec.time_ms
    return records
