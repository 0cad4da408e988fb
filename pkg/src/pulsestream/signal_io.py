"""Plain-text signal files.

Sparse vectors: CSV with header ``index,value``, one nonzero per row.
Dense vectors: one float per line.  Multi-dimensional signals are stored
flattened row-major with a JSON sidecar ``{"shape": [r, c]}`` next to the
data file (same stem, ``.json`` suffix).  Floats are written with 17
significant digits so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import SignalFormatError
from .signal_model import Domain

__all__ = [
    "FORMATS",
    "format_float",
    "write_dense",
    "read_dense",
    "write_sparse",
    "read_sparse",
    "read_signal",
    "write_signal",
    "sidecar_path",
]

FORMATS = ("csv_dense", "csv_sparse")
SPARSE_HEADER = ("index", "value")


def format_float(v: float) -> str:
    return "%.17g" % float(v)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _write_sidecar(path: Path, domain: Domain) -> None:
    if domain.ndim > 1:
        sidecar_path(path).write_text(json.dumps({"shape": list(domain.shape)}) + "\n")


def _read_domain(path: Path, size: int | None) -> Domain | None:
    side = sidecar_path(path)
    if not side.exists():
        return None if size is None else Domain((size,))
    try:
        meta = json.loads(side.read_text())
        shape = tuple(int(n) for n in meta["shape"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SignalFormatError(f"{side}: bad shape sidecar ({exc})") from exc
    return Domain(shape)


def _parse_float(text: str, path: Path, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise SignalFormatError(f"{path}:{line}: cannot parse {text!r} as a float") from None
    if not math.isfinite(v):
        raise SignalFormatError(f"{path}:{line}: non-finite value {text!r}")
    return v


def write_dense(path, z, domain: Domain | None = None) -> None:
    path = Path(path)
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise SignalFormatError("refusing to write non-finite values")
    domain = Domain((z.size,)) if domain is None else domain
    if domain.size != z.size:
        raise SignalFormatError(f"{z.size} values for domain {domain.shape}")
    path.write_text("".join(format_float(v) + "\n" for v in z))
    _write_sidecar(path, domain)


def read_dense(path) -> tuple[np.ndarray, Domain]:
    path = Path(path)
    values = []
    with path.open() as fh:
        for line, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            values.append(_parse_float(text, path, line))
    z = np.array(values, dtype=float)
    domain = _read_domain(path, z.size)
    if domain.size != z.size:
        raise SignalFormatError(f"{path}: {z.size} values but sidecar shape {domain.shape}")
    return z, domain


def write_sparse(path, z, domain: Domain | None = None) -> None:
    path = Path(path)
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise SignalFormatError("refusing to write non-finite values")
    domain = Domain((z.size,)) if domain is None else domain
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPARSE_HEADER)
        for i in np.flatnonzero(z):
            w.writerow((int(i), format_float(z[i])))
    # the length is not recoverable from the nonzeros alone
    sidecar_path(path).write_text(json.dumps({"shape": list(domain.shape)}) + "\n")


def read_sparse(path, size: int | None = None) -> tuple[np.ndarray, Domain]:
    """Read a sparse CSV.

    The length comes from the JSON sidecar when present, else from ``size``,
    else from the largest index plus one.
    """
    path = Path(path)
    entries: dict[int, float] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SPARSE_HEADER:
            raise SignalFormatError(f"{path}:1: expected header 'index,value'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise SignalFormatError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                idx = int(row[0])
            except ValueError:
                raise SignalFormatError(f"{path}:{line}: bad index {row[0]!r}") from None
            if idx < 0:
                raise SignalFormatError(f"{path}:{line}: negative index {idx}")
            if idx in entries:
                raise SignalFormatError(f"{path}:{line}: duplicate index {idx}")
            entries[idx] = _parse_float(row[1].strip(), path, line)
    domain = _read_domain(path, size)
    if domain is None:
        domain = Domain((max(entries) + 1 if entries else 1,))
    z = np.zeros(domain.size)
    for idx, v in entries.items():
        if idx >= domain.size:
            raise SignalFormatError(f"{path}: index {idx} outside a signal of size {domain.size}")
        z[idx] = v
    return z, domain


def read_signal(path, fmt: str) -> tuple[np.ndarray, Domain]:
    if fmt == "csv_dense":
        return read_dense(path)
    if fmt == "csv_sparse":
        return read_sparse(path)
    raise SignalFormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def write_signal(path, z, fmt: str, domain: Domain | None = None) -> None:
    if fmt == "csv_dense":
        write_dense(path, z, domain)
    elif fmt == "csv_sparse":
        write_sparse(path, z, domain)
    else:
        raise SignalFormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
