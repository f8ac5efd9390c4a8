"""Binary and CSV readers/writers for feature matrices and label vectors.

The binary feature format is::

    magic "EMB1" | rows u32 LE | cols u32 LE | rows*cols float32 LE, row-major

and the label format::

    magic "LBL1" | rows u32 LE | rows u32 LE class indices

Readers return float64/int64 arrays (exact upcasts); writers round
features to float32. Paths ending in ``.csv`` are read/written as
headerless comma-separated text instead.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, FormatError, TruncatedPayload, ValidationError

EMB_MAGIC = b"EMB1"
LBL_MAGIC = b"LBL1"
_HEADER = struct.Struct("<4sII")
_LBL_HEADER = struct.Struct("<4sI")


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedPayload(f"{what}: wanted {count} bytes, got {len(data)}")
    return data


def _check_eof(fh) -> None:
    if fh.read(1) != b"":
        raise TruncatedPayload("trailing bytes after payload")


def write_emb(path, matrix) -> None:
    """Write a 2-D matrix as float32 rows (lossy past float32 precision)."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMB_MAGIC, a.shape[0], a.shape[1]))
        fh.write(a.astype("<f4").tobytes(order="C"))


def read_emb(path) -> np.ndarray:
    """Read a binary feature matrix; exact float32-to-float64 upcast."""
    with open(path, "rb") as fh:
        magic, rows, cols = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        if magic != EMB_MAGIC:
            raise BadMagic(EMB_MAGIC, magic)
        payload = _read_exact(fh, 4 * rows * cols, "payload")
        _check_eof(fh)
    a = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return a.astype(np.float64)


def write_labels(path, labels) -> None:
    idx = np.asarray(labels, dtype=np.int64).reshape(-1)
    if idx.size and idx.min() < 0:
        raise ValidationError("label indices must be non-negative")
    with open(path, "wb") as fh:
        fh.write(_LBL_HEADER.pack(LBL_MAGIC, idx.size))
        fh.write(idx.astype("<u4").tobytes())


def read_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, rows = _LBL_HEADER.unpack(_read_exact(fh, _LBL_HEADER.size, "header"))
        if magic != LBL_MAGIC:
            raise BadMagic(LBL_MAGIC, magic)
        payload = _read_exact(fh, 4 * rows, "payload")
        _check_eof(fh)
    return np.frombuffer(payload, dtype="<u4").astype(np.int64)


def _is_csv(path) -> bool:
    return Path(path).suffix.lower() == ".csv"


def read_features(path) -> np.ndarray:
    """Read a feature matrix, dispatching on the file extension."""
    if _is_csv(path):
        try:
            return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise FormatError(f"malformed CSV matrix in {path}: {exc}") from exc
    return read_emb(path)


def read_label_file(path) -> np.ndarray:
    """Read a label vector, dispatching on the file extension."""
    if _is_csv(path):
        try:
            return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=1)
        except ValueError as exc:
            raise FormatError(f"malformed CSV labels in {path}: {exc}") from exc
    return read_labels(path)
