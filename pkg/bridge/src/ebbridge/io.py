"""Readers for the upstream belief-export and dataset file formats.

The belief export comes in two documented variants:

* text — one record per line: id, then the concatenated per-unit
  activation floats, comma-delimited;
* binary — magic ``EBWBELIEF1``, then little-endian uint32 fields
  (layer count, per-layer widths, record count) and a float32 row-major
  payload.

The dataset file is a UTF-8 comma-delimited table whose header names the
attribute groups, with an optional quoted ``text`` column holding the
paired review.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

__all__ = ["BeliefSet", "DatasetRecords", "read_beliefs", "read_dataset",
           "write_dataset"]

BELIEF_MAGIC = b"EBWBELIEF1"


@dataclass(frozen=True)
class BeliefSet:
    """Belief vectors for a batch of records, one row per record."""

    matrix: np.ndarray          # (n, sum of layer widths)
    hidden_dims: tuple[int, ...] | None = None   # known for binary files
    ids: tuple[str, ...] | None = None           # known for text files

    def __len__(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DatasetRecords:
    """Rows of a dataset file: per-row category assignments plus text."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]      # column -> category value
    texts: tuple[str, ...]      # empty string where absent

    def __len__(self) -> int:
        return len(self.rows)


def read_beliefs(path) -> BeliefSet:
    """Read either belief-export variant, sniffing the binary magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(BELIEF_MAGIC))
    if head == BELIEF_MAGIC:
        return _read_binary(path)
    return _read_text(path)


def _read_binary(path) -> BeliefSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = len(BELIEF_MAGIC)
    (n_layers,) = struct.unpack_from("<I", blob, off)
    off += 4
    dims = struct.unpack_from(f"<{n_layers}I", blob, off)
    off += 4 * n_layers
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    width = sum(dims)
    matrix = np.frombuffer(blob, dtype="<f4", offset=off).astype(float)
    if matrix.size != count * width:
        raise ValueError(f"belief payload has {matrix.size} floats, "
                         f"expected {count}x{width}")
    return BeliefSet(matrix.reshape(count, width), tuple(dims))


def _read_text(path) -> BeliefSet:
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    matrix = np.array(rows) if rows else np.zeros((0, 0))
    return BeliefSet(matrix, ids=tuple(ids))


def read_dataset(path) -> DatasetRecords:
    with open(path, encoding="utf-8", newline="") as fh:
        raw = list(csv.reader(fh))
    if not raw:
        return DatasetRecords((), (), ())
    header = raw[0]
    has_text = header and header[-1] == "text"
    cat_cols = header[:-1] if has_text else header
    rows, texts = [], []
    for lineno, row in enumerate(raw[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, "
                             f"got {len(row)}")
        rows.append(dict(zip(cat_cols, row)))
        texts.append(row[-1] if has_text else "")
    return DatasetRecords(tuple(cat_cols), tuple(rows), tuple(texts))


def write_dataset(records: DatasetRecords, path) -> None:
    with_text = any(records.texts)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(records.columns) + (["text"] if with_text else []))
        for row, text in zip(records.rows, records.texts):
            line = [row[c] for c in records.columns]
            if with_text:
                line.append(text)
            writer.writerow(line)
