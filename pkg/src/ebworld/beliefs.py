"""Belief-state export formats.

Text: one record per line, id then the concatenated mean-field floats.
Binary: magic, L, H_1..H_L, count as little-endian uint32, then float32
payload row-major.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["write_beliefs_text", "read_beliefs_text",
           "write_beliefs_binary", "read_beliefs_binary"]

BELIEF_MAGIC = b"EBWBELIEF1"


def write_beliefs_text(path, ids, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid, row in zip(ids, matrix):
            fh.write(str(rid) + "," + ",".join(f"{x:.9g}" for x in row) + "\n")


def read_beliefs_text(path):
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    return ids, np.array(rows)


def write_beliefs_binary(path, hidden_dims, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype="<f4"))
    if matrix.shape[1] != sum(hidden_dims):
        raise ValueError(f"row width {matrix.shape[1]} != sum of {hidden_dims}")
    with open(path, "wb") as fh:
        fh.write(BELIEF_MAGIC)
        fh.write(struct.pack("<I", len(hidden_dims)))
        fh.write(struct.pack(f"<{len(hidden_dims)}I", *hidden_dims))
        fh.write(struct.pack("<I", matrix.shape[0]))
        fh.write(np.ascontiguousarray(matrix).tobytes())


def read_beliefs_binary(path):
    """Returns (hidden_dims, matrix)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(BELIEF_MAGIC):
        raise ValueError("bad belief-file magic")
    off = len(BELIEF_MAGIC)
    (L,) = struct.unpack_from("<I", blob, off)
    off += 4
    dims = struct.unpack_from(f"<{L}I", blob, off)
    off += 4 * L
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    matrix = np.frombuffer(blob, dtype="<f4", offset=off).astype(float)
    return list(dims), matrix.reshape(count, sum(dims))
