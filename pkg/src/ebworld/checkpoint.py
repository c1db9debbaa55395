"""Self-describing DBM checkpoint files.

Structured-text header (magic, version, embedded schema snapshot, layer
dims, provenance) followed by little-endian float32 tensors in a fixed
order: W^(1..L), visible bias, c^(1..L). Loadable without the original
schema file; save -> load -> save is byte-identical.
"""

from __future__ import annotations

import numpy as np

from .dbm import DbmParams
from .schema import AttributeSchema, format_schema_text, parse_schema_text

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = "EBWORLD-CKPT"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, wrong-version, or schema-incompatible checkpoint."""


def save_checkpoint(path, schema: AttributeSchema, params: DbmParams,
                    provenance: dict[str, str] | None = None) -> None:
    schema_text = format_schema_text(schema)
    dims = params.layer_dims
    header = [
        f"{MAGIC} v{VERSION}",
        f"layers {' '.join(str(d) for d in dims)}",
        f"schema-lines {len(schema_text.splitlines())}",
        schema_text.rstrip("\n"),
    ]
    for key in sorted(provenance or {}):
        header.append(f"provenance {key}={provenance[key]}")
    header.append("END-HEADER")
    tensors = [*params.weights, params.visible_bias, *params.hidden_biases]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("utf-8"))
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Returns (schema, params, provenance)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"END-HEADER\n"
    split_at = blob.find(marker)
    if split_at < 0:
        raise CheckpointError("missing END-HEADER")
    header_lines = blob[:split_at].decode("utf-8").splitlines()
    payload = blob[split_at + len(marker):]

    if not header_lines or not header_lines[0].startswith(MAGIC):
        raise CheckpointError("bad magic")
    version = header_lines[0].split(" v")[-1]
    if version != str(VERSION):
        raise CheckpointError(f"unsupported checkpoint version {version!r}")

    it = iter(header_lines[1:])
    dims: list[int] = []
    schema: AttributeSchema | None = None
    provenance: dict[str, str] = {}
    for line in it:
        if line.startswith("layers "):
            dims = [int(x) for x in line.split()[1:]]
        elif line.startswith("schema-lines "):
            n = int(line.split()[1])
            schema_text = "\n".join(next(it) for _ in range(n)) + "\n"
            schema = parse_schema_text(schema_text)
        elif line.startswith("provenance "):
            key, _, value = line[len("provenance "):].partition("=")
            provenance[key] = value
        else:
            raise CheckpointError(f"unrecognized header line {line!r}")
    if schema is None or not dims:
        raise CheckpointError("incomplete header")
    if schema.visible_dim != dims[0]:
        raise CheckpointError(
            f"schema visible_dim {schema.visible_dim} != checkpoint J {dims[0]}"
        )

    flat = np.frombuffer(payload, dtype="<f4").astype(float)
    L = len(dims) - 1
    expected = sum(dims[l] * dims[l + 1] for l in range(L)) + sum(dims)
    if flat.size != expected:
        raise CheckpointError(f"payload has {flat.size} floats, expected {expected}")

    pos = 0

    def take(n):
        nonlocal pos
        out = flat[pos:pos + n]
        pos += n
        return out

    weights = tuple(
        take(dims[l] * dims[l + 1]).reshape(dims[l], dims[l + 1]) for l in range(L)
    )
    visible_bias = take(dims[0])
    hidden_biases = tuple(take(dims[l + 1]) for l in range(L))
    return schema, DbmParams(weights, visible_bias, hidden_biases), provenance
