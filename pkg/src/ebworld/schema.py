"""Categorical attribute schema, one-hot encoding, datasets and synthetic markets.

Index layout is deterministic: one-hot groups in declaration order, then
binary flags, so the visible vector of any profile can be addressed by
pure index arithmetic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SchemaError",
    "InvalidVectorError",
    "IngestError",
    "AttributeSchema",
    "Profile",
    "Dataset",
    "SyntheticConfig",
    "encode",
    "decode",
    "check_visible",
    "ingest",
    "save_dataset",
    "generate_synthetic_market",
    "split",
    "parse_schema_text",
    "format_schema_text",
    "load_schema",
    "save_schema",
]

SCHEMA_HEADER = "# ebworld schema v1"


class SchemaError(ValueError):
    """Profile or file does not match the attribute schema."""


class InvalidVectorError(ValueError):
    """Visible vector violates one-hot / binary constraints."""


class IngestError(ValueError):
    """Fatal dataset ingestion failure (strict mode or unreadable input)."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered one-hot groups plus binary flags describing the visible layer."""

    groups: tuple[tuple[str, tuple[str, ...]], ...]
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        names = [g for g, _ in self.groups] + list(self.flags)
        if len(set(names)) != len(names):
            raise SchemaError("group and flag names must be unique")
        for gname, cats in self.groups:
            if not cats:
                raise SchemaError(f"group {gname!r} has no categories")
            if len(set(cats)) != len(cats):
                raise SchemaError(f"duplicate category in group {gname!r}")

    @property
    def visible_dim(self) -> int:
        return sum(len(cats) for _, cats in self.groups) + len(self.flags)

    def group_names(self) -> list[str]:
        return [g for g, _ in self.groups]

    def categories(self, group: str) -> tuple[str, ...]:
        for g, cats in self.groups:
            if g == group:
                return cats
        raise SchemaError(f"unknown group {group!r}")

    def group_slice(self, group: str) -> slice:
        """Index range of a group's one-hot block in the visible vector."""
        start = 0
        for g, cats in self.groups:
            if g == group:
                return slice(start, start + len(cats))
            start += len(cats)
        raise SchemaError(f"unknown group {group!r}")

    def unit_index(self, group: str, category: str) -> int:
        sl = self.group_slice(group)
        cats = self.categories(group)
        if category not in cats:
            raise SchemaError(f"unknown category {category!r} in group {group!r}")
        return sl.start + cats.index(category)

    def flag_index(self, flag: str) -> int:
        if flag not in self.flags:
            raise SchemaError(f"unknown flag {flag!r}")
        return sum(len(cats) for _, cats in self.groups) + self.flags.index(flag)


@dataclass(frozen=True)
class Profile:
    """One category per group plus 0/1 flags; optionally paired review text."""

    assignments: dict[str, str]
    flags: dict[str, int] = field(default_factory=dict)
    text: str | None = None

    def without_text(self) -> "Profile":
        return Profile(dict(self.assignments), dict(self.flags))


def encode(profile: Profile, schema: AttributeSchema) -> np.ndarray:
    """One-hot encode a profile into a binary visible vector of length J."""
    v = np.zeros(schema.visible_dim, dtype=np.uint8)
    seen = set()
    for group, category in profile.assignments.items():
        v[schema.unit_index(group, category)] = 1
        seen.add(group)
    missing = set(schema.group_names()) - seen
    if missing:
        raise SchemaError(f"profile missing groups: {sorted(missing)}")
    for flag, bit in profile.flags.items():
        if bit not in (0, 1):
            raise SchemaError(f"flag {flag!r} must be 0 or 1, got {bit!r}")
        v[schema.flag_index(flag)] = bit
    return v


def check_visible(v: np.ndarray, schema: AttributeSchema) -> None:
    """Raise InvalidVectorError unless v satisfies the one-hot invariants."""
    v = np.asarray(v)
    if v.shape != (schema.visible_dim,):
        raise InvalidVectorError(
            f"expected length {schema.visible_dim}, got shape {v.shape}"
        )
    if not np.isin(v, (0, 1)).all():
        raise InvalidVectorError("vector entries must be 0 or 1")
    for group, _ in schema.groups:
        hot = int(v[schema.group_slice(group)].sum())
        if hot != 1:
            raise InvalidVectorError(f"group {group!r} has {hot} hot bits, expected 1")


def decode(v: np.ndarray, schema: AttributeSchema) -> Profile:
    """Inverse of encode (text is not recoverable)."""
    check_visible(v, schema)
    assignments = {}
    for group, cats in schema.groups:
        sl = schema.group_slice(group)
        assignments[group] = cats[int(np.argmax(v[sl]))]
    flags = {f: int(v[schema.flag_index(f)]) for f in schema.flags}
    return Profile(assignments, flags)


# ---------------------------------------------------------------------------
# Schema file format
# ---------------------------------------------------------------------------


def format_schema_text(schema: AttributeSchema) -> str:
    lines = [SCHEMA_HEADER]
    for group, cats in schema.groups:
        lines.append(f"group {group}: " + ", ".join(cats))
    for flag in schema.flags:
        lines.append(f"flag {flag}")
    return "\n".join(lines) + "\n"


def parse_schema_text(text: str) -> AttributeSchema:
    groups: list[tuple[str, tuple[str, ...]]] = []
    flags: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("group "):
            body = line[len("group "):]
            if ":" not in body:
                raise SchemaError(f"line {lineno}: expected 'group NAME: c1, c2'")
            name, cats = body.split(":", 1)
            cat_list = tuple(c.strip() for c in cats.split(",") if c.strip())
            groups.append((name.strip(), cat_list))
        elif line.startswith("flag "):
            flags.append(line[len("flag "):].strip())
        else:
            raise SchemaError(f"line {lineno}: unrecognized directive {line!r}")
    return AttributeSchema(tuple(groups), tuple(flags))


def load_schema(path) -> AttributeSchema:
    with open(path, encoding="utf-8") as fh:
        return parse_schema_text(fh.read())


def save_schema(schema: AttributeSchema, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_schema_text(schema))


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Profiles with their encodings and optional train/val/test labels."""

    schema: AttributeSchema
    profiles: list[Profile]
    vectors: np.ndarray  # (n, J) uint8
    splits: np.ndarray | None = None  # (n,) of str labels, "" = unassigned

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.profiles):
            raise ValueError("vectors must be (n_records, J)")
        if self.splits is None:
            self.splits = np.full(len(self.profiles), "", dtype=object)

    def __len__(self) -> int:
        return len(self.profiles)

    def subset(self, label: str) -> "Dataset":
        mask = self.splits == label
        return Dataset(
            self.schema,
            [p for p, m in zip(self.profiles, mask) if m],
            self.vectors[mask],
            self.splits[mask].copy(),
        )


def _empty_dataset(schema: AttributeSchema) -> Dataset:
    return Dataset(schema, [], np.zeros((0, schema.visible_dim), dtype=np.uint8))


def dataset_header(schema: AttributeSchema, with_text: bool) -> list[str]:
    cols = schema.group_names() + list(schema.flags)
    if with_text:
        cols.append("text")
    return cols


def ingest(path, schema: AttributeSchema, strict: bool = False):
    """Read a delimited dataset file.

    Returns (Dataset, errors) where errors is a list of per-row messages
    carrying 1-based line numbers. In strict mode the first bad row raises
    IngestError instead.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    errors: list[str] = []
    if not rows:
        return _empty_dataset(schema), ["empty file"]

    header = rows[0]
    expected = dataset_header(schema, with_text=False)
    has_text = header == expected + ["text"]
    if not has_text and header != expected:
        raise IngestError(
            f"header {header!r} does not match schema columns {expected!r}"
        )

    profiles: list[Profile] = []
    vecs: list[np.ndarray] = []
    n_cols = len(header)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            if len(row) != n_cols:
                raise SchemaError(f"expected {n_cols} columns, got {len(row)}")
            assignments = dict(zip(schema.group_names(), row))
            flag_vals = row[len(schema.groups):len(schema.groups) + len(schema.flags)]
            flags = {}
            for name, val in zip(schema.flags, flag_vals):
                if val not in ("0", "1"):
                    raise SchemaError(f"flag {name!r} must be 0/1, got {val!r}")
                flags[name] = int(val)
            text = row[-1] if has_text else None
            profile = Profile(assignments, flags, text)
            vecs.append(encode(profile, schema))
            profiles.append(profile)
        except SchemaError as exc:
            msg = f"line {lineno}: {exc}"
            if strict:
                raise IngestError(msg) from exc
            errors.append(msg)

    vectors = (
        np.stack(vecs) if vecs else np.zeros((0, schema.visible_dim), dtype=np.uint8)
    )
    return Dataset(schema, profiles, vectors), errors


def save_dataset(dataset: Dataset, path) -> None:
    with_text = any(p.text is not None for p in dataset.profiles)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset_header(dataset.schema, with_text))
        for p in dataset.profiles:
            row = [p.assignments[g] for g in dataset.schema.group_names()]
            row += [str(p.flags.get(f, 0)) for f in dataset.schema.flags]
            if with_text:
                row.append(p.text or "")
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Synthetic planted-structure markets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Generative tables for a planted market.

    group_tables maps each group either to a marginal {category: p} or to a
    conditional ("given", parent_group, {parent_cat: {category: p}}). Parents
    must be declared earlier in the schema. flag_probs maps flag -> P(flag=1).
    """

    n_samples: int
    group_tables: dict[str, object]
    flag_probs: dict[str, float] = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "SyntheticConfig":
        return SyntheticConfig(
            n_samples=int(d["n"]),
            group_tables=dict(d["groups"]),
            flag_probs=dict(d.get("flags", {})),
        )


def _check_row(probs: dict[str, float], cats, context: str):
    if set(probs) != set(cats):
        raise SchemaError(f"{context}: categories {sorted(probs)} != {sorted(cats)}")
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise SchemaError(f"{context}: probabilities sum to {total}, not 1")


def generate_synthetic_market(
    schema: AttributeSchema, config: SyntheticConfig, seed: int
) -> Dataset:
    """Draw i.i.d. records from the configured conditional probability tables."""
    rng = np.random.default_rng(seed)

    # Validate all tables up front so a bad config fails before sampling.
    order = schema.group_names()
    for group in order:
        cats = schema.categories(group)
        table = config.group_tables.get(group)
        if table is None:
            raise SchemaError(f"no generative table for group {group!r}")
        if "given" in table:
            parent = table["given"]
            if parent not in order or order.index(parent) >= order.index(group):
                raise SchemaError(f"group {group!r}: parent {parent!r} must precede it")
            for pcat in schema.categories(parent):
                if pcat not in table["probs"]:
                    raise SchemaError(f"group {group!r}: no row for {parent}={pcat}")
                _check_row(table["probs"][pcat], cats, f"{group}|{parent}={pcat}")
        else:
            _check_row(table["probs"], cats, group)

    profiles: list[Profile] = []
    vecs: list[np.ndarray] = []
    for _ in range(config.n_samples):
        assignments: dict[str, str] = {}
        for group in order:
            cats = schema.categories(group)
            table = config.group_tables[group]
            if "given" in table:
                probs = table["probs"][assignments[table["given"]]]
            else:
                probs = table["probs"]
            p = np.array([probs[c] for c in cats])
            assignments[group] = cats[rng.choice(len(cats), p=p / p.sum())]
        flags = {
            f: int(rng.random() < config.flag_probs.get(f, 0.0)) for f in schema.flags
        }
        profile = Profile(assignments, flags)
        profiles.append(profile)
        vecs.append(encode(profile, schema))

    vectors = (
        np.stack(vecs) if vecs else np.zeros((0, schema.visible_dim), dtype=np.uint8)
    )
    return Dataset(schema, profiles, vectors)


def split(dataset: Dataset, sizes: dict[str, int], seed: int) -> Dataset:
    """Assign disjoint split labels by a seeded permutation; returns a new Dataset."""
    total = sum(sizes.values())
    if total > len(dataset):
        raise ValueError(f"split sizes sum to {total} > {len(dataset)} records")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(dataset))
    labels = np.full(len(dataset), "", dtype=object)
    start = 0
    for name, size in sizes.items():
        labels[perm[start:start + size]] = name
        start += size
    return Dataset(dataset.schema, list(dataset.profiles), dataset.vectors.copy(), labels)
