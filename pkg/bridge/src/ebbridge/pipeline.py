"""Desk-scale end-to-end pipeline over the upstream world-model CLI.

Builds a planted synthetic market where review sentiment is driven by
the rating attribute only, trains the upstream energy model through its
command-line interface, and exports belief states for the bridge. All
upstream interaction goes through files: schema, dataset, checkpoint,
and belief exports.
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import BeliefSet, DatasetRecords, read_beliefs, read_dataset, \
    write_dataset

__all__ = ["ToyWorld", "SCHEMA_TEXT", "make_review", "run_upstream",
           "build_world", "intervene_records", "export_beliefs_for",
           "pretrain_corpus", "reviewed_subset"]

SCHEMA_TEXT = """\
# ebworld schema v1
group brand: Lux, Generic
group price: low, mid, high
group rating: 1, 2, 3, 4, 5
"""

# Rating is sampled independently of brand and price, and review text
# depends on rating alone, so only rating interventions should move
# sentiment downstream.
SYNTH_TABLES = {
    "brand": {"probs": {"Lux": 0.5, "Generic": 0.5}},
    "price": {"probs": {"low": 0.34, "mid": 0.33, "high": 0.33}},
    "rating": {"probs": {"1": 0.2, "2": 0.2, "3": 0.2, "4": 0.2, "5": 0.2}},
}

REVIEW_POOLS = {
    "neg": (
        "this product is terrible and broke quickly",
        "awful quality very disappointed with it",
        "horrible item does not work at all",
        "bad purchase waste of money total junk",
        "flimsy and useless i regret buying it",
        "worst product ever want a refund now",
    ),
    "neu": (
        "it is okay and does the job",
        "average product nothing special about it",
        "fine for the price it works",
        "it arrived on time and functions",
    ),
    "pos": (
        "this product is great and works well",
        "really love it excellent quality overall",
        "amazing value very happy with it",
        "fantastic item works perfectly every time",
        "sturdy reliable and nice to use",
        "best purchase ever totally recommend it",
    ),
}

RATING_BUCKET = {"1": "neg", "2": "neg", "3": "neu", "4": "pos", "5": "pos"}

# Fraction of records that carry a review at all; the rest are
# prompt-only, as in real catalogues where most purchases go unreviewed.
TEXT_RATE = 0.6


def make_review(rating: str, rng: np.random.Generator,
                text_rate: float = TEXT_RATE) -> str:
    """A rating-driven review, or empty for an unreviewed record."""
    if rng.random() >= text_rate:
        return ""
    pool = REVIEW_POOLS[RATING_BUCKET[rating]]
    return pool[int(rng.integers(len(pool)))]


def pretrain_corpus(records: DatasetRecords, template, seed: int = 0):
    """Prompt+review pretraining texts with the rating field decorrelated.

    Each review keeps its record's brand/price prompt fields but gets a
    uniformly random rating value, so the language model learns the
    prompt layout and fluent review text without learning to read the
    sentiment off the prompt. Sentiment conditioning is then only
    reachable through the soft prompts. Unreviewed records contribute
    bare prompts, so the model also learns that a prompt alone often
    ends without any review.
    """
    rng = np.random.default_rng(seed)
    ratings = sorted({row["rating"] for row in records.rows})
    texts = []
    for row, review in zip(records.rows, records.texts):
        scrambled = {**row, "rating": ratings[int(rng.integers(len(ratings)))]}
        prompt = template.render(scrambled)
        texts.append(f"{prompt} {review}" if review else prompt)
    return texts


def reviewed_subset(records: DatasetRecords, beliefs: BeliefSet | None = None):
    """Restrict to records that carry review text, beliefs in step."""
    idx = [i for i, t in enumerate(records.texts) if t]
    sub = DatasetRecords(records.columns,
                         tuple(records.rows[i] for i in idx),
                         tuple(records.texts[i] for i in idx))
    if beliefs is None:
        return sub
    return sub, BeliefSet(beliefs.matrix[idx], beliefs.hidden_dims)


def run_upstream(*args: str) -> None:
    """Invoke the upstream CLI; raises on a non-zero exit code."""
    proc = subprocess.run([sys.executable, "-m", "ebworld.cli", *args],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"upstream command {args[0]} failed "
                           f"(exit {proc.returncode}): {proc.stderr.strip()}")


@dataclass(frozen=True)
class ToyWorld:
    """Paths and loaded artifacts of one pipeline build."""

    root: Path
    checkpoint: Path
    train: DatasetRecords
    test: DatasetRecords
    train_beliefs: BeliefSet
    test_beliefs: BeliefSet


def _attach_reviews(csv_path: Path, rng: np.random.Generator) -> DatasetRecords:
    records = read_dataset(csv_path)
    texts = tuple(make_review(row["rating"], rng) for row in records.rows)
    records = DatasetRecords(records.columns, records.rows, texts)
    write_dataset(records, csv_path)
    return records


def export_beliefs_for(checkpoint: Path, dataset_csv: Path,
                       out_path: Path) -> BeliefSet:
    run_upstream("export-beliefs", "--checkpoint", str(checkpoint),
                 "--dataset", str(dataset_csv), "--format", "binary",
                 "--out", str(out_path))
    return read_beliefs(out_path)


def build_world(root, seed: int = 0, n_train: int = 400,
                n_test: int = 150, layer_sizes=(16, 8),
                cd_epochs: int = 100, pcd_epochs: int = 15) -> ToyWorld:
    """Generate data, train the upstream model, and export beliefs."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    schema_path = root / "schema.txt"
    schema_path.write_text(SCHEMA_TEXT)
    config = {
        "seed": seed,
        "schema": str(schema_path),
        "synthetic": {"n": n_train + n_test, "groups": SYNTH_TABLES},
        "split": {"train": n_train, "test": n_test},
        "layer_sizes": list(layer_sizes),
        "cd": {"epochs": cd_epochs, "learning_rate": 0.1, "batch_size": 32},
        "pcd": {"epochs": pcd_epochs, "chain_count": 50,
                "gibbs_steps_per_update": 3, "learning_rate": 0.02,
                "batch_size": 32},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))

    run_upstream("synth", "--config", str(config_path),
                 "--out", str(root / "data.csv"))
    train_csv = root / "data.csv.train.csv"
    test_csv = root / "data.csv.test.csv"
    rng = np.random.default_rng(seed + 1)
    train = _attach_reviews(train_csv, rng)
    test = _attach_reviews(test_csv, rng)

    run_upstream("pretrain", "--config", str(config_path),
                 "--dataset", str(train_csv), "--out", str(root / "pre.ckpt"))
    checkpoint = root / "model.ckpt"
    run_upstream("finetune", "--config", str(config_path),
                 "--checkpoint", str(root / "pre.ckpt"),
                 "--dataset", str(train_csv), "--out", str(checkpoint))

    train_beliefs = export_beliefs_for(checkpoint, train_csv,
                                       root / "beliefs.train.bin")
    test_beliefs = export_beliefs_for(checkpoint, test_csv,
                                      root / "beliefs.test.bin")
    return ToyWorld(root, checkpoint, train, test, train_beliefs, test_beliefs)


def intervene_records(records: DatasetRecords, group: str,
                      value: str) -> DatasetRecords:
    """Reassign one attribute for every record, keeping texts as-is."""
    if group not in records.columns:
        raise ValueError(f"unknown attribute group {group!r}")
    rows = tuple({**row, group: value} for row in records.rows)
    return DatasetRecords(records.columns, rows, records.texts)
