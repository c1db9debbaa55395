"""Helpers shared by the bridge tests."""

import numpy as np

from ebbridge.generate import GenerationConfig, generate
from ebbridge.io import BeliefSet, DatasetRecords


def records_subset(records: DatasetRecords, beliefs: BeliefSet, idx):
    sub = DatasetRecords(records.columns,
                         tuple(records.rows[i] for i in idx),
                         tuple(records.texts[i] for i in idx))
    return sub, BeliefSet(beliefs.matrix[np.asarray(idx, dtype=int)],
                          beliefs.hidden_dims)


def generate_batch(bridge, records: DatasetRecords,
                   beliefs: BeliefSet | None, seed: int = 0):
    """One generation per record; beliefs=None is the prompt-only baseline."""
    lm, vocab, template = bridge["lm"], bridge["vocab"], bridge["template"]
    adapter = bridge["adapter"] if beliefs is not None else None
    out = []
    for i, row in enumerate(records.rows):
        cfg = GenerationConfig(0.7, 100, seed + i)
        belief = beliefs.matrix[i] if beliefs is not None else None
        out.append(generate(lm, vocab, template.render(row), cfg,
                            adapter, belief))
    return out
