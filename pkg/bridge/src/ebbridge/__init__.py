"""Soft-prompt bridge from belief-state exports to a frozen causal language model.

Consumes the belief-export and dataset file formats produced by the
`ebworld` command-line tool, projects belief vectors into soft-prompt
embeddings for a small frozen causal language model, and provides
generation, sentiment scoring, evaluation metrics, and intervention
propagation analyses on top of that pipeline.
"""

__version__ = "0.1.0"
