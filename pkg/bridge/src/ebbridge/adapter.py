"""Belief-to-soft-prompt adapter: an MLP trained against a frozen LM.

The adapter maps a belief vector (concatenated per-layer hidden-unit
activations) to K continuous prompt embeddings of the language model's
width. Only the adapter is trained; the language model's parameters are
covered by a checksum contract that is re-verified every epoch.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .lm import BOS, EOS, PAD, TinyCausalLM, Vocab, lm_checksum

__all__ = ["Adapter", "AdapterTrainConfig", "FrozenLmError",
           "project_beliefs", "pair_loss", "train_adapter",
           "save_adapter", "load_adapter"]


class FrozenLmError(RuntimeError):
    """The frozen language model's parameters changed during training."""


class Adapter(nn.Module):
    """One-hidden-layer MLP producing K soft-prompt embeddings.

    Hidden width defaults to four times the belief width; the output is
    reshaped to (K, D) where D is the LM embedding width.
    """

    def __init__(self, belief_dim: int, embed_dim: int, n_prompts: int = 8,
                 hidden_dim: int | None = None):
        super().__init__()
        if belief_dim < 1 or n_prompts < 1:
            raise ValueError("belief_dim and n_prompts must be positive")
        self.belief_dim = belief_dim
        self.embed_dim = embed_dim
        self.n_prompts = n_prompts
        hidden = hidden_dim if hidden_dim is not None else 4 * belief_dim
        self.net = nn.Sequential(
            nn.Linear(belief_dim, hidden),
            nn.Tanh(),
            nn.Linear(hidden, n_prompts * embed_dim),
        )

    def forward(self, beliefs: torch.Tensor) -> torch.Tensor:
        """(n, belief_dim) -> (n, K, D)."""
        if beliefs.shape[-1] != self.belief_dim:
            raise ValueError(f"belief width {beliefs.shape[-1]} != "
                             f"expected {self.belief_dim}")
        out = self.net(beliefs)
        return out.reshape(*beliefs.shape[:-1], self.n_prompts, self.embed_dim)


def project_beliefs(belief: np.ndarray, adapter: Adapter) -> np.ndarray:
    """Deterministic forward pass for a single belief vector -> (K, D)."""
    with torch.no_grad():
        out = adapter(torch.as_tensor(np.asarray(belief), dtype=torch.float32))
    return out.numpy()


@dataclass(frozen=True)
class AdapterTrainConfig:
    epochs: int = 30
    learning_rate: float = 5e-3
    batch_size: int = 32
    n_prompts: int = 8
    seed: int = 0


def _encode_pair(prompt: str, review: str, vocab: Vocab, max_len: int,
                 n_prompts: int):
    """Token ids and label ids for one training pair.

    Labels cover only the review span (review tokens plus end-of-text);
    soft-prompt and text-prompt positions are masked with PAD, which the
    loss ignores.
    """
    p = [BOS] + vocab.encode(prompt)
    budget = max_len - n_prompts - len(p) - 1
    r = vocab.encode(review)[:budget] + [EOS]
    tokens = p + r
    labels = [PAD] * (n_prompts + len(p) - 1) + r
    return tokens, labels


def pair_loss(lm: TinyCausalLM, adapter: Adapter, beliefs: torch.Tensor,
              tokens: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Masked cross-entropy of the review span given soft prompts.

    ``tokens`` is (n, T) padded token ids; ``labels`` is (n, K+T-1)
    padded label ids aligned with the model's next-token predictions.
    """
    prompts = adapter(beliefs)
    embeds = torch.cat([prompts, lm.embed_tokens(tokens)], dim=1)
    logits = lm(embeds)[:, :-1]
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), labels.reshape(-1),
        ignore_index=PAD)


def _pad_rows(rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD, dtype=torch.long)
    for i, r in enumerate(rows):
        out[i, :len(r)] = torch.tensor(r)
    return out


def train_adapter(pairs, lm: TinyCausalLM, vocab: Vocab,
                  cfg: AdapterTrainConfig = AdapterTrainConfig()):
    """Train an adapter on (belief vector, prompt text, review text) triples.

    Returns (adapter, per-epoch mean loss history). Raises FrozenLmError
    if any LM parameter changes between epochs, and ValueError on an
    empty pair set.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training pair set")
    contract = lm_checksum(lm)
    torch.manual_seed(cfg.seed)
    adapter = Adapter(len(pairs[0][0]), lm.embedding_dim, cfg.n_prompts)

    beliefs = torch.tensor(np.array([b for b, _, _ in pairs]),
                           dtype=torch.float32)
    encoded = [_encode_pair(p, r, vocab, lm.cfg.max_len, cfg.n_prompts)
               for _, p, r in pairs]
    tokens = _pad_rows([t for t, _ in encoded])
    labels = _pad_rows([l for _, l in encoded])

    opt = torch.optim.Adamax(adapter.parameters(), lr=cfg.learning_rate)
    order_rng = np.random.default_rng(cfg.seed)
    history = []
    for _ in range(cfg.epochs):
        order = order_rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(pairs), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss = pair_loss(lm, adapter, beliefs[idx], tokens[idx], labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        history.append(float(np.mean(losses)))
        if lm_checksum(lm) != contract:
            raise FrozenLmError("language-model parameters drifted during "
                                "adapter training")
    adapter.eval()
    return adapter, history


def save_adapter(adapter: Adapter, path) -> None:
    torch.save({"belief_dim": adapter.belief_dim,
                "embed_dim": adapter.embed_dim,
                "n_prompts": adapter.n_prompts,
                "state": adapter.state_dict()}, path)


def load_adapter(path) -> Adapter:
    blob = torch.load(path, weights_only=False)
    adapter = Adapter(blob["belief_dim"], blob["embed_dim"], blob["n_prompts"])
    adapter.load_state_dict(blob["state"])
    adapter.eval()
    return adapter
