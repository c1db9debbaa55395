"""Tiny causal transformer language model with a frozen-weights contract.

The model is small enough to pretrain from scratch on a desk-scale
review corpus in seconds. It exposes an embedding-injection interface
(`forward` takes input embeddings, not token ids) so that continuous
soft-prompt vectors can be prepended to ordinary token embeddings.

The frozen contract is enforced by `lm_checksum`: a digest over all
parameters that downstream training loops verify between epochs.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

__all__ = ["Vocab", "LmConfig", "PretrainConfig", "TinyCausalLM",
           "build_vocab", "pretrain_lm", "lm_checksum", "freeze_lm",
           "save_lm", "load_lm"]

PAD, BOS, EOS, UNK = 0, 1, 2, 3
_SPECIALS = ("[pad]", "[bos]", "[eos]", "[unk]")


@dataclass(frozen=True)
class Vocab:
    """Whitespace word-level vocabulary with fixed special tokens."""

    words: tuple[str, ...]
    index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "index",
                           {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(w, UNK) for w in text.lower().split()]

    def decode(self, ids) -> str:
        return " ".join(self.words[i] for i in ids
                        if i not in (PAD, BOS, EOS, UNK))


def build_vocab(texts) -> Vocab:
    seen = sorted({w for t in texts for w in t.lower().split()})
    return Vocab(_SPECIALS + tuple(seen))


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    max_len: int = 96


class TinyCausalLM(nn.Module):
    def __init__(self, cfg: LmConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_len, cfg.d_model)
        layer = nn.TransformerEncoderLayer(
            cfg.d_model, cfg.n_heads, dim_feedforward=4 * cfg.d_model,
            dropout=0.0, batch_first=True, norm_first=True)
        self.blocks = nn.TransformerEncoder(layer, cfg.n_layers,
                                            enable_nested_tensor=False)
        self.norm = nn.LayerNorm(cfg.d_model)

    @property
    def embedding_dim(self) -> int:
        return self.cfg.d_model

    def embed_tokens(self, ids: torch.Tensor) -> torch.Tensor:
        return self.tok_emb(ids)

    def forward(self, inputs_embeds: torch.Tensor, return_hidden: bool = False,
                pos_offset: int = 0):
        """Causal forward pass over ``(batch, seq, d_model)`` embeddings.

        Returns next-token logits ``(batch, seq, vocab)``; with
        ``return_hidden`` also the final hidden states. ``pos_offset``
        shifts the positional embeddings, which pretraining uses to make
        the model robust to prepended prompt vectors.
        """
        n = inputs_embeds.shape[1]
        if n + pos_offset > self.cfg.max_len:
            raise ValueError(f"sequence length {n}+{pos_offset} exceeds "
                             f"max {self.cfg.max_len}")
        pos = pos_offset + torch.arange(n, device=inputs_embeds.device)
        x = inputs_embeds + self.pos_emb(pos)
        mask = nn.Transformer.generate_square_subsequent_mask(
            n, device=x.device, dtype=x.dtype)
        h = self.norm(self.blocks(x, mask=mask, is_causal=True))
        logits = h @ self.tok_emb.weight.T
        if return_hidden:
            return logits, h
        return logits


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 30
    learning_rate: float = 3e-3
    batch_size: int = 32
    seed: int = 0
    # Train every sequence at several random positional offsets so that
    # prepending up to this many prompt vectors keeps positions
    # in-distribution.
    position_jitter: int = 12


def _pad_batch(seqs: list[list[int]]) -> torch.Tensor:
    width = max(len(s) for s in seqs)
    out = torch.full((len(seqs), width), PAD, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = torch.tensor(s)
    return out


def pretrain_lm(texts, vocab: Vocab, lm_cfg: LmConfig,
                cfg: PretrainConfig = PretrainConfig()):
    """Train a fresh model on next-token prediction over ``texts``.

    Returns (model, per-epoch mean loss history).
    """
    if not texts:
        raise ValueError("empty pretraining corpus")
    torch.manual_seed(cfg.seed)
    model = TinyCausalLM(lm_cfg)
    seqs = [[BOS] + vocab.encode(t)[: lm_cfg.max_len - 2] + [EOS] for t in texts]
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)
    order_rng = np.random.default_rng(cfg.seed)
    history = []
    for _ in range(cfg.epochs):
        order = order_rng.permutation(len(seqs))
        losses = []
        for start in range(0, len(seqs), cfg.batch_size):
            batch = _pad_batch([seqs[i] for i in order[start:start + cfg.batch_size]])
            offset = int(order_rng.integers(cfg.position_jitter + 1))
            logits = model(model.embed_tokens(batch[:, :-1]), pos_offset=offset)
            loss = loss_fn(logits.reshape(-1, lm_cfg.vocab_size),
                           batch[:, 1:].reshape(-1))
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        history.append(float(np.mean(losses)))
    model.eval()
    return model, history


def lm_checksum(model: nn.Module) -> str:
    digest = hashlib.sha256()
    for name, param in sorted(model.named_parameters()):
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def freeze_lm(model: nn.Module) -> str:
    """Freeze all parameters and return the contract checksum."""
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return lm_checksum(model)


def save_lm(model: TinyCausalLM, vocab: Vocab, path) -> None:
    torch.save({"config": dataclasses.asdict(model.cfg),
                "vocab": list(vocab.words),
                "state": model.state_dict(),
                "checksum": lm_checksum(model)}, path)


def load_lm(path):
    """Returns (model, vocab); verifies the stored checksum."""
    blob = torch.load(path, weights_only=False)
    model = TinyCausalLM(LmConfig(**blob["config"]))
    model.load_state_dict(blob["state"])
    model.eval()
    if lm_checksum(model) != blob["checksum"]:
        raise ValueError("language-model checksum mismatch after load")
    return model, Vocab(tuple(blob["vocab"]))
