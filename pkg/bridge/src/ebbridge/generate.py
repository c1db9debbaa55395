"""Prompt construction and soft-prompt-conditioned text generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .adapter import Adapter
from .lm import BOS, EOS, PAD, UNK, TinyCausalLM, Vocab

__all__ = ["GenerationConfig", "PromptTemplate", "generate"]


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.7
    max_new_tokens: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.max_new_tokens < 0:
            raise ValueError("max_new_tokens must be non-negative")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction, a one-shot style example, and named task fields.

    ``fields`` lists the profile attributes that get spliced into the
    prompt as "name : value" clauses, in order.
    """

    instruction: str = "write a short product review"
    example: str = "example : good product works well"
    fields: tuple[str, ...] = ("brand", "price", "rating")

    def render(self, values: dict) -> str:
        missing = [f for f in self.fields if f not in values]
        if missing:
            raise ValueError(f"unbound template fields: {missing}")
        clauses = " ".join(f"{name} : {values[name]}" for name in self.fields)
        return f"{self.instruction} . {self.example} . {clauses} review :"


def generate(lm: TinyCausalLM, vocab: Vocab, prompt_text: str,
             cfg: GenerationConfig, adapter: Adapter | None = None,
             belief: np.ndarray | None = None) -> str:
    """Sample a review continuation of the rendered prompt.

    With an adapter and belief vector the K projected soft prompts are
    prepended to the token embeddings; without them this is the
    prompt-only baseline. Decoding is temperature sampling with a
    dedicated generator, so a fixed (belief, seed, cfg) is reproducible.
    """
    if (adapter is None) != (belief is None):
        raise ValueError("adapter and belief must be given together")
    token_ids = [BOS] + vocab.encode(prompt_text)
    with torch.no_grad():
        embeds = lm.embed_tokens(torch.tensor([token_ids]))
        if adapter is not None:
            prompts = adapter(torch.as_tensor(np.asarray(belief),
                                              dtype=torch.float32))
            embeds = torch.cat([prompts.unsqueeze(0), embeds], dim=1)
        gen = torch.Generator().manual_seed(cfg.seed)
        out_ids: list[int] = []
        for _ in range(cfg.max_new_tokens):
            if embeds.shape[1] >= lm.cfg.max_len:
                break
            logits = lm(embeds)[0, -1] / cfg.temperature
            logits[PAD] = logits[BOS] = logits[UNK] = -torch.inf
            probs = torch.softmax(logits, dim=-1)
            nxt = int(torch.multinomial(probs, 1, generator=gen))
            if nxt == EOS:
                break
            out_ids.append(nxt)
            embeds = torch.cat(
                [embeds, lm.embed_tokens(torch.tensor([[nxt]]))], dim=1)
    return vocab.decode(out_ids)
