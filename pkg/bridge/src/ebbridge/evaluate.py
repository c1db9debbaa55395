"""Generation-quality metrics against ground-truth reviews.

Metrics: correlation between generated and ground-truth sentiment,
perplexity of the generated text under the frozen language model, and
cosine similarity of mean-pooled final hidden states (the same frozen
model doubles as the text embedder). Paired t-tests compare a candidate
system against the prompt-only baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats
import torch

from .lm import BOS, EOS, TinyCausalLM, Vocab
from .sentiment import sentiment_score

__all__ = ["EvalReport", "perplexity", "embed_text", "cosine_similarity",
           "evaluate", "compare_to_baseline", "report_to_delimited"]


def _sequence(text: str, vocab: Vocab, max_len: int) -> torch.Tensor:
    ids = [BOS] + vocab.encode(text)[: max_len - 2] + [EOS]
    return torch.tensor([ids])


def perplexity(text: str, lm: TinyCausalLM, vocab: Vocab) -> float:
    """exp(mean next-token negative log-likelihood) under the frozen LM."""
    seq = _sequence(text, vocab, lm.cfg.max_len)
    with torch.no_grad():
        logits = lm(lm.embed_tokens(seq[:, :-1]))
        nll = torch.nn.functional.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), seq[0, 1:])
    return float(torch.exp(nll))


def embed_text(text: str, lm: TinyCausalLM, vocab: Vocab) -> np.ndarray:
    """Mean-pooled final hidden states of the sequence."""
    seq = _sequence(text, vocab, lm.cfg.max_len)
    with torch.no_grad():
        _, hidden = lm(lm.embed_tokens(seq), return_hidden=True)
    return hidden[0].mean(dim=0).numpy()


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


@dataclass(frozen=True)
class EvalReport:
    sentiment_r: float
    mean_perplexity: float
    mean_cosine: float
    sentiments_generated: np.ndarray
    sentiments_truth: np.ndarray
    perplexities: np.ndarray
    cosines: np.ndarray

    def __len__(self) -> int:
        return len(self.perplexities)


def evaluate(generated, ground_truth, lm: TinyCausalLM, vocab: Vocab) -> EvalReport:
    """Score aligned (generated, ground-truth) text pairs."""
    if len(generated) != len(ground_truth):
        raise ValueError(f"{len(generated)} generated texts vs "
                         f"{len(ground_truth)} ground-truth texts")
    s_gen = np.array([sentiment_score(t) for t in generated])
    s_true = np.array([sentiment_score(t) for t in ground_truth])
    ppl = np.array([perplexity(t, lm, vocab) for t in generated])
    cos = np.array([
        cosine_similarity(embed_text(g, lm, vocab), embed_text(t, lm, vocab))
        for g, t in zip(generated, ground_truth)])
    if len(generated) >= 2 and s_gen.std() > 0 and s_true.std() > 0:
        r = float(np.corrcoef(s_gen, s_true)[0, 1])
    else:
        r = 0.0
    return EvalReport(r, float(ppl.mean()), float(cos.mean()),
                      s_gen, s_true, ppl, cos)


def compare_to_baseline(candidate: EvalReport, baseline: EvalReport):
    """Paired t-tests (perplexity, cosine) of candidate vs baseline.

    Returns {"perplexity": (t, p), "cosine": (t, p)}.
    """
    if len(candidate) != len(baseline):
        raise ValueError("reports cover different sample counts")
    out = {}
    for key, a, b in (("perplexity", candidate.perplexities, baseline.perplexities),
                      ("cosine", candidate.cosines, baseline.cosines)):
        t, p = scipy.stats.ttest_rel(a, b)
        out[key] = (float(t), float(p))
    return out


def report_to_delimited(report: EvalReport) -> str:
    lines = [f"sentiment_r,{report.sentiment_r:.6f}",
             f"mean_perplexity,{report.mean_perplexity:.6f}",
             f"mean_cosine,{report.mean_cosine:.6f}",
             "index,sent_generated,sent_truth,perplexity,cosine"]
    for i in range(len(report)):
        lines.append(f"{i},{report.sentiments_generated[i]:.6f},"
                     f"{report.sentiments_truth[i]:.6f},"
                     f"{report.perplexities[i]:.6f},{report.cosines[i]:.6f}")
    return "\n".join(lines) + "\n"
