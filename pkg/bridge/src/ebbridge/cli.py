"""Command-line entry points for the soft-prompt bridge.

Commands: pretrain-lm, train-adapter, generate, evaluate, propagate.
All artifacts are files: the language model and adapter as torch
archives, datasets/beliefs in the upstream formats, reports as
delimited text, and the propagation density plot as a PNG.
"""

from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from pathlib import Path

import numpy as np

from .adapter import AdapterTrainConfig, load_adapter, save_adapter, \
    train_adapter
from .evaluate import compare_to_baseline, evaluate, report_to_delimited
from .generate import GenerationConfig, PromptTemplate, generate
from .io import read_beliefs, read_dataset, write_dataset
from .lm import LmConfig, PretrainConfig, build_vocab, load_lm, pretrain_lm, \
    save_lm
from .pipeline import export_beliefs_for, intervene_records, pretrain_corpus
from .propagate import PropagationReport, kde_plot, ks_distance, \
    propagation_to_delimited, sentiment_shift
from .sentiment import sentiment_score

TEMPLATE = PromptTemplate()


def _prompts(records):
    return [TEMPLATE.render(row) for row in records.rows]


def cmd_pretrain_lm(args) -> int:
    records = read_dataset(args.dataset)
    corpus = pretrain_corpus(records, TEMPLATE, args.seed)
    vocab = build_vocab(corpus)
    model, history = pretrain_lm(
        corpus, vocab, LmConfig(vocab_size=len(vocab)),
        PretrainConfig(epochs=args.epochs, seed=args.seed))
    save_lm(model, vocab, args.out)
    print(f"vocab={len(vocab)} epochs={args.epochs} "
          f"loss_first={history[0]:.4f} loss_last={history[-1]:.4f}")
    return 0


def cmd_train_adapter(args) -> int:
    lm, vocab = load_lm(args.lm)
    records = read_dataset(args.dataset)
    beliefs = read_beliefs(args.beliefs)
    if len(records) != len(beliefs):
        print(f"error: {len(records)} dataset rows vs {len(beliefs)} "
              "belief rows", file=sys.stderr)
        return 1
    pairs = [(b, p, t) for b, p, t in
             zip(beliefs.matrix, _prompts(records), records.texts) if t]
    cfg = AdapterTrainConfig(epochs=args.epochs, learning_rate=args.lr,
                             n_prompts=args.n_prompts, seed=args.seed)
    adapter, history = train_adapter(pairs, lm, vocab, cfg)
    save_adapter(adapter, args.out)
    Path(str(args.out) + ".log").write_text(
        "".join(f"epoch={i} ce_loss={x:.6f}\n" for i, x in enumerate(history)))
    print(f"pairs={len(pairs)} loss_first={history[0]:.4f} "
          f"loss_last={history[-1]:.4f}")
    return 0


def _generate_all(lm, vocab, records, beliefs, adapter, gen_cfg):
    texts = []
    for i, row in enumerate(records.rows):
        cfg = GenerationConfig(gen_cfg.temperature, gen_cfg.max_new_tokens,
                               gen_cfg.seed + i)
        belief = beliefs.matrix[i] if adapter is not None else None
        texts.append(generate(lm, vocab, TEMPLATE.render(row), cfg,
                              adapter, belief))
    return texts


def _write_texts(path, texts) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "text"])
        for i, t in enumerate(texts):
            writer.writerow([i, t])


def _read_texts(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return [r[1] for r in rows[1:]]


def cmd_generate(args) -> int:
    lm, vocab = load_lm(args.lm)
    records = read_dataset(args.dataset)
    adapter = beliefs = None
    if not args.baseline:
        adapter = load_adapter(args.adapter)
        beliefs = read_beliefs(args.beliefs)
        if len(records) != len(beliefs):
            print(f"error: {len(records)} dataset rows vs {len(beliefs)} "
                  "belief rows", file=sys.stderr)
            return 1
    cfg = GenerationConfig(args.temperature, args.max_new_tokens, args.seed)
    texts = _generate_all(lm, vocab, records, beliefs, adapter, cfg)
    _write_texts(args.out, texts)
    print(f"generated={len(texts)}")
    return 0


def cmd_evaluate(args) -> int:
    lm, vocab = load_lm(args.lm)
    records = read_dataset(args.dataset)
    generated = _read_texts(args.generated)
    if len(generated) != len(records):
        print(f"error: {len(generated)} generated texts vs {len(records)} "
              "dataset rows", file=sys.stderr)
        return 1
    # Score only against records that actually carry a review.
    keep = [i for i, t in enumerate(records.texts) if t]
    truth = [records.texts[i] for i in keep]
    report = evaluate([generated[i] for i in keep], truth, lm, vocab)
    out = report_to_delimited(report)
    if args.baseline_generated:
        base_texts = _read_texts(args.baseline_generated)
        base = evaluate([base_texts[i] for i in keep], truth, lm, vocab)
        tests = compare_to_baseline(report, base)
        out += (f"baseline_sentiment_r,{base.sentiment_r:.6f}\n"
                f"baseline_mean_perplexity,{base.mean_perplexity:.6f}\n")
        for key, (t, p) in tests.items():
            out += f"paired_t_{key},{t:.6f},{p:.6g}\n"
    Path(args.out).write_text(out)
    print(f"sentiment_r={report.sentiment_r:.4f} "
          f"mean_perplexity={report.mean_perplexity:.4f}")
    return 0


def cmd_propagate(args) -> int:
    lm, vocab = load_lm(args.lm)
    adapter = load_adapter(args.adapter)
    records = read_dataset(args.dataset)
    beliefs = read_beliefs(args.beliefs)
    cfg = GenerationConfig(args.temperature, args.max_new_tokens, args.seed)
    before = _generate_all(lm, vocab, records, beliefs, adapter, cfg)

    group, _, value = args.edit.partition("=")
    if not value:
        print("error: --edit expects GROUP=VALUE", file=sys.stderr)
        return 1
    edited = intervene_records(records, group, value)
    with tempfile.TemporaryDirectory() as tmp:
        edited_csv = Path(tmp) / "edited.csv"
        write_dataset(edited, edited_csv)
        edited_beliefs = export_beliefs_for(Path(args.checkpoint), edited_csv,
                                            Path(tmp) / "edited.bin")
    after = _generate_all(lm, vocab, edited, edited_beliefs, adapter, cfg)

    s_before = np.array([sentiment_score(t) for t in before])
    s_after = np.array([sentiment_score(t) for t in after])
    effect = sentiment_shift(f"{group}->{value}", s_before, s_after)

    natural_idx = [i for i, row in enumerate(records.rows)
                   if row[group] == value]
    ks = None
    groups = {"original": s_before, f"intervened {group}={value}": s_after}
    if natural_idx:
        natural = s_before[natural_idx]
        ks = ks_distance(s_after, natural)
        groups[f"natural {group}={value}"] = natural
    report = PropagationReport((effect,), ks)
    Path(str(args.out) + ".csv").write_text(propagation_to_delimited(report))
    kde_plot(groups, str(args.out) + ".png")
    print(f"mean_shift={effect.mean_shift:+.4f} p={effect.p:.4g}"
          + (f" ks={ks:.4f}" if ks is not None else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebbridge",
        description="Soft-prompt bridge from belief exports to a frozen LM")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-lm", help="pretrain the tiny causal LM")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain_lm)

    p = sub.add_parser("train-adapter", help="train the belief adapter")
    p.add_argument("--lm", required=True)
    p.add_argument("--beliefs", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--n-prompts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_adapter)

    p = sub.add_parser("generate", help="generate reviews per record")
    p.add_argument("--lm", required=True)
    p.add_argument("--adapter")
    p.add_argument("--beliefs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", action="store_true",
                   help="prompt-only generation without soft prompts")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-new-tokens", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated texts")
    p.add_argument("--lm", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--baseline-generated")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("propagate", help="intervention propagation analysis")
    p.add_argument("--lm", required=True)
    p.add_argument("--adapter", required=True)
    p.add_argument("--checkpoint", required=True,
                   help="upstream model checkpoint for belief re-export")
    p.add_argument("--dataset", required=True)
    p.add_argument("--beliefs", required=True)
    p.add_argument("--edit", required=True, metavar="GROUP=VALUE")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-new-tokens", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_propagate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
