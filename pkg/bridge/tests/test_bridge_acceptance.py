"""Acceptance suite for the bridge: one criterion per test, one
PASS/FAIL line each. Run with ``pytest -v -s`` to see the lines."""

import numpy as np
import scipy.stats

from bridge_support import generate_batch, records_subset
from ebbridge.adapter import AdapterTrainConfig, train_adapter
from ebbridge.evaluate import perplexity
from ebbridge.lm import lm_checksum
from ebbridge.pipeline import export_beliefs_for, intervene_records, \
    reviewed_subset
from ebbridge.io import write_dataset
from ebbridge.propagate import ks_distance
from ebbridge.sentiment import sentiment_score


def check(name, cond, detail=""):
    print(f"\n{name}: {'PASS' if cond else 'FAIL'}  {detail}")
    assert cond, f"{name}: {detail}"


def test_b1_frozen_contract_and_learning(toy_bridge):
    lm, vocab = toy_bridge["lm"], toy_bridge["vocab"]
    before = lm_checksum(lm)
    pairs = toy_bridge["pairs"][:200]
    _, history = train_adapter(pairs, lm, vocab,
                               AdapterTrainConfig(epochs=12, seed=3))
    unchanged = lm_checksum(lm) == before == toy_bridge["lm_checksum"]
    decreased = history[-1] < history[0]
    check("B1", unchanged and decreased,
          f"checksum unchanged={unchanged}, "
          f"ce {history[0]:.3f} -> {history[-1]:.3f} on {len(pairs)} pairs")


def test_b2_conditioning_beats_prompting(toy_bridge):
    world = toy_bridge["world"]
    records, beliefs = reviewed_subset(world.test, world.test_beliefs)
    conditioned = generate_batch(toy_bridge, records, beliefs)
    baseline = generate_batch(toy_bridge, records, None)
    truth = np.array([sentiment_score(t) for t in records.texts])
    s_cond = np.array([sentiment_score(t) for t in conditioned])
    s_base = np.array([sentiment_score(t) for t in baseline])
    r_cond = float(np.corrcoef(s_cond, truth)[0, 1])
    r_base = (float(np.corrcoef(s_base, truth)[0, 1])
              if s_base.std() > 0 else 0.0)
    lm, vocab = toy_bridge["lm"], toy_bridge["vocab"]
    ppl_cond = np.array([perplexity(t, lm, vocab) for t in conditioned])
    ppl_base = np.array([perplexity(t, lm, vocab) for t in baseline])
    t, p = scipy.stats.ttest_rel(ppl_cond, ppl_base)
    ok = (r_cond > r_base and ppl_cond.mean() < ppl_base.mean()
          and t < 0 and p < 0.05)
    check("B2", ok,
          f"r {r_cond:.3f} vs {r_base:.3f}; mean ppl {ppl_cond.mean():.3g} "
          f"vs {ppl_base.mean():.3g} (paired t p={p:.2g}, n={len(records)})")


def _intervened_generation(toy_bridge, records, group, value, seed=0):
    world = toy_bridge["world"]
    edited = intervene_records(records, group, value)
    csv_path = world.root / f"acc_{group}_{value}.csv"
    write_dataset(edited, csv_path)
    beliefs = export_beliefs_for(world.checkpoint, csv_path,
                                 world.root / f"acc_{group}_{value}.bin")
    texts = generate_batch(toy_bridge, edited, beliefs, seed=seed)
    return np.array([sentiment_score(t) for t in texts])


def test_b3_causal_specificity(toy_bridge):
    world = toy_bridge["world"]
    idx5 = [i for i, r in enumerate(world.test.rows) if r["rating"] == "5"]
    rec5, bel5 = records_subset(world.test, world.test_beliefs, idx5)
    s_before = np.array([sentiment_score(t)
                         for t in generate_batch(toy_bridge, rec5, bel5)])
    s_rating = _intervened_generation(toy_bridge, rec5, "rating", "1")
    s_price = _intervened_generation(toy_bridge, rec5, "price", "high")
    s_brand = _intervened_generation(toy_bridge, rec5, "brand", "Generic")
    t_r, p_r = scipy.stats.ttest_rel(s_rating, s_before)
    _, p_p = scipy.stats.ttest_rel(s_price, s_before)
    _, p_b = scipy.stats.ttest_rel(s_brand, s_before)
    ok = (s_rating.mean() < s_before.mean() and t_r < 0 and p_r < 0.01
          and p_p > 0.1 and p_b > 0.1)
    check("B3", ok,
          f"rating 5->1 shift {s_rating.mean() - s_before.mean():+.3f} "
          f"(p={p_r:.2g}); price p={p_p:.2f}, brand p={p_b:.2f}, n={len(idx5)}")


def test_b4_distributional_validity(toy_bridge):
    world = toy_bridge["world"]
    idx5 = [i for i, r in enumerate(world.test.rows) if r["rating"] == "5"]
    idx1 = [i for i, r in enumerate(world.test.rows) if r["rating"] == "1"]
    rec5, _ = records_subset(world.test, world.test_beliefs, idx5)
    rec1, bel1 = records_subset(world.test, world.test_beliefs, idx1)
    s_intervened = _intervened_generation(toy_bridge, rec5, "rating", "1")
    s_natural = np.array([sentiment_score(t) for t in
                          generate_batch(toy_bridge, rec1, bel1, seed=500)])
    ks = ks_distance(s_intervened, s_natural)
    check("B4", ks < 0.15,
          f"KS {ks:.4f} (n={len(s_intervened)} intervened, "
          f"{len(s_natural)} natural)")
