"""Rule-based lexicon sentiment scorer with compound-score semantics.

Each token carries a valence; negators flip the sign of the next scored
word and boosters scale it. The summed valence is squashed to [-1, 1]
with the standard x / sqrt(x^2 + alpha) normalization, so a single
strongly-valenced word lands around +/-0.6 and scores saturate smoothly
as evidence accumulates.
"""

from __future__ import annotations

import re

__all__ = ["LEXICON", "sentiment_score"]

NORMALIZATION_ALPHA = 15.0
NEGATION_SCALE = -0.74
BOOSTER_SCALE = 0.293

LEXICON = {
    "amazing": 3.4, "awesome": 3.1, "excellent": 3.2, "fantastic": 3.3,
    "great": 3.1, "wonderful": 3.1, "perfect": 3.3, "perfectly": 2.8,
    "love": 3.2, "loved": 3.0, "happy": 2.7, "pleased": 2.3, "good": 1.9,
    "nice": 1.8, "solid": 1.5, "well": 1.1, "recommend": 1.7, "best": 3.2,
    "sturdy": 1.4, "reliable": 1.8, "smooth": 1.3, "okay": 0.9, "fine": 0.8,
    "terrible": -3.1, "awful": -3.3, "horrible": -3.4, "worst": -3.4,
    "bad": -2.5, "poor": -2.3, "disappointed": -2.2, "disappointing": -2.2,
    "broke": -1.6, "broken": -2.0, "useless": -2.6, "waste": -2.4,
    "hate": -3.0, "hated": -2.9, "cheap": -1.2, "flimsy": -1.7,
    "defective": -2.3, "regret": -2.1, "refund": -1.4, "junk": -2.6,
}

NEGATORS = frozenset({"not", "no", "never", "cannot", "dont", "didnt",
                      "doesnt", "isnt", "wasnt", "wont"})
BOOSTERS = frozenset({"very", "really", "extremely", "so", "totally",
                      "absolutely"})

_WORD = re.compile(r"[a-z']+")


def sentiment_score(text: str) -> float:
    """Compound valence of ``text`` in [-1, 1]; empty or neutral text -> 0."""
    words = _WORD.findall(text.lower().replace("'", ""))
    total = 0.0
    for i, word in enumerate(words):
        valence = LEXICON.get(word)
        if valence is None:
            continue
        for prev in words[max(0, i - 2):i]:
            if prev in NEGATORS:
                valence *= NEGATION_SCALE
            elif prev in BOOSTERS:
                valence += BOOSTER_SCALE if valence > 0 else -BOOSTER_SCALE
        total += valence
    if total == 0.0:
        return 0.0
    return total / (total * total + NORMALIZATION_ALPHA) ** 0.5
