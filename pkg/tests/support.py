"""Shared tables and model factories used across the test suite."""

import numpy as np


# Planted market: luxury brand all but excluded from the Entry tier; Entry is
# the most natural tier for the generic brand; premium tier strongly coupled
# to high ratings so tier swaps break coherence beyond simple tier frequency.
MARKET_TABLES = {
    "brand": {"probs": {"Lux": 0.5, "Generic": 0.5}},
    "tier": {"given": "brand", "probs": {
        "Lux": {"Entry": 0.01, "Mid": 0.29, "Premium": 0.70},
        "Generic": {"Entry": 0.40, "Mid": 0.30, "Premium": 0.30},
    }},
    "rating": {"given": "tier", "probs": {
        "Entry": {"low": 0.45, "mid": 0.40, "high": 0.15},
        "Mid": {"low": 0.45, "mid": 0.40, "high": 0.15},
        "Premium": {"low": 0.03, "mid": 0.07, "high": 0.90},
    }},
}


def random_rbm(rng, J, H, scale=1.0):
    from ebworld.rbm import RbmParams
    return RbmParams(
        rng.normal(0, scale, (J, H)),
        rng.normal(0, scale, J),
        rng.normal(0, scale, H),
    )


def random_dbm(rng, dims, scale=1.0):
    from ebworld.dbm import DbmParams
    weights = tuple(rng.normal(0, scale, (dims[l], dims[l + 1]))
                    for l in range(len(dims) - 1))
    return DbmParams(weights, rng.normal(0, scale, dims[0]),
                     tuple(rng.normal(0, scale, d) for d in dims[1:]))
