"""Restricted Boltzmann Machine primitives.

Energy, factorized conditionals, analytic free energy, CD-k updates, block
Gibbs sampling, and exact enumeration utilities that stay tractable on tiny
models (the enumeration guard caps total units at 24).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RbmParams",
    "CdConfig",
    "sigmoid",
    "energy",
    "hidden_conditional",
    "visible_conditional",
    "free_energy_rbm",
    "cd_update",
    "exact_log_likelihood",
    "gibbs_chain",
    "init_rbm",
    "train_rbm",
    "enumerate_states",
]

ENUMERATION_GUARD = 24


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class RbmParams:
    """Weights (J x H) and biases of a binary-binary RBM."""

    W: np.ndarray
    b: np.ndarray  # visible bias, length J
    c: np.ndarray  # hidden bias, length H

    def __post_init__(self):
        J, H = self.W.shape
        if self.b.shape != (J,) or self.c.shape != (H,):
            raise ValueError(
                f"inconsistent shapes: W {self.W.shape}, b {self.b.shape}, c {self.c.shape}"
            )
        for arr in (self.W, self.b, self.c):
            if not np.isfinite(arr).all():
                raise ValueError("non-finite parameter entries")

    @property
    def visible_dim(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class CdConfig:
    k: int = 1
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 10
    weight_init_std: float = 0.01
    seed: int = 0
    momentum: float = 0.0
    weight_decay: float = 0.0
    init_visible_bias_from_means: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


def _check_v(v: np.ndarray, params: RbmParams):
    if np.shape(v)[-1] != params.visible_dim:
        raise ValueError(f"visible dim {np.shape(v)[-1]} != {params.visible_dim}")


def energy(v: np.ndarray, h: np.ndarray, params: RbmParams) -> float:
    """-v'Wh - b'v - c'h for one configuration."""
    v = np.asarray(v, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_v(v, params)
    if h.shape[-1] != params.hidden_dim:
        raise ValueError(f"hidden dim {h.shape[-1]} != {params.hidden_dim}")
    return float(-(v @ params.W @ h) - params.b @ v - params.c @ h)


def hidden_conditional(v: np.ndarray, params: RbmParams) -> np.ndarray:
    """P(h_j = 1 | v), vectorized over a leading batch axis if present."""
    v = np.asarray(v, dtype=float)
    _check_v(v, params)
    return sigmoid(v @ params.W + params.c)


def visible_conditional(h: np.ndarray, params: RbmParams) -> np.ndarray:
    """P(v_i = 1 | h)."""
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != params.hidden_dim:
        raise ValueError(f"hidden dim {h.shape[-1]} != {params.hidden_dim}")
    return sigmoid(h @ params.W.T + params.b)


def free_energy_rbm(v: np.ndarray, params: RbmParams):
    """Analytic F(v) = -b'v - sum_j softplus(c_j + (W'v)_j).

    exp(-F(v)) equals the sum of exp(-energy) over all hidden states.
    Accepts a single vector or a batch.
    """
    v = np.asarray(v, dtype=float)
    _check_v(v, params)
    act = v @ params.W + params.c
    fe = -(v @ params.b) - softplus(act).sum(axis=-1)
    return float(fe) if v.ndim == 1 else fe


def enumerate_states(n: int) -> np.ndarray:
    """All binary vectors of length n as a (2^n, n) float array."""
    if n > ENUMERATION_GUARD:
        raise ValueError(f"enumeration over {n} units exceeds guard {ENUMERATION_GUARD}")
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(float)


def exact_log_likelihood(vectors: np.ndarray, params: RbmParams) -> float:
    """Mean log P(v) with Z computed by full enumeration (tiny models only)."""
    total = params.visible_dim + params.hidden_dim
    if total > ENUMERATION_GUARD:
        raise ValueError(
            f"{total} total units exceeds enumeration guard {ENUMERATION_GUARD}"
        )
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    all_v = enumerate_states(params.visible_dim)
    log_z = _logsumexp(-free_energy_rbm(all_v, params))
    return float(np.mean(-free_energy_rbm(vectors, params)) - log_z)


def _logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))


def init_rbm(visible_dim: int, hidden_dim: int, cfg: CdConfig,
             data_means: np.ndarray | None = None) -> RbmParams:
    """Gaussian weight init; biases zero unless visible bias is seeded from data means."""
    rng = np.random.default_rng(cfg.seed)
    W = rng.normal(0.0, cfg.weight_init_std, size=(visible_dim, hidden_dim))
    b = np.zeros(visible_dim)
    if cfg.init_visible_bias_from_means and data_means is not None:
        p = np.clip(data_means, 1e-4, 1 - 1e-4)
        b = np.log(p / (1 - p))
    return RbmParams(W, b, np.zeros(hidden_dim))


def cd_update(params: RbmParams, batch: np.ndarray, cfg: CdConfig,
              rng: np.random.Generator,
              velocity: tuple | None = None):
    """One CD-k step on a batch of visible vectors.

    Positive statistics use mean hidden activations on the data; the chain
    samples binary states, with a mean reconstruction on the final visible
    step. Returns (new_params, stats, velocity).
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    _check_v(batch, params)
    n = batch.shape[0]

    h_pos = hidden_conditional(batch, params)
    v_neg = batch
    for step in range(cfg.k):
        h_prob = hidden_conditional(v_neg, params) if step > 0 else h_pos
        h_samp = (rng.random(h_prob.shape) < h_prob).astype(float)
        v_prob = visible_conditional(h_samp, params)
        last = step == cfg.k - 1
        v_neg = v_prob if last else (rng.random(v_prob.shape) < v_prob).astype(float)
    h_neg = hidden_conditional(v_neg, params)

    dW = (batch.T @ h_pos - v_neg.T @ h_neg) / n - cfg.weight_decay * params.W
    db = (batch - v_neg).mean(axis=0)
    dc = (h_pos - h_neg).mean(axis=0)

    if cfg.momentum > 0:
        vW, vb, vc = velocity or (np.zeros_like(dW), np.zeros_like(db), np.zeros_like(dc))
        vW = cfg.momentum * vW + dW
        vb = cfg.momentum * vb + db
        vc = cfg.momentum * vc + dc
        dW, db, dc = vW, vb, vc
        velocity = (vW, vb, vc)

    new = RbmParams(
        params.W + cfg.learning_rate * dW,
        params.b + cfg.learning_rate * db,
        params.c + cfg.learning_rate * dc,
    )
    recon_error = float(np.mean((batch - v_neg) ** 2))
    return new, {"recon_error": recon_error}, velocity


def train_rbm(data: np.ndarray, hidden_dim: int, cfg: CdConfig):
    """Run CD training over epochs with seeded shuffling.

    Returns (params, history) where history holds per-epoch mean
    reconstruction error.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] == 0:
        raise ValueError("empty dataset")
    params = init_rbm(data.shape[1], hidden_dim, cfg, data_means=data.mean(axis=0))
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    velocity = None
    history = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(data.shape[0])
        errs = []
        for start in range(0, data.shape[0], cfg.batch_size):
            batch = data[perm[start:start + cfg.batch_size]]
            params, stats, velocity = cd_update(params, batch, cfg, rng, velocity)
            errs.append(stats["recon_error"])
        history.append(float(np.mean(errs)))
    return params, history


def gibbs_chain(params: RbmParams, init_v: np.ndarray, steps: int, seed: int):
    """Alternating block Gibbs from init_v.

    Returns (v, h, trajectory) where trajectory stacks the visible state
    after every step (shape (steps, J)).
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    rng = np.random.default_rng(seed)
    v = np.asarray(init_v, dtype=float).copy()
    _check_v(v, params)
    h = np.zeros(params.hidden_dim)
    traj = np.empty((steps, params.visible_dim))
    for t in range(steps):
        h = (rng.random(params.hidden_dim) < hidden_conditional(v, params)).astype(float)
        v = (rng.random(params.visible_dim) < visible_conditional(h, params)).astype(float)
        traj[t] = v
    return v, h, traj
