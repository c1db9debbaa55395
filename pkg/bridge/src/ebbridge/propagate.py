"""Intervention propagation: does editing an attribute move sentiment?

For each intervention we compare the sentiment of texts generated from
the original belief states against texts generated from the intervened
belief states of the same records (paired t-test). Distributional
validity is checked by comparing intervened-group sentiment against the
naturally-occurring group with a two-sample Kolmogorov-Smirnov statistic
and overlaid kernel-density plots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

__all__ = ["InterventionEffect", "PropagationReport", "sentiment_shift",
           "ks_distance", "kde_plot", "propagation_to_delimited"]


@dataclass(frozen=True)
class InterventionEffect:
    name: str
    mean_before: float
    mean_after: float
    mean_shift: float
    t: float
    p: float
    n: int


def sentiment_shift(name: str, before: np.ndarray,
                    after: np.ndarray) -> InterventionEffect:
    """Paired comparison of per-record sentiment before/after editing."""
    before, after = np.asarray(before, float), np.asarray(after, float)
    if before.shape != after.shape or before.size == 0:
        raise ValueError("before/after must be non-empty and aligned")
    diff = after - before
    if np.allclose(diff.std(ddof=1) if diff.size > 1 else 0.0, 0.0):
        t, p = 0.0, 1.0
    else:
        t, p = scipy.stats.ttest_rel(after, before)
    return InterventionEffect(name, float(before.mean()), float(after.mean()),
                              float(diff.mean()), float(t), float(p),
                              before.size)


def ks_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample group")
    return float(scipy.stats.ks_2samp(a, b).statistic)


@dataclass(frozen=True)
class PropagationReport:
    effects: tuple[InterventionEffect, ...]
    ks_statistic: float | None = None


def kde_plot(groups: dict, path, bandwidth: str = "scott") -> None:
    """Overlaid kernel-density estimates of sentiment per group."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.linspace(-1, 1, 400)
    for label, values in groups.items():
        values = np.asarray(values, float)
        if values.size > 1 and values.std() > 1e-9:
            density = scipy.stats.gaussian_kde(values, bw_method=bandwidth)(xs)
            ax.plot(xs, density, label=label)
        else:
            ax.axvline(values.mean() if values.size else 0.0,
                       linestyle="--", label=label)
    ax.set_xlabel("sentiment")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def propagation_to_delimited(report: PropagationReport) -> str:
    lines = ["intervention,n,mean_before,mean_after,mean_shift,t,p"]
    for e in report.effects:
        lines.append(f"{e.name},{e.n},{e.mean_before:.6f},{e.mean_after:.6f},"
                     f"{e.mean_shift:.6f},{e.t:.6f},{e.p:.6g}")
    if report.ks_statistic is not None:
        lines.append(f"ks_statistic,{report.ks_statistic:.6f}")
    return "\n".join(lines) + "\n"
