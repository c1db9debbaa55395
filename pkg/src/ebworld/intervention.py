"""Counterfactual intervention engine.

Clamps one attribute of encoded profiles to a counterfactual category,
measures the percentage change in variational free energy per sample, and
aggregates with paired t-tests into experiment grids and train/test
consistency reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dbm import DbmParams, MeanFieldConfig, variational_free_energy
from .schema import AttributeSchema, SchemaError, check_visible

__all__ = [
    "InterventionSpec",
    "InterventionResult",
    "TTestResult",
    "GridCell",
    "GridReport",
    "ConsistencyReport",
    "apply_intervention",
    "delta_free_energy",
    "paired_t_test",
    "student_t_sf",
    "run_experiment_grid",
    "train_test_consistency",
    "format_grid_table",
    "grid_to_delimited",
]

NEAR_ZERO_F = 1e-12


class DegenerateVarianceError(ValueError):
    """All paired differences identical; t statistic undefined."""


@dataclass(frozen=True)
class InterventionSpec:
    """Clamp group_name to target_category, optionally only on samples that
    currently hold source_filter and satisfy the strata conditions."""

    group_name: str
    target_category: str
    source_filter: str | None = None
    strata: tuple[tuple[str, str], ...] = ()

    def label(self) -> str:
        src = self.source_filter if self.source_filter is not None else "*"
        return f"{self.group_name}:{src}->{self.target_category}"

    def validate(self, schema: AttributeSchema) -> None:
        cats = schema.categories(self.group_name)
        if self.target_category not in cats:
            raise SchemaError(
                f"unknown target {self.target_category!r} in {self.group_name!r}"
            )
        if self.source_filter is not None:
            if self.source_filter not in cats:
                raise SchemaError(
                    f"unknown source {self.source_filter!r} in {self.group_name!r}"
                )
            if self.source_filter == self.target_category:
                raise SchemaError("source_filter must differ from target_category")
        for group, cat in self.strata:
            if cat not in schema.categories(group):
                raise SchemaError(f"unknown stratum {group}={cat}")


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_two_sided: float
    df: int


@dataclass
class InterventionResult:
    spec_label: str
    sample_ids: list[int]
    f_orig: np.ndarray
    f_intervened: np.ndarray
    delta_pct: np.ndarray
    mean_delta_pct: float
    count: int
    excluded: int
    ttest: TTestResult | None  # None when degenerate (zero variance) or n < 2
    degenerate: bool = False


def apply_intervention(v: np.ndarray, spec: InterventionSpec,
                       schema: AttributeSchema) -> np.ndarray:
    """Return a copy of v with the target group's one-hot block reassigned."""
    check_visible(v, schema)
    spec.validate(schema)
    sl = schema.group_slice(spec.group_name)
    cats = schema.categories(spec.group_name)
    current = cats[int(np.argmax(v[sl]))]
    if spec.source_filter is not None and current != spec.source_filter:
        raise SchemaError(
            f"sample has {spec.group_name}={current!r}, filter requires "
            f"{spec.source_filter!r}"
        )
    out = np.array(v, copy=True)
    out[sl] = 0
    out[schema.unit_index(spec.group_name, spec.target_category)] = 1
    return out


def _filter_mask(vectors: np.ndarray, spec: InterventionSpec,
                 schema: AttributeSchema) -> np.ndarray:
    mask = np.ones(vectors.shape[0], dtype=bool)
    if spec.source_filter is not None:
        idx = schema.unit_index(spec.group_name, spec.source_filter)
        mask &= vectors[:, idx] == 1
    for group, cat in spec.strata:
        mask &= vectors[:, schema.unit_index(group, cat)] == 1
    return mask


def delta_free_energy(vectors: np.ndarray, spec: InterventionSpec,
                      schema: AttributeSchema, params: DbmParams,
                      mf_cfg: MeanFieldConfig = MeanFieldConfig(),
                      literal_denominator: bool = False) -> InterventionResult:
    """Per-sample percentage free-energy change under the intervention.

    Default divides by |F(v_orig)| so a positive value always means the
    intervened configuration is less probable; literal_denominator keeps
    the raw signed denominator. Samples with |F_orig| below 1e-12 are
    excluded and counted.
    """
    spec.validate(schema)
    vectors = np.atleast_2d(np.asarray(vectors))
    mask = _filter_mask(vectors, spec, schema)
    ids = np.flatnonzero(mask)
    if ids.size == 0:
        raise ValueError(f"no samples match spec {spec.label()}")
    selected = vectors[ids]

    sl = schema.group_slice(spec.group_name)
    target_idx = schema.unit_index(spec.group_name, spec.target_category)
    intervened = np.array(selected, copy=True)
    intervened[:, sl] = 0
    intervened[:, target_idx] = 1

    f_orig = variational_free_energy(selected.astype(float), params, mf_cfg)
    f_int = variational_free_energy(intervened.astype(float), params, mf_cfg)

    keep = np.abs(f_orig) >= NEAR_ZERO_F
    excluded = int((~keep).sum())
    f_orig_k, f_int_k, ids_k = f_orig[keep], f_int[keep], ids[keep]
    denom = f_orig_k if literal_denominator else np.abs(f_orig_k)
    delta = (f_int_k - f_orig_k) / denom * 100.0

    ttest = None
    degenerate = False
    if delta.size >= 2:
        try:
            ttest = paired_t_test(delta)
        except DegenerateVarianceError:
            degenerate = True
    return InterventionResult(
        spec_label=spec.label(),
        sample_ids=ids_k.tolist(),
        f_orig=f_orig_k,
        f_intervened=f_int_k,
        delta_pct=delta,
        mean_delta_pct=float(delta.mean()) if delta.size else float("nan"),
        count=int(delta.size),
        excluded=excluded,
        ttest=ttest,
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# Paired t-test (self-contained, checked against scipy in the test suite)
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: int) -> float:
    """Two-sided tail probability P(|T| >= t) for Student's t with df degrees."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return _betainc(df / 2.0, 0.5, x)


def paired_t_test(differences: np.ndarray) -> TTestResult:
    """t = mean(d) / (sd(d)/sqrt(n)) with sample sd; two-sided p, df = n-1."""
    d = np.asarray(differences, dtype=float)
    if d.size < 2:
        raise ValueError("need at least 2 paired differences")
    n = d.size
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateVarianceError("zero variance in paired differences")
    t = float(d.mean() / (sd / math.sqrt(n)))
    return TTestResult(t=t, p_two_sided=student_t_sf(t, n - 1), df=n - 1)


# ---------------------------------------------------------------------------
# Experiment grids
# ---------------------------------------------------------------------------


@dataclass
class GridCell:
    spec: InterventionSpec
    result: InterventionResult | None
    error: str | None = None


@dataclass
class GridReport:
    cells: list[GridCell]

    def labels(self) -> list[str]:
        return [c.spec.label() + "|" + ",".join(f"{g}={v}" for g, v in c.spec.strata)
                for c in self.cells]


def run_experiment_grid(vectors: np.ndarray, specs: list[InterventionSpec],
                        schema: AttributeSchema, params: DbmParams,
                        mf_cfg: MeanFieldConfig = MeanFieldConfig(),
                        literal_denominator: bool = False) -> GridReport:
    """One InterventionResult per spec; per-cell failures are recorded, not fatal."""
    cells = []
    for spec in specs:
        spec.validate(schema)
        try:
            res = delta_free_energy(vectors, spec, schema, params, mf_cfg,
                                    literal_denominator)
            cells.append(GridCell(spec, res))
        except ValueError as exc:
            cells.append(GridCell(spec, None, error=str(exc)))
    return GridReport(cells)


def _significance_marker(p: float | None) -> str:
    if p is None:
        return ""
    return "†" if p < 0.001 else ""


def format_grid_table(report: GridReport) -> str:
    """Human-readable aligned table: spec, stratum, n, mean dF%, t, p, excluded."""
    rows = [("spec", "stratum", "n", "mean_dF_pct", "t", "p", "excluded")]
    for cell in report.cells:
        stratum = ",".join(f"{g}={v}" for g, v in cell.spec.strata) or "-"
        if cell.result is None:
            rows.append((cell.spec.label(), stratum, "-", "-", "-",
                         cell.error or "error", "-"))
            continue
        r = cell.result
        if r.ttest is not None:
            t_s = f"{r.ttest.t:.4f}"
            p_s = f"{r.ttest.p_two_sided:.3g}{_significance_marker(r.ttest.p_two_sided)}"
        else:
            t_s, p_s = "degenerate", "-"
        rows.append((cell.spec.label(), stratum, str(r.count),
                     f"{r.mean_delta_pct:+.2f}%", t_s, p_s, str(r.excluded)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def grid_to_delimited(report: GridReport) -> str:
    """Machine-readable grid: comma-delimited, one cell per line."""
    lines = ["spec,stratum,n,mean_dF_pct,t,p,excluded"]
    for cell in report.cells:
        stratum = ";".join(f"{g}={v}" for g, v in cell.spec.strata)
        if cell.result is None:
            lines.append(f"{cell.spec.label()},{stratum},,,,,{cell.error}")
            continue
        r = cell.result
        t_s = f"{r.ttest.t:.10g}" if r.ttest else ""
        p_s = f"{r.ttest.p_two_sided:.10g}" if r.ttest else ""
        lines.append(
            f"{cell.spec.label()},{stratum},{r.count},{r.mean_delta_pct:.10g},"
            f"{t_s},{p_s},{r.excluded}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Train/test consistency
# ---------------------------------------------------------------------------


@dataclass
class ConsistencyReport:
    labels: list[str]
    train_means: np.ndarray
    test_means: np.ndarray
    abs_differences: np.ndarray
    max_abs_difference: float
    rank_agreement: float  # Spearman rank correlation over cells
    passed: bool


def _ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty_like(order, dtype=float)
    ranks[order] = np.arange(len(x))
    return ranks


def train_test_consistency(grid_train: GridReport, grid_test: GridReport,
                           max_abs_diff: float = 3.0,
                           min_rank_agreement: float = 0.99) -> ConsistencyReport:
    """Compare per-cell mean dF% across splits and check rank-order agreement."""
    if grid_train.labels() != grid_test.labels():
        raise ValueError("grid shapes/labels do not match")
    tr = np.array([c.result.mean_delta_pct if c.result else np.nan
                   for c in grid_train.cells])
    te = np.array([c.result.mean_delta_pct if c.result else np.nan
                   for c in grid_test.cells])
    if np.isnan(tr).any() or np.isnan(te).any():
        raise ValueError("grid contains failed cells")
    diffs = np.abs(tr - te)
    r_tr, r_te = _ranks(tr), _ranks(te)
    if len(tr) < 2:
        rank_agreement = 1.0
    else:
        rank_agreement = float(np.corrcoef(r_tr, r_te)[0, 1])
    passed = bool(diffs.max() < max_abs_diff and rank_agreement >= min_rank_agreement)
    return ConsistencyReport(
        labels=grid_train.labels(),
        train_means=tr,
        test_means=te,
        abs_differences=diffs,
        max_abs_difference=float(diffs.max()),
        rank_agreement=rank_agreement,
        passed=passed,
    )
