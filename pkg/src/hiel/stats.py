"""Significance testing for per-project score comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

EXACT_MAX_N = 25

# lower edges of the Small/Medium/Strong bands on |delta|
CLIFF_THRESHOLDS = ((0.474, "Strong"), (0.330, "Medium"), (0.147, "Small"))


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    statistic: float  # sum of ranks of the positive differences
    p_value: float
    method: str       # "exact" or "normal_approximation"
    degenerate: bool = False


def _signed_ranks(values, mu0):
    d = np.asarray(values, dtype=float) - mu0
    if d.ndim != 1 or d.size == 0:
        raise ValueError("need at least one value")
    d = d[d != 0]
    return d, rankdata(np.abs(d))


def exact_signed_rank_pvalue(ranks, w_plus) -> float:
    """Two-sided exact p-value of the signed-rank statistic.

    Counts the sign patterns whose positive-rank sum lies at least as far
    from its mean as ``w_plus``.  Ranks are doubled so midranks from ties
    stay integral, and the count runs as a subset-sum table rather than an
    explicit walk over all ``2**n`` patterns.
    """
    r2 = np.rint(np.asarray(ranks) * 2).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.int64)  # at most 2**25 patterns
    counts[0] = 1
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    obs = abs(2 * int(round(2 * w_plus)) - total)
    sums = np.arange(total + 1)
    hits = counts[np.abs(2 * sums - total) >= obs].sum()
    return float(hits / (2 ** len(r2)))


def wilcoxon_one_sample(values, mu0: float = 0.0) -> WilcoxonResult:
    """Signed-rank test of ``values`` against the location ``mu0``.

    Zero differences are dropped and tied magnitudes share average ranks.
    Up to 25 nonzero differences the exact null distribution is used; beyond
    that a normal approximation with tie and continuity corrections.
    """
    d, ranks = _signed_ranks(values, mu0)
    n = d.size
    if n == 0:
        return WilcoxonResult(0, 0.0, 1.0, "exact", degenerate=True)
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        return WilcoxonResult(n, w_plus, min(1.0, exact_signed_rank_pvalue(ranks, w_plus)), "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - ((tie_counts ** 3 - tie_counts).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(n, w_plus, 1.0, "normal_approximation")
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    return WilcoxonResult(n, w_plus, float(min(1.0, 2.0 * norm.sf(z))), "normal_approximation")


@dataclass(frozen=True)
class CliffsDelta:
    delta: float
    category: str


def cliff_category(delta: float) -> str:
    a = abs(delta)
    for edge, name in CLIFF_THRESHOLDS:
        if a >= edge:
            return name
    return "Negligible"


def cliffs_delta(x, y) -> CliffsDelta:
    """Dominance of ``x`` over ``y``: ``(#(x > y) - #(x < y)) / (|x| |y|)``."""
    x = np.asarray(x, dtype=float)
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ValueError("Cliff's delta needs two nonempty samples")
    below = np.searchsorted(y, x, side="left").sum()             # y < x_i
    above = (y.size - np.searchsorted(y, x, side="right")).sum()  # y > x_i
    delta = float(int(below) - int(above)) / (x.size * y.size)
    return CliffsDelta(delta, cliff_category(delta))


@dataclass(frozen=True)
class ComparisonRow:
    hiel_avg: float
    other_avg: float
    improvement_percent: float | None  # None when the other model averages 0
    wins: int
    ties: int
    losses: int
    wilcoxon: WilcoxonResult
    cliffs: CliffsDelta

    @property
    def p_value(self) -> float:
        return self.wilcoxon.p_value

    @property
    def wtl(self) -> str:
        return f"{self.wins}/{self.ties}/{self.losses}"


def improvement_percent(hiel_avg: float, other_avg: float) -> float | None:
    if other_avg == 0:
        return None
    return (hiel_avg - other_avg) / other_avg * 100.0


def summarize_comparison(hiel_scores, other_scores) -> ComparisonRow:
    """Average, improvement, W/T/L, signed-rank p and Cliff's delta of HIEL vs another model.

    Scores are aligned per project.  The signed-rank test runs on the
    differences ``other - hiel`` against zero.
    """
    h = np.asarray(hiel_scores, dtype=float)
    o = np.asarray(other_scores, dtype=float)
    if h.shape != o.shape or h.ndim != 1 or h.size == 0:
        raise ValueError("score vectors must be nonempty and equally long")
    h_avg, o_avg = float(h.mean()), float(o.mean())
    return ComparisonRow(
        hiel_avg=h_avg,
        other_avg=o_avg,
        improvement_percent=improvement_percent(h_avg, o_avg),
        wins=int((h > o).sum()),
        ties=int((h == o).sum()),
        losses=int((h < o).sum()),
        wilcoxon=wilcoxon_one_sample(o - h, 0.0),
        cliffs=cliffs_delta(h, o),
    )


def footer_table(rows: dict[str, ComparisonRow]) -> list[list]:
    """Comparison rows laid out as table footer lines.

    One column per compared model plus a trailing HIEL column, with lines
    Average, Improvement, W/T/L, p-value and Cliff's Delta.
    """
    models = list(rows)
    hiel_avg = next(iter(rows.values())).hiel_avg if rows else float("nan")
    out = [["", *models, "HIEL"]]
    out.append(["Average", *(rows[m].other_avg for m in models), hiel_avg])
    out.append(["Improvement", *(rows[m].improvement_percent for m in models), "-"])
    out.append(["W/T/L", *(rows[m].wtl for m in models), "-"])
    out.append(["p-value", *(rows[m].p_value for m in models), "-"])
    out.append(["Cliff's Delta", *(rows[m].cliffs.delta for m in models), "-"])
    out.append(["Effect", *(rows[m].cliffs.category for m in models), "-"])
    return out
