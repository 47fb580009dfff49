"""Confusion-matrix measures and LoC-based cost estimates.

Cost quantities assume every line of code costs the same to test, so saved
budget and remaining service time are plain LoC sums over the true negatives
and over everything else.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


class NotApplicable(ValueError):
    """A measure is undefined for the given counts (e.g. FOR with no predicted cleans)."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def defects(self) -> int:
        return self.tp + self.fn


def _binary(a, name):
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return a.astype(np.int64)


def confusion(pred_labels, true_labels) -> ConfusionMatrix:
    p = _binary(pred_labels, "predictions")
    t = _binary(true_labels, "truth")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if p.size == 0:
        raise ValueError("empty prediction set")
    return ConfusionMatrix(
        tp=int(((p == 1) & (t == 1)).sum()),
        fp=int(((p == 1) & (t == 0)).sum()),
        fn=int(((p == 0) & (t == 1)).sum()),
        tn=int(((p == 0) & (t == 0)).sum()),
    )


def ppc(cm: ConfusionMatrix) -> float:
    """Percent of perfect cleans, TN / n."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    return cm.tn / cm.n


def pnpc(cm: ConfusionMatrix) -> float:
    """Percent of non-perfect cleans, (n - TN) / n."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    return (cm.n - cm.tn) / cm.n


def for_rate(cm: ConfusionMatrix) -> float:
    """False omission rate, FN / (TN + FN)."""
    if cm.tn + cm.fn == 0:
        raise NotApplicable("no predicted cleans")
    return cm.fn / (cm.tn + cm.fn)


def f_measure(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fp + cm.fn == 0:
        raise NotApplicable("no actual and no predicted defects")
    if cm.tp == 0:
        return 0.0
    precision = cm.tp / (cm.tp + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    return 2 * precision * recall / (precision + recall)


def auc(scores, truth) -> float:
    """Area under the ROC curve as the Mann-Whitney probability.

    ``P(s+ > s-) + 0.5 P(s+ = s-)``, computed from average ranks.
    """
    s = np.asarray(scores, dtype=float)
    t = _binary(truth, "truth")
    if s.shape != t.shape:
        raise ValueError("scores and truth differ in length")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise NotApplicable("AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class CostConfig:
    delta: float = 100.0  # LoC serviced per hour

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class CostReport:
    total_loc: int
    defects: int
    saved_budget: int
    remaining_service_time: int
    percent_saved_budget: float
    percent_remaining_edits: float
    project_hours: float
    original_editing_rate: float | None  # None when the release has no defects
    editing_rate: float | None
    decreased_editing_rate: float | None
    ppc: float
    pnpc: float
    for_rate: float | None  # None without predicted cleans

    def as_dict(self) -> dict:
        return asdict(self)


TABLE_COLUMNS = (
    "Project", "Total LoC", "Defects", "Saved Budget", "Remaining Service Time",
    "Project Hours", "Original Editing Rate", "Editing Rate", "Decreased Editing Rate",
)


def cost_from_sums(total_loc: int, saved_budget: int, defects: int, delta: float = 100.0):
    """Project hours and editing rates from LoC sums alone.

    Returns ``(project_hours, original_editing_rate, editing_rate,
    decreased_editing_rate)``; rates are ``None`` when ``defects == 0``.
    """
    if total_loc <= 0:
        raise ValueError("total LoC must be positive")
    remaining = total_loc - saved_budget
    hours = remaining / delta
    if defects == 0:
        return hours, None, None, None
    original = total_loc / defects
    rate = remaining / defects
    return hours, original, rate, original - rate


def cost_report(pred_labels, modules: Sequence, cost: CostConfig = CostConfig(), truth=None) -> CostReport:
    """Budget, service-time and editing-rate estimates for one target release.

    ``modules`` supplies ``loc`` and (unless ``truth`` is given) ``label``.
    """
    loc = np.fromiter((m.loc for m in modules), dtype=np.int64, count=len(modules))
    if truth is None:
        truth = [m.label for m in modules]
    cm = confusion(pred_labels, truth)
    if len(loc) != cm.n:
        raise ValueError("predictions and modules differ in length")
    p = np.asarray(pred_labels)
    t = np.asarray(truth)
    total = int(loc.sum())
    if total == 0:
        raise ValueError("total LoC is zero")
    saved = int(loc[(p == 0) & (t == 0)].sum())
    remaining = total - saved
    hours, original, rate, decreased = cost_from_sums(total, saved, cm.defects, cost.delta)
    try:
        fr = for_rate(cm)
    except NotApplicable:
        fr = None
    return CostReport(
        total_loc=total,
        defects=cm.defects,
        saved_budget=saved,
        remaining_service_time=remaining,
        percent_saved_budget=saved / total,
        percent_remaining_edits=remaining / total,
        project_hours=hours,
        original_editing_rate=original,
        editing_rate=rate,
        decreased_editing_rate=decreased,
        ppc=ppc(cm),
        pnpc=pnpc(cm),
        for_rate=fr,
    )


def table_row(project: str, report: CostReport) -> list:
    """A cost report in the supplementary-table column order."""
    return [
        project, report.total_loc, report.defects, report.saved_budget, report.remaining_service_time,
        report.project_hours, report.original_editing_rate, report.editing_rate, report.decreased_editing_rate,
    ]
