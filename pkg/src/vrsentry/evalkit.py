"""Confusion matrices, macro-averaged metrics, and text report tables.

Labels are handled as canonical wire strings so the toolkit works for
either classification stage (or anything else with a finite label set).

Conventions: per-class precision/recall are 0 when their denominator is 0,
F1 is 0 when precision + recall is 0, and classes with zero truth support
are excluded from the macro averages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple


class LengthMismatch(ValueError):
    """Truth and prediction lists differ in length, or are empty."""


class UnknownLabel(ValueError):
    """A truth or prediction is not in the label set."""


class EmptyMatrix(ValueError):
    """Metrics requested for a matrix with no observations."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are truth, columns are prediction, in label_set order."""

    label_set: Tuple[str, ...]
    counts: Tuple[Tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.label_set)))

    def row(self, label: str) -> Tuple[int, ...]:
        return self.counts[self.label_set.index(label)]


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    stage: str
    variant: str
    backend: str
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: Dict[str, ClassMetrics] = field(default_factory=dict)
    total: int = 0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "variant": self.variant,
            "backend": self.backend,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "total": self.total,
            "per_class": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for name, m in self.per_class.items()
            },
        }


def confusion(
    truths: Sequence[str], preds: Sequence[str], label_set: Sequence[str]
) -> ConfusionMatrix:
    """Tally (truth, prediction) pairs into a matrix."""
    if len(truths) != len(preds):
        raise LengthMismatch(f"{len(truths)} truths vs {len(preds)} predictions")
    if not truths:
        raise LengthMismatch("empty input")
    labels = tuple(label_set)
    index = {label: i for i, label in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for t, p in zip(truths, preds):
        if t not in index:
            raise UnknownLabel(f"truth label {t!r} not in label set")
        if p not in index:
            raise UnknownLabel(f"predicted label {p!r} not in label set")
        counts[index[t]][index[p]] += 1
    return ConfusionMatrix(labels, tuple(tuple(row) for row in counts))


def macro_metrics(
    cm: ConfusionMatrix, stage: str = "", variant: str = "", backend: str = ""
) -> EvalReport:
    """Accuracy plus macro-averaged precision/recall/F1 over the matrix."""
    total = cm.total
    if total == 0:
        raise EmptyMatrix("no observations")
    n = len(cm.label_set)
    per_class: Dict[str, ClassMetrics] = {}
    supported: List[ClassMetrics] = []
    for i, label in enumerate(cm.label_set):
        tp = cm.counts[i][i]
        fp = sum(cm.counts[r][i] for r in range(n)) - tp
        fn = sum(cm.counts[i]) - tp
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        metrics = ClassMetrics(precision, recall, f1, support)
        per_class[label] = metrics
        if support > 0:
            supported.append(metrics)
    k = len(supported)
    return EvalReport(
        stage=stage,
        variant=variant,
        backend=backend,
        accuracy=cm.trace / total,
        macro_precision=sum(m.precision for m in supported) / k if k else 0.0,
        macro_recall=sum(m.recall for m in supported) / k if k else 0.0,
        macro_f1=sum(m.f1 for m in supported) / k if k else 0.0,
        per_class=per_class,
        total=total,
    )


_HEADER = "Accuracy Precision Recall F1-Score"
_NAME_WIDTH = 42

_VARIANT_ROW_NAMES = {
    "baseline": "Baseline Prompt",
    "context": "+ Context",
    "cot": "+ CoT",
    "fewshot": "+ Few-shot",
}


def _row_name(report: EvalReport) -> str:
    return _VARIANT_ROW_NAMES.get(report.variant, report.variant or "(unnamed)")


def render_table(reports: Sequence[EvalReport]) -> str:
    """Text table with rows grouped by backend then variant, metric columns
    to 4 decimals."""
    lines = [f"{'Model / Setting':<{_NAME_WIDTH}}{_HEADER}"]
    lines.append("-" * (_NAME_WIDTH + len(_HEADER)))
    current_group = None
    for report in reports:
        group = report.backend or "(backend)"
        if report.stage:
            group = f"{group} [{report.stage}]"
        if group != current_group:
            lines.append(group)
            current_group = group
        cells = (
            f"{report.accuracy:.4f} {report.macro_precision:.4f} "
            f"{report.macro_recall:.4f} {report.macro_f1:.4f}"
        )
        lines.append(f"  {_row_name(report):<{_NAME_WIDTH - 2}}{cells}")
    return "\n".join(lines) + "\n"
