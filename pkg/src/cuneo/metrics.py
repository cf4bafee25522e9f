"""Confusion counts, the four standard classification metrics, and loss CSVs.

Counts are one-vs-rest per class, derived from the full confusion
matrix.  Aggregates are macro averages (unweighted mean over the classes
that actually appear in the labels); classes whose precision or recall
is 0/0 score 0 by convention and are flagged as degenerate rather than
silently inflating the averages.  Overall accuracy is correct/total; the
per-class one-vs-rest accuracies are reported alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-class one-vs-rest counts; ``tp[c] + fp[c] + fn[c] + tn[c] == total``."""

    num_classes: int
    total: int
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]
    tn: tuple[int, ...]

    def classes_in_labels(self) -> tuple[int, ...]:
        return tuple(c for c in range(self.num_classes) if self.tp[c] + self.fn[c] > 0)


def confusion(predictions, labels, num_classes: int) -> ConfusionCounts:
    """Count TP/FP/FN/TN for each class from aligned prediction/label lists."""
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.ndim != 1:
        raise ValueError(f"predictions and labels must be equal-length 1-D, got {preds.shape} vs {labs.shape}")
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    if preds.size and (preds.min() < 0 or preds.max() >= num_classes or labs.min() < 0 or labs.max() >= num_classes):
        raise ValueError(f"class id out of range [0, {num_classes})")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (labs, preds), 1)
    diag = np.diag(matrix)
    col = matrix.sum(axis=0)
    row = matrix.sum(axis=1)
    total = int(preds.size)
    tp = diag
    fp = col - diag
    fn = row - diag
    tn = total - tp - fp - fn
    return ConfusionCounts(
        num_classes=num_classes,
        total=total,
        tp=tuple(int(v) for v in tp),
        fp=tuple(int(v) for v in fp),
        fn=tuple(int(v) for v in fn),
        tn=tuple(int(v) for v in tn),
    )


def accuracy(counts: ConfusionCounts) -> float:
    """Overall fraction correct: sum of true positives over total."""
    if counts.total == 0:
        raise ValueError("accuracy is undefined for zero samples")
    return sum(counts.tp) / counts.total


def class_accuracy(counts: ConfusionCounts, c: int) -> float:
    """One-vs-rest accuracy (TP+TN)/(TP+TN+FP+FN) for class ``c``."""
    if counts.total == 0:
        raise ValueError("accuracy is undefined for zero samples")
    return (counts.tp[c] + counts.tn[c]) / counts.total


def precision(counts: ConfusionCounts, c: int) -> float:
    """TP/(TP+FP); 0 when the class was never predicted."""
    denom = counts.tp[c] + counts.fp[c]
    return counts.tp[c] / denom if denom else 0.0


def recall(counts: ConfusionCounts, c: int) -> float:
    """TP/(TP+FN); 0 when the class never appears in the labels."""
    denom = counts.tp[c] + counts.fn[c]
    return counts.tp[c] / denom if denom else 0.0


def f1(counts: ConfusionCounts, c: int) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    p, r = precision(counts, c), recall(counts, c)
    return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    per_class_accuracy: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    classes_in_labels: tuple[int, ...]
    degenerate_classes: tuple[int, ...]


def report(counts: ConfusionCounts) -> MetricsReport:
    """Assemble the table-ready report; macros average over label classes."""
    if counts.total == 0:
        raise ValueError("cannot report on zero samples")
    n = counts.num_classes
    per_p = tuple(precision(counts, c) for c in range(n))
    per_r = tuple(recall(counts, c) for c in range(n))
    per_f = tuple(f1(counts, c) for c in range(n))
    per_a = tuple(class_accuracy(counts, c) for c in range(n))
    present = counts.classes_in_labels()
    degenerate = tuple(
        c for c in range(n)
        if counts.tp[c] + counts.fp[c] == 0 or counts.tp[c] + counts.fn[c] == 0
    )
    if present:
        macro_p = sum(per_p[c] for c in present) / len(present)
        macro_r = sum(per_r[c] for c in present) / len(present)
        macro_f = sum(per_f[c] for c in present) / len(present)
    else:
        macro_p = macro_r = macro_f = 0.0
    return MetricsReport(
        accuracy=accuracy(counts),
        per_class_precision=per_p,
        per_class_recall=per_r,
        per_class_f1=per_f,
        per_class_accuracy=per_a,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        classes_in_labels=present,
        degenerate_classes=degenerate,
    )


def evaluate(predictions, labels, num_classes: int) -> MetricsReport:
    """Shorthand for ``report(confusion(predictions, labels, num_classes))``."""
    return report(confusion(predictions, labels, num_classes))


REPORT_CSV_HEADER = "model,accuracy,macro_precision,macro_recall,macro_f1"


def report_csv_row(name: str, rep: MetricsReport) -> str:
    """One aggregate CSV row per evaluated model (matches REPORT_CSV_HEADER)."""
    if "," in name:
        raise ValueError("model name must not contain commas")
    return ",".join([name, repr(rep.accuracy), repr(rep.macro_precision),
                     repr(rep.macro_recall), repr(rep.macro_f1)])


def report_text(rep: MetricsReport, name: str = "model") -> str:
    """Human-readable metrics block with per-class rows."""
    lines = [
        f"evaluation: {name}",
        f"  accuracy        {rep.accuracy:.4f}",
        f"  macro precision {rep.macro_precision:.4f}",
        f"  macro recall    {rep.macro_recall:.4f}",
        f"  macro f1        {rep.macro_f1:.4f}",
        "  class  precision  recall      f1  ovr-acc",
    ]
    for c in range(len(rep.per_class_precision)):
        flag = "  (degenerate)" if c in rep.degenerate_classes else ""
        lines.append(
            f"  {c:5d}     {rep.per_class_precision[c]:.4f}  {rep.per_class_recall[c]:.4f}"
            f"  {rep.per_class_f1[c]:.4f}   {rep.per_class_accuracy[c]:.4f}{flag}"
        )
    return "\n".join(lines)


def export_loss_comparison(logs, loss_field: str = "train_loss") -> str:
    """CSV comparing per-epoch losses across named runs.

    ``logs`` is an ordered mapping or (name, TrainLog) list.  One row per
    epoch, one column per run; runs that stopped early leave blanks.
    Values use shortest round-trip float formatting, so parsing the CSV
    recovers them bit-exactly.
    """
    if loss_field not in ("train_loss", "val_loss"):
        raise ValueError("loss_field must be 'train_loss' or 'val_loss'")
    items = list(logs.items()) if hasattr(logs, "items") else list(logs)
    if not items:
        raise ValueError("need at least one log")
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("duplicate run names")
    for name in names:
        if "," in name:
            raise ValueError(f"run name {name!r} must not contain commas")
    depth = max(len(log.epochs) for _, log in items)
    rows = ["epoch," + ",".join(names)]
    for e in range(depth):
        cells = [str(e + 1)]
        for _, log in items:
            if e < len(log.epochs):
                cells.append(repr(getattr(log.epochs[e], loss_field)))
            else:
                cells.append("")
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"
