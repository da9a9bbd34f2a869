"""
Per-class IOU, precision and recall plus pixel accuracy, computed from a
confusion matrix of pixel counts (rows: ground truth, columns: prediction).
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

from .errors import InputValidationError
from .palette import ClassPalette, LabelImage

CSV_COLUMNS = ("class", "iou", "precision", "recall")


@dataclass(frozen=True, slots=True, eq=False)
class ConfusionCounts:
    matrix: NDArray[np.int64]
    samples: int = 0

    @classmethod
    def empty(cls, num_classes: int) -> ConfusionCounts:
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    @property
    def tp(self) -> NDArray[np.int64]:
        return np.diag(self.matrix).copy()

    @property
    def fp(self) -> NDArray[np.int64]:
        return self.matrix.sum(axis=0) - self.tp

    @property
    def fn(self) -> NDArray[np.int64]:
        return self.matrix.sum(axis=1) - self.tp

    @property
    def tn(self) -> NDArray[np.int64]:
        return self.total - self.tp - self.fp - self.fn

    def merge(self, other: ConfusionCounts) -> ConfusionCounts:
        if other.num_classes != self.num_classes:
            raise InputValidationError(
                f"cannot merge counts over {self.num_classes} and {other.num_classes} classes"
            )
        return ConfusionCounts(self.matrix + other.matrix, self.samples + other.samples)

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return self.merge(other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionCounts):
            return NotImplemented
        return self.samples == other.samples and np.array_equal(self.matrix, other.matrix)


def accumulate(
    counts: ConfusionCounts, predicted: LabelImage, truth: LabelImage
) -> ConfusionCounts:
    if predicted.shape != truth.shape:
        raise InputValidationError(
            f"predicted {predicted.shape} and truth {truth.shape} differ in shape"
        )
    k = counts.num_classes
    for what, labels in (("predicted", predicted), ("truth", truth)):
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise InputValidationError(f"{what} labels hold ids outside 0..{k - 1}")
    index = k * truth.astype(np.int64).ravel() + predicted.astype(np.int64).ravel()
    tally = np.bincount(index, minlength=k * k).reshape(k, k)
    return ConfusionCounts(counts.matrix + tally, counts.samples + 1)


def accumulate_all(
    num_classes: int, pairs: Iterable[tuple[LabelImage, LabelImage]]
) -> ConfusionCounts:
    counts = ConfusionCounts.empty(num_classes)
    for predicted, truth in pairs:
        counts = accumulate(counts, predicted, truth)
    return counts


# ---------- Report ----------


class ClassMetrics(BaseModel):
    class_id: int
    name: str
    iou: float | None
    precision: float | None
    recall: float | None
    truth_pixels: int
    predicted_pixels: int


class MetricsReport(BaseModel):
    classes: list[ClassMetrics]
    mean_iou: float | None
    mean_precision: float | None
    mean_recall: float | None
    pixel_accuracy: float | None
    samples: int
    # "<class>:<metric>" for every zero-denominator rate
    undefined: list[str]

    def foreground(self) -> list[ClassMetrics]:
        return [c for c in self.classes if c.class_id != 0]

    def by_name(self, name: str) -> ClassMetrics:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)


def _rate(num: int, den: int) -> float | None:
    return num / den if den else None


def _mean(values: Iterable[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return float(sum(defined) / len(defined)) if defined else None


def report(counts: ConfusionCounts, palette: ClassPalette | None = None) -> MetricsReport:
    """Means run over non-background classes with a defined rate."""
    names = palette.names if palette is not None else [str(i) for i in range(counts.num_classes)]
    if len(names) != counts.num_classes:
        raise InputValidationError(
            f"palette has {len(names)} classes, counts have {counts.num_classes}"
        )
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    classes: list[ClassMetrics] = []
    undefined: list[str] = []
    for c in range(counts.num_classes):
        t, p, n = int(tp[c]), int(fp[c]), int(fn[c])
        row = ClassMetrics(
            class_id=c,
            name=names[c],
            iou=_rate(t, t + p + n),
            precision=_rate(t, t + p),
            recall=_rate(t, t + n),
            truth_pixels=t + n,
            predicted_pixels=t + p,
        )
        undefined.extend(
            f"{row.name}:{m}" for m in ("iou", "precision", "recall") if getattr(row, m) is None
        )
        classes.append(row)
    fg = classes[1:]
    return MetricsReport(
        classes=classes,
        mean_iou=_mean(c.iou for c in fg),
        mean_precision=_mean(c.precision for c in fg),
        mean_recall=_mean(c.recall for c in fg),
        pixel_accuracy=_rate(int(tp.sum()), counts.total),
        samples=counts.samples,
        undefined=undefined,
    )


# ---------- Serialization ----------


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def report_csv(metrics: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in metrics.foreground():
        writer.writerow([c.name, _cell(c.iou), _cell(c.precision), _cell(c.recall)])
    writer.writerow(
        [
            "mean",
            _cell(metrics.mean_iou),
            _cell(metrics.mean_precision),
            _cell(metrics.mean_recall),
        ]
    )
    return buf.getvalue()


def write_report(metrics: MetricsReport, out_dir: Path, stem: str = "metrics") -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    csv_path.write_text(report_csv(metrics), encoding="utf-8")
    json_path.write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    return csv_path, json_path
