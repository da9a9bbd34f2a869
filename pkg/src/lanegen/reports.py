"""
Result tables: clean vs adverse robustness, the with/without adversarial
ablation, and console renderings of metric reports.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping, Sequence
from pathlib import Path

from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from .errors import InputValidationError
from .metrics import MetricsReport

ROBUSTNESS_COLUMNS = (
    "set",
    "mean_iou",
    "mean_precision",
    "mean_recall",
    "pixel_accuracy",
    "samples",
)
ABLATION_COLUMNS = ("class", "iou_with_adv", "iou_without_adv")
ABLATION_SEED_COLUMNS = ("seed", "mean_iou_with_adv", "mean_iou_without_adv", "adv_not_worse")

stdout = Console()


def _fmt(value: float | None, digits: int = 4) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


# ---------- Metrics ----------


def metrics_table(metrics: MetricsReport, title: str = "Metrics") -> Table:
    table = Table(title=title)
    for col in ("class", "iou", "precision", "recall"):
        table.add_column(col, justify="left" if col == "class" else "right")
    for c in metrics.foreground():
        table.add_row(c.name, _fmt(c.iou), _fmt(c.precision), _fmt(c.recall))
    table.add_section()
    table.add_row(
        "mean",
        _fmt(metrics.mean_iou),
        _fmt(metrics.mean_precision),
        _fmt(metrics.mean_recall),
    )
    table.caption = (
        f"pixel accuracy {_fmt(metrics.pixel_accuracy)} over {metrics.samples} samples"
    )
    return table


# ---------- Robustness ----------


def robustness_rows(reports: Mapping[str, MetricsReport]) -> list[list[object]]:
    return [
        [
            name,
            _fmt(r.mean_iou, 6),
            _fmt(r.mean_precision, 6),
            _fmt(r.mean_recall, 6),
            _fmt(r.pixel_accuracy, 6),
            r.samples,
        ]
        for name, r in reports.items()
    ]


def write_robustness(reports: Mapping[str, MetricsReport], path: Path) -> Path:
    return _write_rows(path, ROBUSTNESS_COLUMNS, robustness_rows(reports))


def robustness_table(reports: Mapping[str, MetricsReport]) -> Table:
    table = Table(title="Clean vs adverse conditions")
    for col in ROBUSTNESS_COLUMNS:
        table.add_column(col, justify="left" if col == "set" else "right")
    for row in robustness_rows(reports):
        table.add_row(*(str(v) for v in row))
    return table


# ---------- Ablation ----------


class SeedOutcome(BaseModel):
    seed: int
    mean_iou_with_adv: float | None
    mean_iou_without_adv: float | None

    @property
    def adv_not_worse(self) -> bool:
        return (self.mean_iou_with_adv or 0.0) >= (self.mean_iou_without_adv or 0.0)


class AblationRow(BaseModel):
    name: str
    iou_with_adv: float | None
    iou_without_adv: float | None


class AblationSummary(BaseModel):
    classes: list[AblationRow]
    mean_with_adv: float | None
    mean_without_adv: float | None
    seeds: list[SeedOutcome]
    wins: int
    adversarial_not_worse: bool


def _avg(values: Sequence[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def majority_classes(metrics: MetricsReport, top_k: int) -> list[str]:
    """Non-background classes ranked by ground-truth pixel count, ties by class id."""
    ranked = sorted(
        (c for c in metrics.foreground() if c.truth_pixels > 0),
        key=lambda c: (-c.truth_pixels, c.class_id),
    )
    return [c.name for c in ranked[:top_k]]


def summarize_ablation(
    seeds: Sequence[int],
    with_adv: Sequence[MetricsReport],
    without_adv: Sequence[MetricsReport],
    top_k: int,
) -> AblationSummary:
    """
    Per-class IOU averaged over seeds for the top_k majority classes, and a
    majority vote over seeds on whether the adversarial term did not hurt mean IOU.
    """
    if not (len(seeds) == len(with_adv) == len(without_adv)) or not seeds:
        raise InputValidationError("ablation needs one report per seed and mode")
    names = majority_classes(with_adv[0], top_k)
    rows = [
        AblationRow(
            name=name,
            iou_with_adv=_avg([r.by_name(name).iou for r in with_adv]),
            iou_without_adv=_avg([r.by_name(name).iou for r in without_adv]),
        )
        for name in names
    ]
    outcomes = [
        SeedOutcome(seed=s, mean_iou_with_adv=w.mean_iou, mean_iou_without_adv=wo.mean_iou)
        for s, w, wo in zip(seeds, with_adv, without_adv)
    ]
    wins = sum(o.adv_not_worse for o in outcomes)
    return AblationSummary(
        classes=rows,
        mean_with_adv=_avg([r.iou_with_adv for r in rows]),
        mean_without_adv=_avg([r.iou_without_adv for r in rows]),
        seeds=outcomes,
        wins=wins,
        adversarial_not_worse=wins * 2 > len(outcomes),
    )


def write_ablation(summary: AblationSummary, out_dir: Path) -> tuple[Path, Path, Path]:
    rows: list[list[object]] = [
        [r.name, _fmt(r.iou_with_adv, 6), _fmt(r.iou_without_adv, 6)] for r in summary.classes
    ]
    rows.append(["mean", _fmt(summary.mean_with_adv, 6), _fmt(summary.mean_without_adv, 6)])
    table_path = _write_rows(out_dir / "ablation.csv", ABLATION_COLUMNS, rows)
    seed_path = _write_rows(
        out_dir / "ablation_seeds.csv",
        ABLATION_SEED_COLUMNS,
        [
            [
                o.seed,
                _fmt(o.mean_iou_with_adv, 6),
                _fmt(o.mean_iou_without_adv, 6),
                str(o.adv_not_worse).lower(),
            ]
            for o in summary.seeds
        ],
    )
    json_path = out_dir / "ablation.json"
    json_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return table_path, seed_path, json_path


def ablation_table(summary: AblationSummary) -> Table:
    table = Table(title="IOU of majority classes with and without adversarial loss")
    for col in ABLATION_COLUMNS:
        table.add_column(col, justify="left" if col == "class" else "right")
    for r in summary.classes:
        table.add_row(r.name, _fmt(r.iou_with_adv), _fmt(r.iou_without_adv))
    table.add_section()
    table.add_row("mean", _fmt(summary.mean_with_adv), _fmt(summary.mean_without_adv))
    table.caption = (
        f"adversarial loss not worse on {summary.wins}/{len(summary.seeds)} seeds"
    )
    return table


# ---------- Architecture ----------


def arch_table(name: str, counts: Mapping[str, int]) -> Table:
    table = Table(title=f"Architecture preset {name!r}")
    table.add_column("network")
    table.add_column("trainable parameters", justify="right")
    for net, n in counts.items():
        table.add_row(net, f"{n:,}")
    return table
