import csv
import json
from pathlib import Path

import numpy as np
import pytest
from rich.console import Console

from lanegen.errors import InputValidationError
from lanegen.metrics import MetricsReport, accumulate_all, report
from lanegen.reports import (
    ABLATION_SEED_COLUMNS,
    ROBUSTNESS_COLUMNS,
    SeedOutcome,
    ablation_table,
    majority_classes,
    metrics_table,
    summarize_ablation,
    write_ablation,
    write_robustness,
)


def _report(seed: int, noise: float) -> MetricsReport:
    """Truth with class 1 on 8 pixels, class 2 on 4, class 3 on 2; noisy predictions."""
    truth = np.zeros((4, 8), dtype=np.int64)
    truth[0, :] = 1
    truth[1, :4] = 2
    truth[2, :2] = 3
    rng = np.random.default_rng(seed)
    predicted = truth.copy()
    flip = rng.random(truth.shape) < noise
    predicted[flip] = 0
    return report(accumulate_all(4, [(predicted, truth)]))


def test_majority_classes_rank_by_truth_pixels() -> None:
    metrics = _report(0, 0.0)
    assert majority_classes(metrics, 2) == ["1", "2"]
    assert majority_classes(metrics, 10) == ["1", "2", "3"]


def test_summary_votes_over_seeds() -> None:
    seeds = [1, 2, 3]
    with_adv = [_report(s, 0.0) for s in seeds]
    without_adv = [_report(0, 0.0), _report(1, 0.5), _report(2, 0.5)]
    summary = summarize_ablation(seeds, with_adv, without_adv, top_k=2)
    assert [r.name for r in summary.classes] == ["1", "2"]
    assert summary.mean_with_adv == 1.0
    assert summary.wins == 3
    assert summary.adversarial_not_worse


def test_summary_needs_matching_lengths() -> None:
    with pytest.raises(InputValidationError):
        summarize_ablation([1, 2], [_report(0, 0.0)], [_report(0, 0.0)], top_k=2)


def test_undefined_means_count_as_zero_in_the_vote() -> None:
    assert SeedOutcome(seed=0, mean_iou_with_adv=None, mean_iou_without_adv=None).adv_not_worse
    assert not SeedOutcome(seed=0, mean_iou_with_adv=None, mean_iou_without_adv=0.1).adv_not_worse


def test_write_ablation(tmp_path: Path) -> None:
    summary = summarize_ablation([7], [_report(0, 0.0)], [_report(3, 0.6)], top_k=3)
    table, seeds, data = write_ablation(summary, tmp_path)
    rows = list(csv.reader(table.read_text().splitlines()))
    assert rows[-1][0] == "mean" and len(rows) == 5
    seed_rows = list(csv.reader(seeds.read_text().splitlines()))
    assert tuple(seed_rows[0]) == ABLATION_SEED_COLUMNS
    assert seed_rows[1] == ["7", "1.000000", seed_rows[1][2], "true"]
    assert json.loads(data.read_text())["wins"] == 1


def test_write_robustness(tmp_path: Path) -> None:
    reports = {"clean": _report(0, 0.0), "adverse_noise": _report(1, 0.3)}
    path = write_robustness(reports, tmp_path / "robustness.csv")
    rows = list(csv.reader(path.read_text().splitlines()))
    assert tuple(rows[0]) == ROBUSTNESS_COLUMNS
    assert [r[0] for r in rows[1:]] == ["clean", "adverse_noise"]
    assert rows[1][1] == "1.000000" and rows[1][-1] == "1"


def test_tables_render() -> None:
    console = Console(record=True, width=120)
    console.print(metrics_table(_report(0, 0.0), title="val"))
    summary = summarize_ablation([1], [_report(0, 0.0)], [_report(0, 0.0)], top_k=2)
    console.print(ablation_table(summary))
    text = console.export_text()
    assert "mean" in text and "1/1" in text
