import csv
import io
import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lanegen.errors import InputValidationError
from lanegen.metrics import (
    CSV_COLUMNS,
    ConfusionCounts,
    accumulate,
    accumulate_all,
    report,
    report_csv,
    write_report,
)
from lanegen.palette import APOLLOSCAPE

K = 5


def _oracle(predicted: np.ndarray, truth: np.ndarray, k: int) -> dict[str, list[int]]:
    tp, fp, fn, tn = ([0] * k for _ in range(4))
    for r in range(truth.shape[0]):
        for c in range(truth.shape[1]):
            p, t = int(predicted[r, c]), int(truth[r, c])
            for cls in range(k):
                if p == cls and t == cls:
                    tp[cls] += 1
                elif p == cls:
                    fp[cls] += 1
                elif t == cls:
                    fn[cls] += 1
                else:
                    tn[cls] += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def _counts(predicted: np.ndarray, truth: np.ndarray, k: int = K) -> ConfusionCounts:
    return accumulate(ConfusionCounts.empty(k), predicted, truth)


def _class_a_example() -> tuple[np.ndarray, np.ndarray]:
    truth = np.zeros((4, 4), dtype=np.int64)
    truth[0, 0:3] = 1
    predicted = np.zeros((4, 4), dtype=np.int64)
    predicted[0, 2] = 1
    predicted[3, 3] = 1
    return predicted, truth


# ---------- accumulate ----------


def test_perfect_prediction() -> None:
    labels = np.random.default_rng(0).integers(0, K, (8, 8))
    counts = _counts(labels, labels)
    assert not counts.fp.any() and not counts.fn.any()
    metrics = report(counts)
    for c in metrics.classes:
        for value in (c.iou, c.precision, c.recall):
            assert value is None or value == 1.0
    assert metrics.pixel_accuracy == 1.0


def test_four_by_four_example() -> None:
    counts = _counts(*_class_a_example(), k=2)
    assert (counts.tp[1], counts.fp[1], counts.fn[1]) == (1, 1, 2)
    row = report(counts).classes[1]
    assert row.iou == 0.25
    assert row.precision == 0.5
    assert row.recall == pytest.approx(1 / 3)
    assert (row.truth_pixels, row.predicted_pixels) == (3, 2)


def test_disjoint_prediction_gives_zero_iou() -> None:
    truth = np.zeros((4, 4), dtype=np.int64)
    truth[0, :] = 1
    predicted = np.zeros((4, 4), dtype=np.int64)
    predicted[3, :] = 1
    assert report(_counts(predicted, truth, k=2)).classes[1].iou == 0.0


def test_accumulation_is_commutative_and_associative() -> None:
    rng = np.random.default_rng(1)
    pairs = [(rng.integers(0, K, (6, 6)), rng.integers(0, K, (6, 6))) for _ in range(4)]
    forward = accumulate_all(K, pairs)
    assert forward == accumulate_all(K, list(reversed(pairs)))
    assert forward == accumulate_all(K, pairs[:2]) + accumulate_all(K, pairs[2:])
    assert forward.samples == 4


def test_accumulate_rejects_bad_inputs() -> None:
    counts = ConfusionCounts.empty(K)
    with pytest.raises(InputValidationError):
        accumulate(counts, np.zeros((4, 4), dtype=np.int64), np.zeros((4, 5), dtype=np.int64))
    with pytest.raises(InputValidationError):
        accumulate(counts, np.full((2, 2), K), np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(InputValidationError):
        counts.merge(ConfusionCounts.empty(K + 1))


def _oracle_rates(expected: dict[str, list[int]], k: int) -> dict[str, Any]:
    def rate(num: int, den: int) -> float | None:
        return num / den if den else None

    def mean(values: list[float | None]) -> float | None:
        defined = [v for v in values if v is not None]
        return sum(defined) / len(defined) if defined else None

    tp, fp, fn = expected["tp"], expected["fp"], expected["fn"]
    iou = [rate(tp[c], tp[c] + fp[c] + fn[c]) for c in range(k)]
    precision = [rate(tp[c], tp[c] + fp[c]) for c in range(k)]
    recall = [rate(tp[c], tp[c] + fn[c]) for c in range(k)]
    pixels = tp[0] + fp[0] + fn[0] + expected["tn"][0]
    return {
        "iou": iou,
        "precision": precision,
        "recall": recall,
        "mean_iou": mean(iou[1:]),
        "mean_precision": mean(precision[1:]),
        "mean_recall": mean(recall[1:]),
        "accuracy": sum(tp) / pixels,
    }


def _close(actual: float | None, expected: float | None) -> bool:
    if expected is None:
        return actual is None
    return actual is not None and actual == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_matches_pixel_oracle_on_random_pairs() -> None:
    rng = np.random.default_rng(2)
    for i in range(200):
        # every other pair predicts only the first three classes, leaving rates undefined
        predicted = rng.integers(0, K if i % 2 else 3, (8, 8))
        truth = rng.integers(0, K, (8, 8))
        counts = _counts(predicted, truth)
        expected = _oracle(predicted, truth, K)
        assert counts.tp.tolist() == expected["tp"]
        assert counts.fp.tolist() == expected["fp"]
        assert counts.fn.tolist() == expected["fn"]
        assert counts.tn.tolist() == expected["tn"]

        rates = _oracle_rates(expected, K)
        metrics = report(counts)
        for c in metrics.classes:
            assert _close(c.iou, rates["iou"][c.class_id]), (i, c.class_id)
            assert _close(c.precision, rates["precision"][c.class_id]), (i, c.class_id)
            assert _close(c.recall, rates["recall"][c.class_id]), (i, c.class_id)
        assert _close(metrics.mean_iou, rates["mean_iou"])
        assert _close(metrics.mean_precision, rates["mean_precision"])
        assert _close(metrics.mean_recall, rates["mean_recall"])
        assert _close(metrics.pixel_accuracy, rates["accuracy"])


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.int64, (8, 8), elements=st.integers(0, K - 1)),
    arrays(np.int64, (8, 8), elements=st.integers(0, K - 1)),
)
def test_report_identities(predicted: np.ndarray, truth: np.ndarray) -> None:
    counts = _counts(predicted, truth)
    assert np.all(counts.tp + counts.fp + counts.fn + counts.tn == 64)
    expected = _oracle(predicted, truth, K)
    metrics = report(counts)
    for c in metrics.classes:
        tp, fp, fn = (expected[k][c.class_id] for k in ("tp", "fp", "fn"))
        if tp + fp + fn:
            assert c.iou == tp / (tp + fp + fn)
        if c.iou is not None and c.precision is not None and c.recall is not None:
            assert c.iou <= min(c.precision, c.recall) + 1e-12
        for value in (c.iou, c.precision, c.recall):
            assert value is None or 0.0 <= value <= 1.0


# ---------- report ----------


def test_undefined_rates_are_flagged_and_excluded() -> None:
    truth = np.zeros((4, 4), dtype=np.int64)
    truth[:2] = 1
    counts = _counts(truth.copy(), truth, k=3)
    metrics = report(counts)
    assert metrics.classes[2].iou is None
    assert {"2:iou", "2:precision", "2:recall"} <= set(metrics.undefined)
    assert metrics.mean_iou == 1.0


def test_means_skip_background() -> None:
    predicted, truth = _class_a_example()
    metrics = report(_counts(predicted, truth, k=2))
    assert metrics.mean_iou == 0.25
    assert metrics.pixel_accuracy == pytest.approx(13 / 16)


def test_report_uses_palette_names() -> None:
    labels = np.zeros((2, 2), dtype=np.int64)
    metrics = report(_counts(labels, labels, k=len(APOLLOSCAPE)), APOLLOSCAPE)
    assert metrics.by_name("turn_symbol").class_id == 5
    with pytest.raises(InputValidationError):
        report(ConfusionCounts.empty(3), APOLLOSCAPE)


def test_csv_layout() -> None:
    metrics = report(_counts(*_class_a_example(), k=3))
    rows = list(csv.reader(io.StringIO(report_csv(metrics))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1] == ["1", "0.250000", "0.500000", "0.333333"]
    assert rows[2] == ["2", "", "", ""]
    assert rows[-1][0] == "mean"


def test_write_report(tmp_path: Path) -> None:
    metrics = report(_counts(*_class_a_example(), k=2))
    csv_path, json_path = write_report(metrics, tmp_path / "out", stem="metrics_clean")
    assert csv_path.name == "metrics_clean.csv"
    data = json.loads(json_path.read_text())
    assert data["mean_iou"] == 0.25
    assert data["classes"][1]["precision"] == 0.5
