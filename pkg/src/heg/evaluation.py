"""Accuracy, per-class average precision, and report formatting."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .graph import TemporalBipartiteGraph, batch_graphs
from .layers import HegModel, model_forward
from .pooling import PoolingHead, classify, pool

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """Aggregate metrics over one labelled graph set (percentages)."""

    accuracy: float
    mean_ap: float
    per_class_ap: dict[int, float]
    confusion: np.ndarray  # rows true class, cols predicted
    num_examples: int
    skipped_classes: list[int] = field(default_factory=list)


def predict(model: HegModel, head: PoolingHead,
            graphs: list[TemporalBipartiteGraph]) -> tuple[np.ndarray, np.ndarray]:
    """(predicted labels, class probabilities) for a list of graphs.

    Ties in the probability row resolve to the lowest class index.
    """
    if not graphs:
        raise DataError("no graphs to predict on")
    batch = batch_graphs(graphs)
    embeddings, _ = model_forward(model, batch, batch.graph.features)
    pooled, _ = pool(head, embeddings, batch.membership)
    probs, _ = classify(head, pooled)
    return np.argmax(probs, axis=1), probs


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """All-point-interpolated AP of a binary ranking, in [0, 1].

    Sorted by descending score with a stable sort, AP sums
    (recall_n - recall_{n-1}) * precision_n over the ranked list.
    Returns nan when there are no positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise ValueError("scores and positives must be equal-length vectors")
    total = int(positives.sum())
    if total == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order].astype(np.float64)
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, scores.size + 1)
    recall = tp / total
    prev = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev) * precision))


def mean_average_precision(probs: np.ndarray, labels: np.ndarray,
                           ) -> tuple[float, dict[int, float], list[int]]:
    """Macro AP over classes; classes without positives are skipped.

    Returns (mean AP, per-class AP, skipped class indices), AP in [0, 1].
    """
    labels = np.asarray(labels, dtype=np.int64)
    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for c in range(probs.shape[1]):
        ap = average_precision(probs[:, c], labels == c)
        if np.isnan(ap):
            skipped.append(c)
            log.info("class %d has no positives; excluded from mAP", c)
        else:
            per_class[c] = ap
    mean = float(np.mean(list(per_class.values()))) if per_class else float("nan")
    return mean, per_class, skipped


def evaluate(model: HegModel, head: PoolingHead,
             graphs: list[TemporalBipartiteGraph]) -> EvalReport:
    """Score labelled graphs; accuracy and APs reported as percentages."""
    labels = np.array([g.label if g.label is not None else -1 for g in graphs],
                      dtype=np.int64)
    if labels.min() < 0:
        raise DataError("cannot evaluate unlabelled graphs")
    preds, probs = predict(model, head, graphs)
    num_classes = probs.shape[1]
    if labels.max() >= num_classes:
        raise DataError(f"label {labels.max()} out of range for "
                        f"{num_classes}-class head")
    accuracy = float(np.mean(preds == labels)) * 100.0
    mean_ap, per_class, skipped = mean_average_precision(probs, labels)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(labels, preds):
        confusion[t, p] += 1
    return EvalReport(accuracy=accuracy, mean_ap=mean_ap * 100.0,
                      per_class_ap={c: v * 100.0 for c, v in per_class.items()},
                      confusion=confusion, num_examples=len(graphs),
                      skipped_classes=skipped)


def format_report(report: EvalReport) -> str:
    """Plain-text table of the report."""
    lines = [
        f"examples        {report.num_examples}",
        f"accuracy        {report.accuracy:.2f}%",
        f"mAP             {report.mean_ap:.2f}%",
    ]
    for c in sorted(report.per_class_ap):
        lines.append(f"AP[class {c}]     {report.per_class_ap[c]:.2f}%")
    for c in report.skipped_classes:
        lines.append(f"AP[class {c}]     skipped (no positives)")
    lines.append("confusion (rows true, cols predicted):")
    for row in report.confusion:
        lines.append("  " + " ".join(f"{int(v):6d}" for v in row))
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvalReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "mean_ap": report.mean_ap,
        "per_class_ap": {str(c): v for c, v in sorted(report.per_class_ap.items())},
        "confusion": report.confusion.tolist(),
        "num_examples": report.num_examples,
        "skipped_classes": report.skipped_classes,
    }


def write_report(path, report: EvalReport) -> None:
    """JSON report next to the text rendering the CLI prints."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
