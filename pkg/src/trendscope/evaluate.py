"""Accuracy measurement of attribute predictions against labeled corpora."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ReportError
from .ingest import Corpus
from .schema import AttributeSchema


@dataclass(frozen=True)
class AttributeAccuracy:
    attribute_id: str
    support: int        # labeled images seen for this attribute
    correct: int
    accuracy: float


@dataclass(frozen=True)
class AccuracyReport:
    per_attribute: dict[str, AttributeAccuracy]
    overall: float      # unweighted mean over attributes with support
    skipped: tuple[str, ...] = ()  # attributes with zero labeled support


def evaluate(
    predictions: dict[str, dict[str, int]], truth: Corpus, schema: AttributeSchema
) -> AccuracyReport:
    """Per-attribute and overall accuracy.

    predictions maps image id -> {attribute id: 0/1}. Every predicted image
    must exist in the corpus and carry labels; accuracy per attribute is
    measured over the images labeled for it, and the overall figure is the
    unweighted mean across attributes with nonzero support.
    """
    by_id = {record.id: record for record in truth.records}
    for image_id in predictions:
        if image_id not in by_id:
            raise ReportError(f"predicted image {image_id!r} is not in the corpus")
        if by_id[image_id].labels is None:
            raise ReportError(f"image {image_id!r} has no labels to evaluate against")

    support: dict[str, int] = {a: 0 for a in schema.ids}
    correct: dict[str, int] = {a: 0 for a in schema.ids}
    for image_id, decided in predictions.items():
        labels = by_id[image_id].labels or {}
        for attr_id, label in labels.items():
            if attr_id not in decided:
                continue
            support[attr_id] += 1
            if int(decided[attr_id]) == int(label):
                correct[attr_id] += 1

    per_attribute: dict[str, AttributeAccuracy] = {}
    skipped: list[str] = []
    total = 0.0
    counted = 0
    for attr_id in schema.ids:
        if support[attr_id] == 0:
            skipped.append(attr_id)
            continue
        acc = correct[attr_id] / support[attr_id]
        per_attribute[attr_id] = AttributeAccuracy(attr_id, support[attr_id], correct[attr_id], acc)
        total += acc
        counted += 1
    overall = total / counted if counted else 0.0
    return AccuracyReport(
        per_attribute=per_attribute, overall=overall, skipped=tuple(skipped)
    )


def accuracy_csv(report: AccuracyReport) -> str:
    """Versioned CSV: one (attribute, support, accuracy) row per attribute."""
    lines = ["# format: trendscope.accuracy/1", "attribute,support,accuracy"]
    for attr_id, entry in report.per_attribute.items():
        lines.append(f"{attr_id},{entry.support},{entry.accuracy:.6f}")
    return "\n".join(lines) + "\n"


def summary_line(report: AccuracyReport) -> str:
    n = len(report.per_attribute)
    line = f"overall accuracy {report.overall:.4f} over {n} attributes"
    if report.skipped:
        line += f" ({len(report.skipped)} skipped for zero support: {', '.join(report.skipped)})"
    return line
