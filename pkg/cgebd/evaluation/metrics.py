"""
Relative-distance boundary scoring.

A prediction matches a ground-truth boundary when |pred - gt| / duration is
within the threshold; matching is one-to-one and tp/fp/fn are summed over the
corpus before precision, recall and F1 are taken.
"""

from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from cgebd.evaluation.annotations import BoundaryAnnotation
from cgebd.utils.errors import AnnotationError

THRESHOLDS: Tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(1, 11))


class MatchResult(BaseModel):
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


class ThresholdScore(MatchResult):
    threshold: float


class EvalReport(BaseModel):
    """Per-threshold precision / recall / F1 plus their average F1."""

    name: str = "model"
    matching: str = Field(
        default="one-to-one maximum matching", description="How boundaries are paired"
    )
    aggregation: str = Field(
        default="global", description="tp/fp/fn summed over videos before P/R/F1"
    )
    num_videos: int = 0
    scores: List[ThresholdScore] = Field(default_factory=list)
    avg_f1: float = 0.0

    def f1_at(self, threshold: float) -> float:
        for score in self.scores:
            if abs(score.threshold - threshold) < 1e-9:
                return score.f1
        raise KeyError(f"No score at threshold {threshold}")

    def format_table(self) -> str:
        header = ["Rel.Dis."] + [f"{s.threshold:.2f}" for s in self.scores] + ["avg"]
        rows = [
            ["Prec"] + [f"{s.precision:.3f}" for s in self.scores] + [""],
            ["Rec"] + [f"{s.recall:.3f}" for s in self.scores] + [""],
            [f"F1 ({self.name})"] + [f"{s.f1:.3f}" for s in self.scores] + [f"{self.avg_f1:.3f}"],
        ]
        width = max(len(cell) for row in [header] + rows for cell in row[:1])
        lines = []
        for row in [header] + rows:
            lines.append(
                " ".join([row[0].ljust(width)] + [cell.rjust(6) for cell in row[1:]]).rstrip()
            )
        return "\n".join(lines)


def relative_distance(pred: float, gt: float, duration: float) -> float:
    if duration <= 0:
        raise ValueError(f"Duration must be positive, got {duration}")
    return abs(pred - gt) / duration


def f1_score(precision: float, recall: float) -> float:
    total = precision + recall
    return 2 * precision * recall / total if total > 0 else 0.0


def _check_sorted(values: Sequence[float], what: str) -> None:
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be sorted ascending")


def result_from_counts(tp: int, num_preds: int, num_gts: int) -> MatchResult:
    precision = tp / num_preds if num_preds else 0.0
    recall = tp / num_gts if num_gts else 0.0
    return MatchResult(
        tp=tp,
        fp=num_preds - tp,
        fn=num_gts - tp,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
    )


def count_matches(
    preds: Sequence[float], gts: Sequence[float], duration: float, threshold: float
) -> int:
    """
    Size of the maximum one-to-one matching.

    Eligibility is an interval around each timestamp, so walking both sorted
    lists and dropping the earlier unmatched timestamp is optimal.
    """
    _check_sorted(preds, "Predictions")
    _check_sorted(gts, "Ground-truth boundaries")
    i = j = tp = 0
    while i < len(preds) and j < len(gts):
        if relative_distance(preds[i], gts[j], duration) <= threshold:
            tp += 1
            i += 1
            j += 1
        elif preds[i] < gts[j]:
            i += 1
        else:
            j += 1
    return tp


def match_one_to_one(
    preds: Sequence[float], gts: Sequence[float], duration: float, threshold: float
) -> MatchResult:
    return result_from_counts(count_matches(preds, gts, duration, threshold), len(preds), len(gts))


def score_corpus(
    predictions: Mapping[str, Sequence[float]],
    annotations: Mapping[str, BoundaryAnnotation],
    thresholds: Sequence[float] = THRESHOLDS,
    name: str = "model",
) -> EvalReport:
    """
    Corpus report over every annotated video.

    Annotated videos without a prediction count as predicting nothing;
    predictions for videos without an annotation are an error.
    """
    unknown = sorted(set(predictions) - set(annotations))
    if unknown:
        raise AnnotationError(
            f"Predictions for {len(unknown)} unannotated videos, e.g. {unknown[0]}"
        )

    report = EvalReport(name=name, num_videos=len(annotations))
    for threshold in thresholds:
        tp = num_preds = num_gts = 0
        for video_id, annotation in annotations.items():
            preds = sorted(predictions.get(video_id, []))
            tp += count_matches(preds, annotation.boundaries_sec, annotation.duration, threshold)
            num_preds += len(preds)
            num_gts += len(annotation.boundaries_sec)
        result = result_from_counts(tp, num_preds, num_gts)
        report.scores.append(ThresholdScore(threshold=threshold, **result.model_dump()))

    report.avg_f1 = float(np.mean([s.f1 for s in report.scores])) if report.scores else 0.0
    return report


def uniform_baseline(annotation: BoundaryAnnotation, interval: float = 1.0) -> List[float]:
    """Boundaries every ``interval`` seconds strictly inside the video."""
    if interval <= 0:
        raise ValueError(f"Baseline interval must be positive, got {interval}")
    count = int(np.ceil(annotation.duration / interval))
    return [k * interval for k in range(1, count) if k * interval < annotation.duration]


def baseline_predictions(
    annotations: Mapping[str, BoundaryAnnotation], interval: float = 1.0
) -> Dict[str, List[float]]:
    return {video_id: uniform_baseline(a, interval) for video_id, a in annotations.items()}
