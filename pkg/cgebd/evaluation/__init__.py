from cgebd.evaluation.annotations import (
    BoundaryAnnotation,
    Prediction,
    load_annotations,
    load_predictions,
    save_annotations,
    save_predictions,
)
from cgebd.evaluation.metrics import (
    THRESHOLDS,
    EvalReport,
    MatchResult,
    baseline_predictions,
    match_one_to_one,
    relative_distance,
    score_corpus,
    uniform_baseline,
)

__all__ = [
    "THRESHOLDS",
    "BoundaryAnnotation",
    "EvalReport",
    "MatchResult",
    "Prediction",
    "baseline_predictions",
    "load_annotations",
    "load_predictions",
    "match_one_to_one",
    "relative_distance",
    "save_annotations",
    "save_predictions",
    "score_corpus",
    "uniform_baseline",
]
