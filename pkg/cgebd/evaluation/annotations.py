from pathlib import Path
from typing import Dict, Iterable, List

from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from cgebd.utils.errors import AnnotationError
from cgebd.utils.helper import read_json, read_json_lines, write_json, write_json_lines

# Boundaries may sit up to half a frame past num_frames / fps
HALF_FRAME = 0.5


class BoundaryAnnotation(BaseModel):
    """Ground-truth event boundaries of one video."""

    video_id: str = Field(..., min_length=1)
    fps: float = Field(..., gt=0)
    num_frames: int = Field(..., gt=0)
    boundaries_sec: List[float] = Field(
        default_factory=list, description="Boundary timestamps in seconds"
    )

    @field_validator("boundaries_sec")
    @classmethod
    def sorted_boundaries(cls, v: List[float]) -> List[float]:
        return sorted(float(t) for t in v)

    @model_validator(mode="after")
    def boundaries_within_video(self) -> "BoundaryAnnotation":
        limit = self.duration + HALF_FRAME / self.fps
        for t in self.boundaries_sec:
            if t < 0 or t > limit:
                raise ValueError(
                    f"Boundary {t}s outside video {self.video_id} of {self.duration:.3f}s"
                )
        return self

    @property
    def duration(self) -> float:
        return self.num_frames / self.fps


class Prediction(BaseModel):
    """One line of the predictions file."""

    video_id: str
    boundaries_sec: List[float] = Field(default_factory=list)
    scores: List[float] = Field(default_factory=list, description="Per-position boundary scores")
    frame_indices: List[int] = Field(
        default_factory=list, description="Original frame of each score"
    )

    @field_validator("boundaries_sec")
    @classmethod
    def sorted_boundaries(cls, v: List[float]) -> List[float]:
        return sorted(v)


def _index_by_id(items: Iterable, what: str, source: str | Path) -> Dict:
    indexed = {}
    for item in items:
        if item.video_id in indexed:
            raise AnnotationError(f"Duplicate {what} for video {item.video_id} in {source}")
        indexed[item.video_id] = item
    return indexed


def load_annotations(path: str | Path) -> Dict[str, BoundaryAnnotation]:
    rows = read_json(path)
    if not isinstance(rows, list):
        raise AnnotationError(f"Annotation file {path} must hold a JSON list")
    try:
        annotations = [BoundaryAnnotation.model_validate(row) for row in rows]
    except ValidationError as e:
        raise AnnotationError(f"Invalid annotation in {path}: {e}")
    logger.debug(f"Loaded {len(annotations)} annotations from {path}")
    return _index_by_id(annotations, "annotation", path)


def save_annotations(annotations: Iterable[BoundaryAnnotation], path: str | Path) -> None:
    write_json(path, [a.model_dump() for a in annotations])


def load_predictions(path: str | Path) -> Dict[str, Prediction]:
    try:
        predictions = [Prediction.model_validate(row) for row in read_json_lines(path)]
    except ValidationError as e:
        raise AnnotationError(f"Invalid prediction in {path}: {e}")
    return _index_by_id(predictions, "prediction", path)


def save_predictions(predictions: Iterable[Prediction], path: str | Path) -> None:
    write_json_lines(path, [p.model_dump() for p in predictions])
