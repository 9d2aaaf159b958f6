from cgebd.model.head import (
    BoundaryHead,
    EmbeddingSequence,
    LabelMode,
    bce_loss,
    contrast_features,
    gaussian_soft_labels,
    pick_boundaries,
)
from cgebd.model.network import GebdModel, ModelDims, ScoreTrack, VideoSample, prepare_video_sample
from cgebd.model.scce import EncoderVariant, ScceEncoder, refine_and_fuse, sample_pframe_indices
from cgebd.model.trainer import EpochRecord, train_model

__all__ = [
    "BoundaryHead",
    "EmbeddingSequence",
    "EncoderVariant",
    "EpochRecord",
    "GebdModel",
    "LabelMode",
    "ModelDims",
    "ScceEncoder",
    "ScoreTrack",
    "VideoSample",
    "bce_loss",
    "contrast_features",
    "gaussian_soft_labels",
    "pick_boundaries",
    "prepare_video_sample",
    "refine_and_fuse",
    "sample_pframe_indices",
    "train_model",
]
