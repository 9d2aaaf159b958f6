"""
SCCE encoder + boundary head over a whole video.

A video's sequence is every GOP's [I, sampled P...] in temporal order; the
encoder runs per GOP and the head runs once over the concatenated sequence.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cgebd.codec.accumulation import AccumulatedPFrame, accumulate_gop
from cgebd.codec.models import CompressedVideo
from cgebd.model.head import (
    BoundaryHead,
    EmbeddingSequence,
    LabelMode,
    bce_loss,
    make_labels,
    map_boundaries_to_positions,
    pick_boundaries,
)
from cgebd.model.scce import (
    EncoderVariant,
    GopInput,
    ScceEncoder,
    prepare_gop_input,
    sample_pframe_indices,
)
from cgebd.nn.tensor import ParamSet, Tensor


class ModelDims(BaseModel):
    model_config = ConfigDict(frozen=True)

    channels: int = Field(default=32, ge=4, description="Feature channels C")
    reduction: int = Field(default=4, ge=1, description="Channel gate bottleneck reduction")
    window_k: int = Field(default=8, ge=0, description="Contrast window k on each side")
    sample_t: int = Field(default=3, ge=0, description="P-frames sampled per GOP")
    alpha: float = Field(default=1.0, gt=0, description="Gaussian soft label width")
    threshold: float = Field(default=0.5, ge=0, le=1, description="Peak picking score threshold")
    nms_radius: int = Field(
        default=2, ge=0, description="Peak picking suppression radius in positions"
    )
    encoder: EncoderVariant = Field(
        default=EncoderVariant.SCCE, description="P-frame representation"
    )
    search_radius: int = Field(
        default=8, ge=0, description="Codec search radius used to scale motion"
    )


@dataclass
class GopSample:
    """Decoded I-frame plus the accumulated P-frames the encoder will see."""

    iframe: np.ndarray
    pframes: List[AccumulatedPFrame]
    frame_index: int


@dataclass
class VideoSample:
    video_id: str
    fps: float
    num_frames: int
    gops: List[GopSample] = field(default_factory=list)

    @property
    def frame_indices(self) -> np.ndarray:
        indices = []
        for gop in self.gops:
            indices.append(gop.frame_index)
            indices.extend(gop.frame_index + acc.t for acc in gop.pframes)
        return np.asarray(indices, dtype=np.int64)

    @property
    def duration(self) -> float:
        return self.num_frames / self.fps

    def gop_of_positions(self) -> List[int]:
        """GOP index for each sequence position."""
        owners = []
        for index, gop in enumerate(self.gops):
            owners.extend([index] * (1 + len(gop.pframes)))
        return owners


def prepare_video_sample(cv: CompressedVideo, video_id: str, sample_t: int) -> VideoSample:
    """Accumulate every GOP and keep only the P-frames that will be sampled."""
    sample = VideoSample(video_id=video_id, fps=cv.fps, num_frames=cv.num_frames)
    for index, gop in enumerate(cv.gops):
        picks = set(sample_pframe_indices(len(gop.pframes), sample_t))
        accumulated = accumulate_gop(gop, cv.params.block_size) if picks else []
        sample.gops.append(
            GopSample(
                iframe=gop.iframe,
                pframes=[acc for acc in accumulated if acc.t in picks],
                frame_index=cv.gop_start(index),
            )
        )
    return sample


@dataclass
class ScoreTrack:
    video_id: str
    scores: np.ndarray
    frame_indices: np.ndarray
    fps: float


class GebdModel:
    """Parameters are created in a fixed order: encoder first, then head."""

    def __init__(self, dims: ModelDims | None = None, seed: int = 0):
        self.dims = dims or ModelDims()
        self.params = ParamSet(seed)
        self.encoder = ScceEncoder(
            self.params, self.dims.channels, self.dims.reduction, self.dims.encoder
        )
        self.head = BoundaryHead(self.params, self.dims.channels, self.dims.window_k)

    def gop_input(self, gop: GopSample) -> GopInput:
        return prepare_gop_input(gop.iframe, gop.pframes, self.dims.search_radius, gop.frame_index)

    def embed(self, sample: VideoSample, gops: Sequence[int] | None = None):
        """Embeddings of the chosen GOPs (all by default); backward takes (L, C)."""
        chosen = range(len(sample.gops)) if gops is None else gops
        blocks = []
        backwards = []
        indices: List[int] = []
        for index in chosen:
            embeddings, back = self.encoder.encode_prepared(self.gop_input(sample.gops[index]))
            blocks.append(embeddings.vectors)
            backwards.append(back)
            indices.extend(embeddings.frame_indices)

        sequence = EmbeddingSequence(np.concatenate(blocks, axis=0), indices, sample.fps)
        sizes = [block.shape[0] for block in blocks]

        def backward(grad: Tensor) -> None:
            start = 0
            for size, back in zip(sizes, backwards):
                back(grad[start : start + size])
                start += size

        return sequence, backward

    def forward(
        self, sample: VideoSample
    ) -> Tuple[EmbeddingSequence, Tensor, Callable[[Tensor], None]]:
        sequence, back_embed = self.embed(sample)
        scores, back_head = self.head(sequence.vectors)

        def backward(grad: Tensor) -> None:
            back_embed(back_head(grad))

        return sequence, scores, backward

    def targets(
        self, sample: VideoSample, boundaries_sec: Sequence[float], mode: LabelMode | str
    ) -> Tensor:
        frame_indices = sample.frame_indices
        positions = map_boundaries_to_positions(boundaries_sec, frame_indices, sample.fps)
        return make_labels(positions, len(frame_indices), mode, self.dims.alpha)

    def loss_and_grad(self, sample: VideoSample, targets: Tensor) -> float:
        """BCE loss of one video; parameter gradients are added into ``self.params``."""
        _, scores, backward = self.forward(sample)
        loss, grad = bce_loss(scores, targets)
        backward(grad)
        return loss

    def score(self, sample: VideoSample) -> ScoreTrack:
        sequence, scores, _ = self.forward(sample)
        return ScoreTrack(sample.video_id, scores, sequence.frame_indices, sample.fps)

    def score_per_candidate(self, sample: VideoSample) -> ScoreTrack:
        """
        Score every position from its own receptive field only.

        Position l depends on embeddings l-k-1 .. l+k+1, so each candidate
        re-encodes the GOPs covering that window and runs the head on it.
        """
        owners = sample.gop_of_positions()
        length = len(owners)
        radius = self.dims.window_k + 1
        scores = np.zeros(length)

        for position in range(length):
            lo, hi = max(0, position - radius), min(length, position + radius + 1)
            gops = sorted(set(owners[lo:hi]))
            first = owners.index(gops[0])
            sequence, _ = self.embed(sample, gops)
            window, _ = self.head(sequence.vectors[lo - first : hi - first])
            scores[position] = window[position - lo]

        return ScoreTrack(sample.video_id, scores, sample.frame_indices, sample.fps)

    def predict(self, sample: VideoSample) -> Tuple[List[float], ScoreTrack]:
        track = self.score(sample)
        boundaries = pick_boundaries(
            track.scores, track.frame_indices, track.fps, self.dims.threshold, self.dims.nms_radius
        )
        return boundaries, track
