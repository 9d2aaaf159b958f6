"""
Synthetic videos with known event boundaries.

Each segment shows a small low-contrast textured rectangle moving at a
constant integer velocity (wrapping at the frame edges) over full-range
noise, which either stays put or scrolls by a fixed per-frame pan. A cut
starts a segment with freshly drawn background, object and velocity; a
motion reversal negates the object velocity.
"""

from enum import Enum
from typing import List, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator

from cgebd.codec.models import RawVideo
from cgebd.evaluation.annotations import BoundaryAnnotation
from cgebd.nn.tensor import make_rng

MIN_EVENT_GAP = 4
SPLIT_STREAMS = {"train": 0, "test": 1}


class EventKind(str, Enum):
    CUT = "cut"
    MOTION_REVERSAL = "motion_reversal"


class SynthEvent(BaseModel):
    frame: int = Field(..., description="First frame of the new segment")
    kind: EventKind


class SynthSpec(BaseModel):
    """Everything needed to render one video; equal specs give equal pixels."""

    video_id: str = "synth"
    seed: int = 0
    num_frames: int = Field(default=48, ge=1)
    fps: float = Field(default=12.0, gt=0)
    height: int = Field(default=64, ge=8)
    width: int = Field(default=64, ge=8)
    events: List[SynthEvent] = Field(default_factory=list)
    max_speed: int = Field(
        default=3, ge=1, description="Largest per-frame object displacement in pixels"
    )
    search_radius: int = Field(
        default=8, ge=0, description="Codec search radius the motion must fit in"
    )
    texture_contrast: int = Field(
        default=6, ge=0, le=64, description="Object texture amplitude around its base colour"
    )
    pan: Tuple[int, int] = Field(
        default=(0, 0), description="Per-frame background displacement (dy, dx) in pixels"
    )

    @field_validator("events")
    @classmethod
    def events_spaced(cls, v: List[SynthEvent]) -> List[SynthEvent]:
        frames = [e.frame for e in v]
        for a, b in zip(frames, frames[1:]):
            if b - a < MIN_EVENT_GAP:
                raise ValueError(
                    f"Events at frames {a} and {b} are closer than {MIN_EVENT_GAP} frames"
                )
        return v

    @model_validator(mode="after")
    def consistent(self) -> "SynthSpec":
        for event in self.events:
            if not 0 < event.frame < self.num_frames:
                raise ValueError(f"Event frame {event.frame} outside (0, {self.num_frames})")
        if self.max_speed > self.search_radius:
            raise ValueError(
                f"Object speed {self.max_speed} exceeds codec search radius {self.search_radius}"
            )
        if max(abs(p) for p in self.pan) > self.search_radius:
            raise ValueError(f"Pan {self.pan} exceeds codec search radius {self.search_radius}")
        return self


class SynthDefaults(BaseModel):
    """Corpus-level generation settings."""

    train_videos: int = Field(default=200, ge=0)
    test_videos: int = Field(default=50, ge=0)
    num_frames: int = Field(default=48, ge=MIN_EVENT_GAP * 2)
    fps: float = Field(default=12.0, gt=0)
    height: int = Field(default=64, ge=8)
    width: int = Field(default=64, ge=8)
    min_events: int = Field(default=1, ge=0)
    max_events: int = Field(default=3, ge=0)
    max_speed: int = Field(default=3, ge=1)
    search_radius: int = Field(default=8, ge=0)

    @model_validator(mode="after")
    def event_range(self) -> "SynthDefaults":
        if self.min_events > self.max_events:
            raise ValueError(f"min_events {self.min_events} exceeds max_events {self.max_events}")
        return self


def video_seed(corpus_seed: int, split: str, index: int) -> int:
    """Per-video seed derived from (corpus seed, split, index)."""
    state = np.random.SeedSequence([corpus_seed, SPLIT_STREAMS[split], index]).generate_state(1)
    return int(state[0])


def plan_events(rng: np.random.Generator, num_frames: int, count: int) -> List[SynthEvent]:
    """Up to ``count`` event frames in [gap, F - gap], pairwise at least MIN_EVENT_GAP apart."""
    candidates = np.arange(MIN_EVENT_GAP, num_frames - MIN_EVENT_GAP + 1)
    frames: List[int] = []
    for frame in rng.permutation(candidates):
        if len(frames) == count:
            break
        if all(abs(int(frame) - f) >= MIN_EVENT_GAP for f in frames):
            frames.append(int(frame))
    kinds = rng.choice([EventKind.CUT.value, EventKind.MOTION_REVERSAL.value], size=len(frames))
    return [SynthEvent(frame=f, kind=k) for f, k in zip(sorted(frames), kinds)]


def corpus_specs(defaults: SynthDefaults, corpus_seed: int, split: str) -> List[SynthSpec]:
    count = defaults.train_videos if split == "train" else defaults.test_videos
    specs = []
    for index in range(count):
        seed = video_seed(corpus_seed, split, index)
        rng = make_rng(seed, 0)
        num_events = int(rng.integers(defaults.min_events, defaults.max_events + 1))
        specs.append(
            SynthSpec(
                video_id=f"{split}_{index:04d}",
                seed=seed,
                num_frames=defaults.num_frames,
                fps=defaults.fps,
                height=defaults.height,
                width=defaults.width,
                events=plan_events(rng, defaults.num_frames, num_events),
                max_speed=defaults.max_speed,
                search_radius=defaults.search_radius,
            )
        )
    return specs


class _Segment:
    """Background, object texture, position and velocity of one shot."""

    def __init__(self, rng: np.random.Generator, spec: SynthSpec):
        height, width = spec.height, spec.width
        self.background = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)

        obj_h = int(rng.integers(max(2, height // 8), max(3, height // 4) + 1))
        obj_w = int(rng.integers(max(2, width // 8), max(3, width // 4) + 1))
        base = rng.integers(40, 216, size=3)
        noise = rng.integers(
            -spec.texture_contrast, spec.texture_contrast + 1, size=(obj_h, obj_w, 3)
        )
        self.texture = np.clip(base + noise, 0, 255).astype(np.uint8)

        self.position = np.array([rng.integers(0, height), rng.integers(0, width)])
        velocity = np.zeros(2, dtype=np.int64)
        while not velocity.any():
            velocity = rng.integers(-spec.max_speed, spec.max_speed + 1, size=2)
        self.velocity = velocity
        self.pan = np.array(spec.pan, dtype=np.int64)
        self.scroll = np.zeros(2, dtype=np.int64)

    def render(self) -> np.ndarray:
        shift = (int(self.scroll[0]), int(self.scroll[1]))
        frame = np.roll(self.background, shift=shift, axis=(0, 1))
        height, width = frame.shape[:2]
        rows = (self.position[0] + np.arange(self.texture.shape[0])) % height
        cols = (self.position[1] + np.arange(self.texture.shape[1])) % width
        frame[np.ix_(rows, cols)] = self.texture
        return frame

    def step(self) -> None:
        self.position = self.position + self.velocity
        self.scroll = self.scroll + self.pan


def generate_video(spec: SynthSpec) -> Tuple[RawVideo, BoundaryAnnotation]:
    """Render a spec and its ground-truth boundaries (event frame / fps)."""
    rng = make_rng(spec.seed, 1)
    events = {e.frame: e.kind for e in spec.events}

    segment = _Segment(rng, spec)
    frames = np.empty((spec.num_frames, spec.height, spec.width, 3), dtype=np.uint8)
    for index in range(spec.num_frames):
        kind = events.get(index)
        if kind == EventKind.CUT:
            segment = _Segment(rng, spec)
        elif index > 0:
            if kind == EventKind.MOTION_REVERSAL:
                segment.velocity = -segment.velocity
            segment.step()
        frames[index] = segment.render()

    annotation = BoundaryAnnotation(
        video_id=spec.video_id,
        fps=spec.fps,
        num_frames=spec.num_frames,
        boundaries_sec=[e.frame / spec.fps for e in spec.events],
    )
    logger.debug(f"Rendered {spec.video_id}: {spec.num_frames} frames, {len(spec.events)} events")
    return RawVideo(frames=frames, fps=spec.fps), annotation
