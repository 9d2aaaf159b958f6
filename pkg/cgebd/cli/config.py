import json
import os
from pathlib import Path
from typing import List, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cgebd.codec.models import CodecParams
from cgebd.model.head import LabelMode
from cgebd.model.network import ModelDims
from cgebd.model.scce import FEATURE_STRIDE, EncoderVariant
from cgebd.nn.optim import SgdConfig
from cgebd.synth.generator import SynthDefaults
from cgebd.utils.errors import ConfigError

CONFIG_ENV = "CGEBD_CONFIG"


class PipelineConfig(BaseModel):
    """
    Flat pipeline configuration; every constant appears once.

    Training defaults: SGD lr 1e-2, momentum 0.9, weight decay 1e-4, 30 epochs
    with x0.1 drops at epochs 16 and 24, batches of 4 videos. Model defaults:
    GOP of 1 I + 11 P, 3 sampled P-frames, k = 8, alpha = 1.
    """

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, description="Seed for parameters, shuffling and the corpus")
    workers: int = Field(default=1, ge=1, description="Threads for per-video encoding and loading")

    # codec
    block_size: int = Field(default=8, ge=1, description="Motion block size B")
    search_radius: int = Field(default=8, ge=0, le=127, description="Motion search radius S")
    gop_pframes: int = Field(default=11, ge=1, le=255, description="P-frames per GOP")

    # model
    channels: int = Field(default=32, ge=4, description="Feature channels C")
    reduction: int = Field(default=4, ge=1, description="Channel gate bottleneck reduction")
    window_k: int = Field(default=8, ge=0, description="Contrast window k")
    sample_t: int = Field(default=3, ge=0, description="P-frames sampled per GOP")
    alpha: float = Field(default=1.0, gt=0, description="Gaussian soft label width")
    threshold: float = Field(default=0.5, ge=0, le=1, description="Peak picking threshold")
    nms_radius: int = Field(default=2, ge=0, description="Peak picking suppression radius")
    encoder: EncoderVariant = Field(
        default=EncoderVariant.SCCE, description="scce | vanilla | none"
    )
    label_mode: LabelMode = Field(default=LabelMode.GAUSSIAN, description="gaussian | hard")

    # optimization
    learning_rate: float = Field(default=1e-2, gt=0)
    momentum: float = Field(default=0.9, ge=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    decay_epochs: List[int] = Field(default_factory=lambda: [16, 24])
    decay_factor: float = Field(default=0.1, gt=0, le=1)
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=4, ge=1, description="Videos per SGD step")

    # synthetic corpus
    train_videos: int = Field(default=200, ge=0)
    test_videos: int = Field(default=50, ge=0)
    num_frames: int = Field(default=48, ge=8)
    fps: float = Field(default=12.0, gt=0)
    height: int = Field(default=64, ge=FEATURE_STRIDE)
    width: int = Field(default=64, ge=FEATURE_STRIDE)
    min_events: int = Field(default=1, ge=0)
    max_events: int = Field(default=3, ge=0)
    max_speed: int = Field(default=3, ge=1)

    # paths
    corpus_dir: str = Field(default="data/corpus", description="Holds one directory per split")
    train_split: str = "train"
    test_split: str = "test"
    checkpoint: str = "runs/model.ckp"
    predictions: str = "runs/predictions.jsonl"
    report: str = "runs/report.json"
    log_file: str = Field(
        default="logs/cgebd.log", description="Empty string disables the file log"
    )

    # evaluation and diagnostics
    baseline_interval: float = Field(
        default=1.0, gt=0, description="Uniform baseline spacing in seconds"
    )
    gradcheck_tolerance: float = Field(default=1e-5, gt=0)
    gradcheck_samples: int = Field(default=4, ge=1, description="Entries compared per parameter")
    gradcheck_instances: int = Field(default=5, ge=1, description="Seeded instances checked")
    ablate_seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    ablate_window_ks: List[int] = Field(default_factory=lambda: [0, 2, 4, 8])
    ablate_epochs: Optional[int] = Field(
        default=None, ge=0, description="Epochs per ablation run, default epochs"
    )
    ablate_timing_videos: int = Field(default=5, ge=1)

    @field_validator("height", "width")
    @classmethod
    def feature_grid(cls, v: int) -> int:
        if v % FEATURE_STRIDE:
            raise ValueError(f"frame size must be divisible by {FEATURE_STRIDE}")
        return v

    @model_validator(mode="after")
    def consistent(self) -> "PipelineConfig":
        if self.max_speed > self.search_radius:
            raise ValueError(
                f"max_speed {self.max_speed} exceeds search_radius {self.search_radius}"
            )
        if self.channels % self.reduction:
            raise ValueError(
                f"channels {self.channels} not divisible by reduction {self.reduction}"
            )
        if any(k < 0 for k in self.ablate_window_ks):
            raise ValueError("ablate_window_ks must be non-negative")
        return self

    def codec_params(self) -> CodecParams:
        return CodecParams(
            block_size=self.block_size,
            search_radius=self.search_radius,
            gop_pframes=self.gop_pframes,
        )

    def model_dims(self, **overrides) -> ModelDims:
        dims = dict(
            channels=self.channels,
            reduction=self.reduction,
            window_k=self.window_k,
            sample_t=self.sample_t,
            alpha=self.alpha,
            threshold=self.threshold,
            nms_radius=self.nms_radius,
            encoder=self.encoder,
            search_radius=self.search_radius,
        )
        dims.update(overrides)
        return ModelDims(**dims)

    def sgd_config(self, epochs: Optional[int] = None) -> SgdConfig:
        return SgdConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            decay_epochs=self.decay_epochs,
            decay_factor=self.decay_factor,
            epochs=self.epochs if epochs is None else epochs,
        )

    def synth_defaults(self) -> SynthDefaults:
        return SynthDefaults(
            train_videos=self.train_videos,
            test_videos=self.test_videos,
            num_frames=self.num_frames,
            fps=self.fps,
            height=self.height,
            width=self.width,
            min_events=self.min_events,
            max_events=self.max_events,
            max_speed=self.max_speed,
            search_radius=self.search_radius,
        )

    def split_dir(self, split: str) -> Path:
        return Path(self.corpus_dir) / split

    def annotations_path(self, split: str) -> Path:
        return self.split_dir(split) / "annotations.json"


def load_config(path: Optional[str] = None, **overrides) -> PipelineConfig:
    """
    Config from ``path`` (or $CGEBD_CONFIG), defaults otherwise, then
    non-None ``overrides`` on top.
    """
    path = path or os.getenv(CONFIG_ENV)
    values = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in config {path}: {e}")
        if not isinstance(values, dict):
            raise ConfigError(f"Config {path} must be a JSON object")
        logger.debug(f"Loaded config from {path}")

    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def dump_config(config: PipelineConfig) -> str:
    return config.model_dump_json(indent=2)
