"""
Pipeline steps behind the command line.

Each ``run_*`` function takes the resolved PipelineConfig, does its work
through the library packages and returns something a test can inspect.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from cgebd.cli.config import PipelineConfig
from cgebd.codec import encode_video, read_container, write_container
from cgebd.codec.models import CodecParams, CompressedVideo, RawVideo
from cgebd.evaluation import (
    BoundaryAnnotation,
    EvalReport,
    Prediction,
    baseline_predictions,
    load_annotations,
    load_predictions,
    save_annotations,
    save_predictions,
    score_corpus,
)
from cgebd.model import GebdModel, ModelDims, VideoSample, prepare_video_sample, train_model
from cgebd.model.trainer import EpochRecord
from cgebd.nn import GradCheckReport, gradient_check, load_checkpoint, save_checkpoint
from cgebd.synth import SynthEvent, SynthSpec, corpus_specs, generate_video
from cgebd.utils.errors import ConfigError, DataError, NumericError, ShapeError
from cgebd.utils.helper import pipeline_step, validate_paths, write_json

CONTAINER_SUFFIX = ".cgv"
GRADCHECK_PAN = (1, 1)


class GopStats(BaseModel):
    index: int
    pframes: int
    mean_abs_mv: float
    max_abs_mv: float
    nonzero_mv_fraction: float
    mean_abs_residual: float


class InspectReport(BaseModel):
    path: str
    size_bytes: int
    fps: float
    width: int
    height: int
    block_size: int
    gop_pframes: int
    num_gops: int
    num_frames: int
    duration: float
    gops: List[GopStats]

    def format_text(self) -> str:
        lines = [
            f"{self.path}: {self.size_bytes} bytes",
            f"  {self.width}x{self.height} @ {self.fps:g} fps, "
            f"{self.num_frames} frames ({self.duration:.2f}s)",
            f"  block {self.block_size}, GOP 1+{self.gop_pframes}, {self.num_gops} GOPs",
            "  gop  P  mean|MV|  max|MV|  nonzero  mean|res|",
        ]
        for g in self.gops:
            lines.append(
                f"  {g.index:>3} {g.pframes:>2} {g.mean_abs_mv:>9.3f} {g.max_abs_mv:>8.3f} "
                f"{g.nonzero_mv_fraction:>8.3f} {g.mean_abs_residual:>10.3f}"
            )
        return "\n".join(lines)


def _map(config: PipelineConfig, func, items: Sequence) -> List:
    """Order-preserving map, threaded when ``config.workers > 1``."""
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


@pipeline_step
def run_synth(config: PipelineConfig, out: Optional[str] = None) -> Dict[str, int]:
    """Render, encode and write both corpus splits with their annotations."""
    corpus_dir = Path(out or config.corpus_dir)
    params = config.codec_params()
    defaults = config.synth_defaults()
    counts = {}

    for split in (config.train_split, config.test_split):
        specs = corpus_specs(
            defaults, config.seed, "train" if split == config.train_split else "test"
        )
        split_dir = corpus_dir / split

        def render(spec: SynthSpec) -> BoundaryAnnotation:
            video, annotation = generate_video(spec)
            write_container(
                encode_video(video, params), split_dir / f"{spec.video_id}{CONTAINER_SUFFIX}"
            )
            return annotation

        annotations = _map(config, render, specs)
        save_annotations(annotations, split_dir / "annotations.json")
        counts[split] = len(annotations)
        logger.info(f"Wrote {len(annotations)} {split} videos to {split_dir}")

    return counts


@pipeline_step
def run_encode(config: PipelineConfig, source: str, out: Optional[str] = None) -> Path:
    """Import a raw video (.npz with ``frames`` and ``fps``) into a container."""
    validate_paths(source=source)
    try:
        with np.load(source) as archive:
            frames, fps = archive["frames"], float(archive["fps"])
    except KeyError as e:
        raise DataError(f"{source} is missing array {e}")
    except (ValueError, OSError) as e:
        raise DataError(f"Cannot read raw video {source}: {e}")

    try:
        video = RawVideo(frames=frames, fps=fps)
    except ValueError as e:
        raise DataError(f"Invalid raw video {source}: {e}")

    target = Path(out) if out else Path(source).with_suffix(CONTAINER_SUFFIX)
    size = write_container(encode_video(video, config.codec_params(), config.workers), target)
    logger.info(f"Encoded {video.num_frames} frames from {source} into {target} ({size} bytes)")
    return target


def gop_statistics(cv: CompressedVideo) -> List[GopStats]:
    """Per-GOP motion vector lengths and mean absolute residual."""
    stats = []
    for index, gop in enumerate(cv.gops):
        if not gop.pframes:
            stats.append(
                GopStats(
                    index=index,
                    pframes=0,
                    mean_abs_mv=0.0,
                    max_abs_mv=0.0,
                    nonzero_mv_fraction=0.0,
                    mean_abs_residual=0.0,
                )
            )
            continue
        motion = np.stack([p.motion for p in gop.pframes]).astype(np.float64)
        lengths = np.linalg.norm(motion, axis=-1)
        residual = np.abs(np.stack([p.residual for p in gop.pframes]).astype(np.int32))
        stats.append(
            GopStats(
                index=index,
                pframes=len(gop.pframes),
                mean_abs_mv=float(lengths.mean()),
                max_abs_mv=float(lengths.max()),
                nonzero_mv_fraction=float(np.count_nonzero(lengths) / lengths.size),
                mean_abs_residual=float(residual.mean()),
            )
        )
    return stats


@pipeline_step
def run_inspect(config: PipelineConfig, path: str) -> InspectReport:
    cv = read_container(path, config.search_radius)
    report = InspectReport(
        path=str(path),
        size_bytes=Path(path).stat().st_size,
        fps=cv.fps,
        width=cv.width,
        height=cv.height,
        block_size=cv.params.block_size,
        gop_pframes=cv.params.gop_pframes,
        num_gops=cv.num_gops,
        num_frames=cv.num_frames,
        duration=cv.duration,
        gops=gop_statistics(cv),
    )
    return report


def container_paths(config: PipelineConfig, split: str) -> List[Path]:
    split_dir = config.split_dir(split)
    validate_paths(split_dir=str(split_dir))
    paths = sorted(split_dir.glob(f"*{CONTAINER_SUFFIX}"))
    if not paths:
        raise DataError(f"No {CONTAINER_SUFFIX} containers in {split_dir}")
    return paths


def load_samples(
    config: PipelineConfig, paths: Sequence[Path], sample_t: Optional[int] = None
) -> List[VideoSample]:
    """Read containers and accumulate the P-frames the encoder samples."""
    sample_t = config.sample_t if sample_t is None else sample_t

    def load(path: Path) -> VideoSample:
        cv = read_container(path, config.search_radius)
        return prepare_video_sample(cv, Path(path).stem, sample_t)

    samples = _map(config, load, list(paths))
    logger.debug(f"Prepared {len(samples)} videos")
    return samples


def load_split(
    config: PipelineConfig, split: str
) -> Tuple[List[VideoSample], Dict[str, BoundaryAnnotation]]:
    annotations_path = config.annotations_path(split)
    validate_paths(annotations=str(annotations_path))
    return load_samples(config, container_paths(config, split)), load_annotations(annotations_path)


def fit_model(
    config: PipelineConfig,
    samples: Sequence[VideoSample],
    annotations: Dict[str, BoundaryAnnotation],
    dims: Optional[ModelDims] = None,
    seed: Optional[int] = None,
    epochs: Optional[int] = None,
    label_mode=None,
    log_path: Optional[Path] = None,
) -> Tuple[GebdModel, List[EpochRecord]]:
    seed = config.seed if seed is None else seed
    model = GebdModel(dims or config.model_dims(), seed=seed)
    history = train_model(
        model,
        samples,
        {video_id: a.boundaries_sec for video_id, a in annotations.items()},
        config.sgd_config(epochs),
        batch_size=config.batch_size,
        seed=seed,
        label_mode=label_mode or config.label_mode,
        log_path=log_path,
    )
    return model, history


@pipeline_step
def run_train(config: PipelineConfig, out: Optional[str] = None) -> List[EpochRecord]:
    samples, annotations = load_split(config, config.train_split)
    checkpoint = Path(out or config.checkpoint)
    logger.info(f"Training on {len(samples)} videos for {config.epochs} epochs")

    model, history = fit_model(
        config, samples, annotations, log_path=checkpoint.with_suffix(".train.jsonl")
    )
    save_checkpoint(model.params, checkpoint)
    if len(history) > 1:
        logger.info(f"Mean loss {history[0].mean_loss:.4f} -> {history[-1].mean_loss:.4f}")
    return history


def load_model(config: PipelineConfig, checkpoint: Optional[str] = None) -> GebdModel:
    path = checkpoint or config.checkpoint
    model = GebdModel(config.model_dims(), seed=config.seed)
    try:
        model.params.load_state_dict(load_checkpoint(path))
    except ShapeError as e:
        raise ConfigError(f"Checkpoint {path} does not match the configured model: {e}")
    return model


def predict_samples(model: GebdModel, samples: Sequence[VideoSample]) -> List[Prediction]:
    predictions = []
    for sample in samples:
        boundaries, track = model.predict(sample)
        predictions.append(
            Prediction(
                video_id=sample.video_id,
                boundaries_sec=boundaries,
                scores=[float(s) for s in track.scores],
                frame_indices=[int(i) for i in track.frame_indices],
            )
        )
    return predictions


@pipeline_step
def run_infer(
    config: PipelineConfig,
    checkpoint: Optional[str] = None,
    inputs: Optional[Sequence[str]] = None,
    out: Optional[str] = None,
) -> List[Prediction]:
    """Boundaries and scores for the given containers (the test split by default)."""
    model = load_model(config, checkpoint)
    if inputs:
        validate_paths(**{f"input_{i}": p for i, p in enumerate(inputs)})
        paths = [Path(p) for p in inputs]
    else:
        paths = container_paths(config, config.test_split)

    predictions = predict_samples(model, load_samples(config, paths))
    target = out or config.predictions
    save_predictions(predictions, target)
    found = sum(len(p.boundaries_sec) for p in predictions)
    logger.info(f"Predicted {found} boundaries over {len(predictions)} videos into {target}")
    return predictions


@pipeline_step
def run_eval(
    config: PipelineConfig,
    predictions: Optional[str] = None,
    annotations: Optional[str] = None,
    baseline: bool = False,
    out: Optional[str] = None,
) -> List[EvalReport]:
    """Score predictions, optionally next to the uniform-interval baseline."""
    annotations_path = annotations or str(config.annotations_path(config.test_split))
    predictions_path = predictions or config.predictions
    validate_paths(predictions=predictions_path, annotations=annotations_path)

    truth = load_annotations(annotations_path)
    predicted = {
        video_id: p.boundaries_sec for video_id, p in load_predictions(predictions_path).items()
    }
    reports = [score_corpus(predicted, truth, name="model")]
    if baseline:
        reports.append(
            score_corpus(
                baseline_predictions(truth, config.baseline_interval),
                truth,
                name=f"uniform {config.baseline_interval:g}s",
            )
        )

    write_json(out or config.report, [report.model_dump() for report in reports])
    for report in reports:
        logger.info(f"{report.name}: F1@0.05 {report.scores[0].f1:.3f}, avg F1 {report.avg_f1:.3f}")
    return reports


def gradcheck_sample(config: PipelineConfig, instance: int) -> Tuple[VideoSample, List[float]]:
    """A tiny panning two-GOP video with one cut, small enough for exhaustive differencing."""
    params = CodecParams(block_size=8, search_radius=2, gop_pframes=3)
    spec = SynthSpec(
        video_id=f"gradcheck_{instance}",
        seed=config.seed * 1000 + instance,
        num_frames=8,
        fps=4.0,
        height=16,
        width=16,
        events=[SynthEvent(frame=4, kind="cut")],
        max_speed=2,
        search_radius=params.search_radius,
        pan=GRADCHECK_PAN,
    )
    video, annotation = generate_video(spec)
    cv = encode_video(video, params)
    sample = prepare_video_sample(cv, spec.video_id, sample_t=2)
    if not any(acc.motion.any() for gop in sample.gops for acc in gop.pframes):
        raise DataError(f"Gradient check instance {spec.video_id} has no sampled motion")
    return sample, annotation.boundaries_sec


@pipeline_step
def run_gradcheck(config: PipelineConfig) -> List[GradCheckReport]:
    """Finite-difference check of the full encoder + head on seeded tiny instances."""
    dims = config.model_dims(channels=8, reduction=4, window_k=2, sample_t=2, search_radius=2)
    reports = []
    for instance in range(config.gradcheck_instances):
        sample, boundaries = gradcheck_sample(config, instance)
        model = GebdModel(dims, seed=config.seed + instance)
        targets = model.targets(sample, boundaries, config.label_mode)
        report = gradient_check(
            lambda: model.loss_and_grad(sample, targets),
            model.params,
            tolerance=config.gradcheck_tolerance,
            samples_per_param=config.gradcheck_samples,
            seed=config.seed + instance,
        )
        reports.append(report)

    worst = max(r.max_rel_err for r in reports)
    if not all(r.passed for r in reports):
        failing = sorted(
            {name for r in reports for name, p in r.params.items() if p.max_rel_err >= r.tolerance}
        )
        raise NumericError(
            f"Gradient check failed (max rel-err {worst:.3e}) in {', '.join(failing)}"
        )
    logger.success(f"Gradient check passed on {len(reports)} instances, max rel-err {worst:.3e}")
    return reports
