"""
Ablation runs on the synthetic corpus.

  * representation: none / vanilla / scce encoders, per seed, scored at Rel.Dis. 0.05
  * window: contrast window k sweep
  * labels: gaussian vs hard targets
  * scoring: end-to-end vs per-candidate scoring time on a few test videos
"""

import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from cgebd.cli.config import PipelineConfig
from cgebd.cli.pipeline import fit_model, load_split, predict_samples
from cgebd.evaluation import BoundaryAnnotation, EvalReport, score_corpus
from cgebd.model import EncoderVariant, GebdModel, LabelMode, VideoSample
from cgebd.utils.helper import pipeline_step, write_json

REPORT_THRESHOLD = 0.05


class RepresentationRow(BaseModel):
    seed: int
    encoder: EncoderVariant
    recall: float
    precision: float
    f1: float


class WindowRow(BaseModel):
    window_k: int
    f1: float = Field(description="F1 at Rel.Dis. 0.05")
    avg_f1: float


class LabelRow(BaseModel):
    label_mode: LabelMode
    f1: float
    avg_f1: float


class ScoringRow(BaseModel):
    mode: str
    videos: int
    seconds: float
    max_abs_diff: float = Field(default=0.0, description="Largest score difference to end-to-end")


class AblationReport(BaseModel):
    representation: List[RepresentationRow] = Field(default_factory=list)
    ordering_flips: List[int] = Field(
        default_factory=list, description="Seeds where vanilla beat scce"
    )
    window: List[WindowRow] = Field(default_factory=list)
    labels: List[LabelRow] = Field(default_factory=list)
    scoring: List[ScoringRow] = Field(default_factory=list)

    def format_text(self) -> str:
        lines = ["Representation (Rel.Dis. 0.05)", "  seed  repre.    Rec    Prec   F1"]
        for row in self.representation:
            lines.append(
                f"  {row.seed:>4}  {row.encoder.value:<8} "
                f"{row.recall:.3f}  {row.precision:.3f}  {row.f1:.3f}"
            )
        if self.ordering_flips:
            lines.append(f"  ordering flipped (vanilla above scce) for seeds {self.ordering_flips}")

        lines += ["", "Contrast window", "  k    F1@0.05  avg"]
        lines += [f"  {row.window_k:<4} {row.f1:.3f}    {row.avg_f1:.3f}" for row in self.window]

        lines += ["", "Labels", "  mode      F1@0.05  avg"]
        lines += [
            f"  {row.label_mode.value:<9} {row.f1:.3f}    {row.avg_f1:.3f}" for row in self.labels
        ]

        lines += ["", "Scoring", "  mode           videos  seconds  max|diff|"]
        lines += [
            f"  {row.mode:<14} {row.videos:>6}  {row.seconds:>7.3f}  {row.max_abs_diff:.2e}"
            for row in self.scoring
        ]
        return "\n".join(lines)


class _Runner:
    """Trains and scores model variants on a shared, preloaded corpus."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.epochs = config.epochs if config.ablate_epochs is None else config.ablate_epochs
        self.train: Tuple[List[VideoSample], Dict[str, BoundaryAnnotation]] = load_split(
            config, config.train_split
        )
        self.test: Tuple[List[VideoSample], Dict[str, BoundaryAnnotation]] = load_split(
            config, config.test_split
        )
        self._runs: Dict[tuple, Tuple[GebdModel, EvalReport]] = {}

    def run(
        self, encoder: EncoderVariant, window_k: int, seed: int, label_mode: LabelMode
    ) -> Tuple[GebdModel, EvalReport]:
        key = (EncoderVariant(encoder), window_k, seed, LabelMode(label_mode))
        if key not in self._runs:
            logger.info(
                f"Ablation run: encoder={key[0].value} k={window_k} seed={seed} "
                f"labels={key[3].value}"
            )
            dims = self.config.model_dims(encoder=key[0], window_k=window_k)
            model, _ = fit_model(
                self.config, *self.train, dims=dims, seed=seed, epochs=self.epochs, label_mode=key[
                    3
                ]
            )
            samples, annotations = self.test
            predicted = {p.video_id: p.boundaries_sec for p in predict_samples(model, samples)}
            self._runs[key] = (model, score_corpus(predicted, annotations, name=key[0].value))
        return self._runs[key]


def time_scoring(model: GebdModel, samples: List[VideoSample]) -> List[ScoringRow]:
    start = time.perf_counter()
    tracks = [model.score(sample) for sample in samples]
    end_to_end = time.perf_counter() - start

    start = time.perf_counter()
    per_candidate = [model.score_per_candidate(sample) for sample in samples]
    candidate_seconds = time.perf_counter() - start

    diff = max(
        (float(np.max(np.abs(a.scores - b.scores))) for a, b in zip(tracks, per_candidate)),
        default=0.0,
    )
    return [
        ScoringRow(mode="end-to-end", videos=len(samples), seconds=end_to_end),
        ScoringRow(
            mode="per-candidate", videos=len(samples), seconds=candidate_seconds, max_abs_diff=diff
        ),
    ]


@pipeline_step
def run_ablation(config: PipelineConfig, out: Optional[str] = None) -> AblationReport:
    runner = _Runner(config)
    report = AblationReport()
    gaussian = LabelMode.GAUSSIAN

    for seed in config.ablate_seeds:
        f1 = {}
        for encoder in (EncoderVariant.NONE, EncoderVariant.VANILLA, EncoderVariant.SCCE):
            _, result = runner.run(encoder, config.window_k, seed, gaussian)
            score = result.scores[0]
            f1[encoder] = score.f1
            report.representation.append(
                RepresentationRow(
                    seed=seed,
                    encoder=encoder,
                    recall=score.recall,
                    precision=score.precision,
                    f1=score.f1,
                )
            )
        if f1[EncoderVariant.VANILLA] > f1[EncoderVariant.SCCE]:
            logger.warning(f"Seed {seed}: vanilla encoder scored above scce")
            report.ordering_flips.append(seed)

    for window_k in config.ablate_window_ks:
        _, result = runner.run(EncoderVariant.SCCE, window_k, config.seed, gaussian)
        report.window.append(
            WindowRow(window_k=window_k, f1=result.f1_at(REPORT_THRESHOLD), avg_f1=result.avg_f1)
        )

    for label_mode in (LabelMode.GAUSSIAN, LabelMode.HARD):
        _, result = runner.run(EncoderVariant.SCCE, config.window_k, config.seed, label_mode)
        report.labels.append(
            LabelRow(label_mode=label_mode, f1=result.f1_at(REPORT_THRESHOLD), avg_f1=result.avg_f1)
        )

    model, _ = runner.run(EncoderVariant.SCCE, config.window_k, config.seed, gaussian)
    report.scoring = time_scoring(model, runner.test[0][: config.ablate_timing_videos])

    target = Path(out) if out else Path(config.report).with_name("ablation.json")
    write_json(target, report.model_dump(mode="json"))
    logger.info(f"Wrote ablation report to {target}")
    return report
