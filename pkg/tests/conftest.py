import numpy as np
import pytest
from loguru import logger

from cgebd.cli.config import PipelineConfig
from cgebd.codec import CodecParams, RawVideo


@pytest.fixture(autouse=True)
def quiet_logs():
    """Keep loguru output out of the test report unless a test adds a sink."""
    logger.remove()
    yield
    logger.remove()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_params():
    return CodecParams(block_size=8, search_radius=3, gop_pframes=3)


def random_video(
    rng: np.random.Generator, frames: int, height: int, width: int, fps: float = 8.0
) -> RawVideo:
    return RawVideo(
        frames=rng.integers(0, 256, size=(frames, height, width, 3), dtype=np.uint8), fps=fps
    )


def translating_video(
    rng: np.random.Generator, frames: int, size: int, step: tuple[int, int]
) -> RawVideo:
    """Random texture whose content moves by ``step`` pixels per frame."""
    margin = abs(step[0]) * frames + abs(step[1]) * frames + 1
    canvas = rng.integers(0, 256, size=(size + 2 * margin, size + 2 * margin, 3), dtype=np.uint8)
    out = []
    for t in range(frames):
        top = margin - step[0] * t
        left = margin - step[1] * t
        out.append(canvas[top : top + size, left : left + size])
    return RawVideo(frames=np.stack(out), fps=8.0)


@pytest.fixture
def tiny_config(tmp_path):
    """A config small enough to run every pipeline step in seconds."""
    return PipelineConfig(
        seed=7,
        search_radius=3,
        gop_pframes=3,
        channels=8,
        window_k=2,
        sample_t=2,
        epochs=2,
        batch_size=2,
        train_videos=4,
        test_videos=2,
        num_frames=16,
        fps=8.0,
        height=32,
        width=32,
        max_events=2,
        max_speed=2,
        corpus_dir=str(tmp_path / "corpus"),
        checkpoint=str(tmp_path / "runs" / "model.ckp"),
        predictions=str(tmp_path / "runs" / "predictions.jsonl"),
        report=str(tmp_path / "runs" / "report.json"),
        log_file="",
        gradcheck_instances=1,
        gradcheck_samples=2,
        ablate_seeds=[0],
        ablate_window_ks=[0, 2],
        ablate_epochs=1,
        ablate_timing_videos=1,
    )
