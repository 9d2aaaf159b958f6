from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel

from cgebd.model.head import LabelMode
from cgebd.model.network import GebdModel, VideoSample
from cgebd.nn.optim import SgdConfig, sgd_step
from cgebd.nn.tensor import make_rng
from cgebd.utils.errors import AnnotationError, NumericError
from cgebd.utils.helper import batched, write_json_lines


class EpochRecord(BaseModel):
    epoch: int
    mean_loss: float
    lr: float
    steps: int


def train_model(
    model: GebdModel,
    samples: Sequence[VideoSample],
    boundaries: Dict[str, List[float]],
    sgd: SgdConfig,
    batch_size: int = 4,
    seed: int = 0,
    label_mode: LabelMode | str = LabelMode.GAUSSIAN,
    log_path: str | Path | None = None,
) -> List[EpochRecord]:
    """
    Train in place with SGD over batches of videos.

    Each epoch visits the videos in an order drawn from (seed, epoch); batch
    gradients are the mean of per-video gradients, summed in batch order.
    """
    if not samples:
        raise AnnotationError("No training videos")
    missing = [s.video_id for s in samples if s.video_id not in boundaries]
    if missing:
        raise AnnotationError(
            f"No annotations for {len(missing)} training videos, e.g. {missing[0]}"
        )

    targets = {s.video_id: model.targets(s, boundaries[s.video_id], label_mode) for s in samples}
    history: List[EpochRecord] = []

    for epoch in range(sgd.epochs):
        order = make_rng(seed, 2, epoch).permutation(len(samples))
        losses = []
        lr = sgd.lr_at(epoch)
        steps = 0
        for batch in batched([samples[i] for i in order], batch_size):
            model.params.zero_grad()
            for sample in batch:
                loss = model.loss_and_grad(sample, targets[sample.video_id])
                if not np.isfinite(loss):
                    raise NumericError(
                        f"Non-finite loss on {sample.video_id} at epoch {epoch}, step {steps}"
                    )
                losses.append(loss)
            model.params.scale_grad(1.0 / len(batch))
            lr = sgd_step(model.params, sgd, epoch)
            steps += 1

        record = EpochRecord(epoch=epoch, mean_loss=float(np.mean(losses)), lr=lr, steps=steps)
        history.append(record)
        logger.info(
            f"Epoch {epoch + 1}/{sgd.epochs}: mean loss {record.mean_loss:.4f}, lr {lr:.1e}"
        )

    if log_path is not None:
        write_json_lines(log_path, [record.model_dump() for record in history])
    return history
