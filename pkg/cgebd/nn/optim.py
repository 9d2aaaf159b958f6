from typing import List

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, field_validator

from cgebd.nn.tensor import ParamSet
from cgebd.utils.errors import NumericError


class SgdConfig(BaseModel):
    """SGD with momentum and step decay."""

    learning_rate: float = Field(default=1e-2, ge=0, description="Base learning rate")
    momentum: float = Field(default=0.9, ge=0, description="Momentum coefficient")
    weight_decay: float = Field(default=1e-4, ge=0, description="L2 weight decay")
    decay_epochs: List[int] = Field(
        default_factory=lambda: [16, 24],
        description="0-based epochs from which the rate is decayed",
    )
    decay_factor: float = Field(
        default=0.1, gt=0, le=1, description="Multiplier applied at each decay epoch"
    )
    epochs: int = Field(default=30, ge=0, description="Training epochs")

    @field_validator("decay_epochs")
    @classmethod
    def non_negative_epochs(cls, v: List[int]) -> List[int]:
        if any(e < 0 for e in v):
            raise ValueError("decay epochs must be non-negative")
        return sorted(v)

    def lr_at(self, epoch: int) -> float:
        """Learning rate in effect during ``epoch``."""
        drops = sum(1 for e in self.decay_epochs if epoch >= e)
        return self.learning_rate * self.decay_factor**drops


def sgd_step(params: ParamSet, cfg: SgdConfig, epoch: int) -> float:
    """
    One momentum update of every parameter, in ParamSet order.

        g' = g + weight_decay * w
        v  = momentum * v + g'
        w  = w - lr(epoch) * v

    Returns the learning rate used.
    """
    for name, param in params.items():
        if not np.all(np.isfinite(param.grad)):
            bad = int(np.count_nonzero(~np.isfinite(param.grad)))
            logger.error(f"Non-finite gradient in {name} ({bad} entries) at epoch {epoch}")
            raise NumericError(f"Non-finite gradient in parameter {name} at epoch {epoch}")

    lr = cfg.lr_at(epoch)
    for _, param in params.items():
        effective = param.grad + cfg.weight_decay * param.value
        param.velocity *= cfg.momentum
        param.velocity += effective
        param.value -= lr * param.velocity
    return lr
