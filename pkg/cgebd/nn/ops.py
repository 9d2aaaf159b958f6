"""
Parameter-free operations with analytic gradients.

Unary ops return ``(output, backward)`` with ``backward(grad) -> grad_input``;
ops with several inputs return a tuple of input gradients.
"""

from enum import Enum
from typing import Callable, Tuple

import numpy as np

from cgebd.nn.tensor import Tensor
from cgebd.utils.errors import ShapeError

SIGMOID_FLOOR = np.nextafter(0.0, 1.0)
SIGMOID_CEIL = np.nextafter(1.0, 0.0)


class OpKind(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    SOFTMAX_OVER_POSITIONS = "softmax_over_positions"
    GLOBAL_AVG_POOL = "global_avg_pool"
    CHANNEL_MUL = "channel_mul"
    ADD = "add"
    CONCAT_CHANNELS = "concat_channels"


def relu(x: Tensor):
    mask = x > 0
    out = np.where(mask, x, 0.0)

    def backward(grad: Tensor) -> Tensor:
        return np.where(mask, grad, 0.0)

    return out, backward


def sigmoid(x: Tensor):
    """Logistic function, clipped so saturated logits stay strictly inside (0, 1)."""
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = np.clip(out, SIGMOID_FLOOR, SIGMOID_CEIL)

    def backward(grad: Tensor) -> Tensor:
        return grad * out * (1.0 - out)

    return out, backward


def softmax_over_positions(x: Tensor):
    """Softmax over every element of one channel's map; output keeps the input shape."""
    flat = x.reshape(-1)
    shifted = np.exp(flat - flat.max())
    out = (shifted / shifted.sum()).reshape(x.shape)

    def backward(grad: Tensor) -> Tensor:
        return out * (grad - np.sum(grad * out))

    return out, backward


def global_avg_pool(x: Tensor):
    """(C, H, W) -> (C,) per-channel mean."""
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool expects (C, H, W), got {x.shape}")
    _, height, width = x.shape
    out = x.mean(axis=(1, 2))

    def backward(grad: Tensor) -> Tensor:
        return np.broadcast_to(grad[:, None, None] / (height * width), x.shape).copy()

    return out, backward


def avg_pool(x: Tensor, factor: int):
    """Non-overlapping factor x factor average downsampling of (C, H, W)."""
    channels, height, width = x.shape
    if height % factor or width % factor:
        raise ShapeError(f"Cannot downsample {height}x{width} by {factor}")
    out = x.reshape(channels, height // factor, factor, width // factor, factor).mean(axis=(2, 4))

    def backward(grad: Tensor) -> Tensor:
        spread = np.repeat(np.repeat(grad, factor, axis=1), factor, axis=2)
        return spread / (factor * factor)

    return out, backward


def channel_mul(x: Tensor, weights: Tensor):
    """(C, H, W) scaled per channel by a (C,) vector."""
    if x.ndim != 3 or weights.shape != (x.shape[0],):
        raise ShapeError(f"channel_mul shape mismatch: {x.shape} vs {weights.shape}")
    out = x * weights[:, None, None]

    def backward(grad: Tensor) -> Tuple[Tensor, Tensor]:
        return grad * weights[:, None, None], np.sum(grad * x, axis=(1, 2))

    return out, backward


def weighted_sum_positions(x: Tensor, weights: Tensor):
    """(C, H, W) x (H, W) -> (C,): sum over positions of x(:, p) * w(p)."""
    if x.ndim != 3 or weights.shape != x.shape[1:]:
        raise ShapeError(f"weighted_sum_positions shape mismatch: {x.shape} vs {weights.shape}")
    out = np.sum(x * weights[None], axis=(1, 2))

    def backward(grad: Tensor) -> Tuple[Tensor, Tensor]:
        return grad[:, None, None] * weights[None], np.sum(grad[:, None, None] * x, axis=0)

    return out, backward


def add(a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(grad: Tensor) -> Tuple[Tensor, Tensor]:
        return grad, grad

    return a + b, backward


def concat_channels(*xs: Tensor):
    if not xs or any(x.shape[1:] != xs[0].shape[1:] for x in xs):
        raise ShapeError(f"concat_channels shape mismatch: {[x.shape for x in xs]}")
    splits = np.cumsum([x.shape[0] for x in xs])[:-1]

    def backward(grad: Tensor) -> Tuple[Tensor, ...]:
        return tuple(np.split(grad, splits, axis=0))

    return np.concatenate(xs, axis=0), backward


_OPS: dict[OpKind, Callable] = {
    OpKind.RELU: relu,
    OpKind.SIGMOID: sigmoid,
    OpKind.SOFTMAX_OVER_POSITIONS: softmax_over_positions,
    OpKind.GLOBAL_AVG_POOL: global_avg_pool,
    OpKind.CHANNEL_MUL: channel_mul,
    OpKind.ADD: add,
    OpKind.CONCAT_CHANNELS: concat_channels,
}


def nonlinearity(kind: OpKind | str, *inputs: Tensor):
    """Dispatch a parameter-free op by kind."""
    return _OPS[OpKind(kind)](*inputs)
