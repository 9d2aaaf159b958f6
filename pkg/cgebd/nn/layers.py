"""
Dense, conv1d and conv2d layers with analytic gradients.

Each layer returns ``(output, backward)`` where ``backward(grad_output)``
returns ``(grad_input, {"weight": ..., "bias": ...})``. Convolutions are
stride-1 cross-correlations with zero "same" padding and odd kernels.
"""

from enum import Enum
from typing import Callable, Dict, Mapping, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from cgebd.nn.tensor import Tensor
from cgebd.utils.errors import ShapeError

LayerBackward = Callable[[Tensor], Tuple[Tensor, Dict[str, Tensor]]]


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    CONV1D = "conv1d"
    DENSE = "dense"


def _check_kernel(kernel: int) -> int:
    if kernel % 2 == 0:
        raise ShapeError(f"Kernel size must be odd, got {kernel}")
    return kernel // 2


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tuple[Tensor, LayerBackward]:
    """x: (C_in, H, W), weight: (C_out, C_in, K, K), bias: (C_out,)"""
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(
            f"conv2d expects (C, H, W) input and square kernels, got {x.shape}, {weight.shape}"
        )
    c_out, c_in, kernel, _ = weight.shape
    if x.shape[0] != c_in or bias.shape != (c_out,):
        raise ShapeError(
            f"conv2d channel mismatch: input {x.shape}, weight {weight.shape}, bias {bias.shape}"
        )
    pad = _check_kernel(kernel)
    _, height, width = x.shape

    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    # (C_in, H, W, K, K) -> (C_in*K*K, H*W)
    windows = sliding_window_view(padded, (kernel, kernel), axis=(1, 2))
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(c_in * kernel * kernel, height * width)
    flat_weight = weight.reshape(c_out, -1)
    out = (flat_weight @ cols + bias[:, None]).reshape(c_out, height, width)

    def backward(grad: Tensor) -> Tuple[Tensor, Dict[str, Tensor]]:
        flat_grad = grad.reshape(c_out, height * width)
        d_weight = (flat_grad @ cols.T).reshape(weight.shape)
        d_bias = flat_grad.sum(axis=1)
        d_cols = (flat_weight.T @ flat_grad).reshape(c_in, kernel, kernel, height, width)
        d_padded = np.zeros_like(padded)
        for i in range(kernel):
            for j in range(kernel):
                d_padded[:, i : i + height, j : j + width] += d_cols[:, i, j]
        return d_padded[:, pad : pad + height, pad : pad + width], {
            "weight": d_weight, "bias": d_bias
        }

    return out, backward


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tuple[Tensor, LayerBackward]:
    """x: (C_in, L), weight: (C_out, C_in, K), bias: (C_out,)"""
    if x.ndim != 2 or weight.ndim != 3:
        raise ShapeError(
            f"conv1d expects (C, L) input and (C_out, C_in, K) weight, "
            f"got {x.shape}, {weight.shape}"
        )
    c_out, c_in, kernel = weight.shape
    if x.shape[0] != c_in or bias.shape != (c_out,):
        raise ShapeError(
            f"conv1d channel mismatch: input {x.shape}, weight {weight.shape}, bias {bias.shape}"
        )
    pad = _check_kernel(kernel)
    length = x.shape[1]

    padded = np.pad(x, ((0, 0), (pad, pad)))
    windows = sliding_window_view(padded, kernel, axis=1)
    cols = windows.transpose(0, 2, 1).reshape(c_in * kernel, length)
    flat_weight = weight.reshape(c_out, -1)
    out = flat_weight @ cols + bias[:, None]

    def backward(grad: Tensor) -> Tuple[Tensor, Dict[str, Tensor]]:
        d_weight = (grad @ cols.T).reshape(weight.shape)
        d_bias = grad.sum(axis=1)
        d_cols = (flat_weight.T @ grad).reshape(c_in, kernel, length)
        d_padded = np.zeros_like(padded)
        for i in range(kernel):
            d_padded[:, i : i + length] += d_cols[:, i]
        return d_padded[:, pad : pad + length], {"weight": d_weight, "bias": d_bias}

    return out, backward


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tuple[Tensor, LayerBackward]:
    """x: (n,), weight: (m, n), bias: (m,)"""
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0] or bias.shape != (
        weight.shape[0],
    ):
        raise ShapeError(
            f"dense shape mismatch: input {x.shape}, weight {weight.shape}, bias {bias.shape}"
        )

    out = weight @ x + bias

    def backward(grad: Tensor) -> Tuple[Tensor, Dict[str, Tensor]]:
        return weight.T @ grad, {"weight": np.outer(grad, x), "bias": grad.copy()}

    return out, backward


_LAYERS = {
    LayerKind.CONV2D: conv2d,
    LayerKind.CONV1D: conv1d,
    LayerKind.DENSE: dense,
}


def layer_forward_backward(
    kind: LayerKind | str, x: Tensor, params: Mapping[str, Tensor]
) -> Tuple[Tensor, LayerBackward]:
    """Dispatch a layer by kind with ``params`` holding "weight" and "bias"."""
    return _LAYERS[LayerKind(kind)](x, params["weight"], params["bias"])
