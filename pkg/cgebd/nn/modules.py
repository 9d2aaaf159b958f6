"""
Layers bound to named entries of a ParamSet.

Calling a module returns ``(output, backward)``; ``backward(grad)`` returns the
input gradient and adds the parameter gradients into the ParamSet.
"""

from typing import Callable, Tuple

from cgebd.nn import ops
from cgebd.nn.layers import LayerKind, layer_forward_backward
from cgebd.nn.tensor import ParamSet, Tensor

Backward = Callable[[Tensor], Tensor]

# Positive so all-zero inputs stay off the relu kink
BIAS_INIT = 0.01


class _ParamLayer:
    kind: LayerKind

    def __init__(self, params: ParamSet, name: str, weight_shape: tuple, fan_in: int):
        self.params = params
        self.name = name
        self.weight_name = f"{name}.weight"
        self.bias_name = f"{name}.bias"
        params.add(self.weight_name, weight_shape, fan_in=fan_in)
        params.add(self.bias_name, (weight_shape[0],), fill=BIAS_INIT)

    def __call__(self, x: Tensor) -> Tuple[Tensor, Backward]:
        out, layer_backward = layer_forward_backward(
            self.kind,
            x,
            {"weight": self.params[self.weight_name], "bias": self.params[self.bias_name]},
        )

        def backward(grad: Tensor) -> Tensor:
            d_input, d_params = layer_backward(grad)
            self.params.accumulate(self.weight_name, d_params["weight"])
            self.params.accumulate(self.bias_name, d_params["bias"])
            return d_input

        return out, backward


class Conv2d(_ParamLayer):
    kind = LayerKind.CONV2D

    def __init__(
        self, params: ParamSet, name: str, in_channels: int, out_channels: int, kernel: int = 3
    ):
        super().__init__(
            params,
            name,
            (out_channels, in_channels, kernel, kernel),
            fan_in=in_channels * kernel * kernel,
        )


class Conv1d(_ParamLayer):
    kind = LayerKind.CONV1D

    def __init__(
        self, params: ParamSet, name: str, in_channels: int, out_channels: int, kernel: int = 3
    ):
        super().__init__(
            params, name, (out_channels, in_channels, kernel), fan_in=in_channels * kernel
        )


class Dense(_ParamLayer):
    kind = LayerKind.DENSE

    def __init__(self, params: ParamSet, name: str, in_features: int, out_features: int):
        super().__init__(params, name, (out_features, in_features), fan_in=in_features)


class Relu:
    def __call__(self, x: Tensor) -> Tuple[Tensor, Backward]:
        return ops.relu(x)


class AvgPool:
    def __init__(self, factor: int):
        self.factor = factor

    def __call__(self, x: Tensor) -> Tuple[Tensor, Backward]:
        if self.factor == 1:
            return x, lambda grad: grad
        return ops.avg_pool(x, self.factor)


class Sequential:
    """Chain of single-input modules."""

    def __init__(self, *layers):
        self.layers = layers

    def __call__(self, x: Tensor) -> Tuple[Tensor, Backward]:
        backwards = []
        for layer in self.layers:
            x, back = layer(x)
            backwards.append(back)

        def backward(grad: Tensor) -> Tensor:
            for back in reversed(backwards):
                grad = back(grad)
            return grad

        return x, backward
