from cgebd.nn.checkpoint import load_checkpoint, save_checkpoint
from cgebd.nn.gradcheck import GradCheckReport, gradient_check
from cgebd.nn.layers import LayerKind, layer_forward_backward
from cgebd.nn.ops import OpKind, nonlinearity
from cgebd.nn.optim import SgdConfig, sgd_step
from cgebd.nn.tensor import Parameter, ParamSet, Tensor, make_rng

__all__ = [
    "GradCheckReport",
    "LayerKind",
    "OpKind",
    "ParamSet",
    "Parameter",
    "SgdConfig",
    "Tensor",
    "gradient_check",
    "layer_forward_backward",
    "load_checkpoint",
    "make_rng",
    "nonlinearity",
    "save_checkpoint",
    "sgd_step",
]
