"""
Spatial-channel compressed encoder.

The I-frame feature x_I is re-weighted per channel and pooled over positions
under gates predicted from [x_I; x_aux; aux] for each of the motion and
residual branches, giving one C-vector per sampled P-frame in the same space
as the I-frame embedding avgpool(x_I).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Sequence, Tuple

import numpy as np

from cgebd.codec.accumulation import AccumulatedPFrame
from cgebd.nn import ops
from cgebd.nn.modules import AvgPool, Conv2d, Dense, Relu, Sequential
from cgebd.nn.tensor import ParamSet, Tensor
from cgebd.utils.errors import ShapeError

# Spatial size ratio between frames and feature grids
FEATURE_STRIDE = 8


class EncoderVariant(str, Enum):
    """How P-frame embeddings are built."""

    SCCE = "scce"  # channel + spatial gates over the I-frame feature
    VANILLA = "vanilla"  # avgpool(x_M) + avgpool(x_R), no gates
    NONE = "none"  # no compressed signal, every P position reuses e_I


@dataclass
class Gates:
    channel: Tensor  # (C,), every entry in (0, 1)
    spatial: Tensor  # (H_f, W_f), non-negative, sums to 1


@dataclass
class PFrameEmbedding:
    vector: Tensor
    v_motion: Tensor
    v_residual: Tensor
    v_hat_motion: Tensor
    v_hat_residual: Tensor
    x_cha_motion: Tensor


@dataclass
class PFrameInput:
    t: int
    frame_index: int
    motion: Tensor  # (2, H, W), offsets / S
    residual: Tensor  # (3, H, W), residual / 255


@dataclass
class GopInput:
    iframe: Tensor  # (3, H, W) in [0, 1]
    frame_index: int
    pframes: List[PFrameInput] = field(default_factory=list)


@dataclass
class GopEmbeddings:
    """[e_I, v~^{t_1}, ...] with the original frame index of each row."""

    vectors: Tensor
    frame_indices: List[int]
    pframes: List[PFrameEmbedding] = field(default_factory=list)


def sample_pframe_indices(available: int, sample_t: int) -> List[int]:
    """
    Evenly spaced 1-based P-frame indices t_j = round(j * n / (sample_t + 1)).

    With fewer P-frames than requested, min(sample_t, n) indices are drawn
    from the n available; duplicates are removed, ascending.
    """
    if available <= 0 or sample_t <= 0:
        return []
    count = min(sample_t, available)
    picks = {
        min(available, max(1, math.floor(j * available / (count + 1) + 0.5)))
        for j in range(1, count + 1)
    }
    return sorted(picks)


def normalize_iframe(iframe: np.ndarray) -> Tensor:
    return iframe.transpose(2, 0, 1).astype(np.float64) / 255.0


def prepare_gop_input(
    iframe: np.ndarray,
    sampled: Sequence[AccumulatedPFrame],
    search_radius: int,
    frame_index: int,
) -> GopInput:
    """Normalize an I-frame and its sampled accumulated P-frames."""
    height, width = iframe.shape[:2]
    if height % FEATURE_STRIDE or width % FEATURE_STRIDE:
        raise ShapeError(f"Frame size {height}x{width} is not divisible by {FEATURE_STRIDE}")

    scale = float(max(search_radius, 1))
    return GopInput(
        iframe=normalize_iframe(iframe),
        frame_index=frame_index,
        pframes=[
            PFrameInput(
                t=acc.t,
                frame_index=frame_index + acc.t,
                motion=acc.motion.astype(np.float64) / scale,
                residual=acc.residual.astype(np.float64) / 255.0,
            )
            for acc in sampled
        ],
    )


def conv_encoder(params: ParamSet, name: str, channels: Sequence[int]) -> Sequential:
    """
    Conv 3x3 -> relu -> 2x2 average pool per stage, then extra pooling so the
    output grid is 1/FEATURE_STRIDE of the input.
    """
    layers = []
    for stage, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
        layers += [Conv2d(params, f"{name}.{stage}", c_in, c_out, 3), Relu(), AvgPool(2)]
    stages = len(channels) - 1
    extra = FEATURE_STRIDE // 2**stages
    if extra > 1:
        layers.append(AvgPool(extra))
    return Sequential(*layers)


class GatedBranch:
    """Fusion trunk plus channel and spatial gates for one compressed signal."""

    def __init__(
        self, params: ParamSet, name: str, channels: int, aux_channels: int, reduction: int = 4
    ):
        if channels % reduction:
            raise ShapeError(f"Channels {channels} not divisible by reduction {reduction}")
        self.trunk = Sequential(
            Conv2d(params, f"{name}.trunk.0", 2 * channels + aux_channels, channels, 3),
            Relu(),
            Conv2d(params, f"{name}.trunk.1", channels, channels, 3),
            Relu(),
        )
        self.fc1 = Dense(params, f"{name}.fc1", channels, channels // reduction)
        self.fc2 = Dense(params, f"{name}.fc2", channels // reduction, channels)
        self.spatial = Conv2d(params, f"{name}.spatial", channels, 1, 3)

    def fusion_trunk(self, x_i: Tensor, x_aux: Tensor, aux_ds: Tensor):
        """z = trunk([x_I; x_aux; aux_ds]); backward returns (d x_I, d x_aux)."""
        stacked, back_cat = ops.concat_channels(x_i, x_aux, aux_ds)
        z, back_trunk = self.trunk(stacked)

        def backward(grad: Tensor) -> Tuple[Tensor, Tensor]:
            d_i, d_aux, _ = back_cat(back_trunk(grad))
            return d_i, d_aux

        return z, backward

    def channel_gate(self, z: Tensor):
        """W_cha = sigmoid(fc2(relu(fc1(avgpool(z)))))"""
        h, back_pool = ops.global_avg_pool(z)
        a1, back_fc1 = self.fc1(h)
        r1, back_relu = ops.relu(a1)
        a2, back_fc2 = self.fc2(r1)
        gate, back_sigmoid = ops.sigmoid(a2)

        def backward(grad: Tensor) -> Tensor:
            return back_pool(back_fc1(back_relu(back_fc2(back_sigmoid(grad)))))

        return gate, backward

    def spatial_gate(self, z: Tensor):
        """W_spa = softmax over positions of conv3x3(z)"""
        logits, back_conv = self.spatial(z)
        gate, back_softmax = ops.softmax_over_positions(logits[0])

        def backward(grad: Tensor) -> Tensor:
            return back_conv(back_softmax(grad)[None])

        return gate, backward

    def __call__(self, x_i: Tensor, x_aux: Tensor, aux_ds: Tensor):
        """One trunk pass shared by both gates."""
        z, back_trunk = self.fusion_trunk(x_i, x_aux, aux_ds)
        channel, back_channel = self.channel_gate(z)
        spatial, back_spatial = self.spatial_gate(z)

        def backward(d_channel: Tensor, d_spatial: Tensor) -> Tuple[Tensor, Tensor]:
            return back_trunk(back_channel(d_channel) + back_spatial(d_spatial))

        return Gates(channel=channel, spatial=spatial), backward


def refine_branch(x_i: Tensor, gates: Gates, x_aux: Tensor):
    """
    x_cha = x_I * W_cha, v_hat = sum_p x_cha(:, p) W_spa(p), v = v_hat + avgpool(x_aux)

    Backward returns (d x_I, d W_cha, d W_spa, d x_aux).
    """
    x_cha, back_mul = ops.channel_mul(x_i, gates.channel)
    v_hat, back_sum = ops.weighted_sum_positions(x_cha, gates.spatial)
    pooled, back_pool = ops.global_avg_pool(x_aux)
    v, _ = ops.add(v_hat, pooled)

    def backward(grad: Tensor):
        d_cha_features, d_spatial = back_sum(grad)
        d_i, d_channel = back_mul(d_cha_features)
        return d_i, d_channel, d_spatial, back_pool(grad)

    return (v, v_hat, x_cha), backward


def refine_and_fuse(
    x_i: Tensor, motion_gates: Gates, x_m: Tensor, residual_gates: Gates, x_r: Tensor
):
    """
    v~ = v_M + v_R, each branch refining x_I under its own gates.

    Backward returns (d x_I, (d W_cha_M, d W_spa_M), d x_M, (d W_cha_R, d W_spa_R), d x_R).
    """
    (v_m, v_hat_m, x_cha_m), back_m = refine_branch(x_i, motion_gates, x_m)
    (v_r, v_hat_r, _), back_r = refine_branch(x_i, residual_gates, x_r)
    embedding = PFrameEmbedding(
        vector=v_m + v_r,
        v_motion=v_m,
        v_residual=v_r,
        v_hat_motion=v_hat_m,
        v_hat_residual=v_hat_r,
        x_cha_motion=x_cha_m,
    )

    def backward(grad: Tensor):
        d_i_m, d_cha_m, d_spa_m, d_x_m = back_m(grad)
        d_i_r, d_cha_r, d_spa_r, d_x_r = back_r(grad)
        return d_i_m + d_i_r, (d_cha_m, d_spa_m), d_x_m, (d_cha_r, d_spa_r), d_x_r

    return embedding, backward


class ScceEncoder:
    """Feature extractors plus per-branch gates, shared across GOPs and P-frames."""

    def __init__(
        self,
        params: ParamSet,
        channels: int = 32,
        reduction: int = 4,
        variant: EncoderVariant = EncoderVariant.SCCE,
    ):
        self.channels = channels
        self.variant = EncoderVariant(variant)
        self.f_i = conv_encoder(params, "f_i", (3, 16, 32, channels))
        if self.variant != EncoderVariant.NONE:
            self.f_m = conv_encoder(params, "f_m", (2, 16, channels))
            self.f_r = conv_encoder(params, "f_r", (3, 16, channels))
        if self.variant == EncoderVariant.SCCE:
            self.motion_branch = GatedBranch(params, "motion", channels, 2, reduction)
            self.residual_branch = GatedBranch(params, "residual", channels, 3, reduction)

    def extract_iframe(self, iframe: Tensor):
        return self.f_i(iframe)

    def extract_motion(self, motion: Tensor):
        return self.f_m(motion)

    def extract_residual(self, residual: Tensor):
        return self.f_r(residual)

    def encode_pframe(self, x_i: Tensor, pframe: PFrameInput) -> Tuple[PFrameEmbedding, Callable]:
        """Embedding of one sampled P-frame; backward returns d x_I."""
        if self.variant == EncoderVariant.NONE:
            e_i, back_pool = ops.global_avg_pool(x_i)
            zero = np.zeros_like(e_i)
            embedding = PFrameEmbedding(e_i, e_i, zero, zero, zero, x_i)
            return embedding, back_pool

        x_m, back_fm = self.extract_motion(pframe.motion)
        x_r, back_fr = self.extract_residual(pframe.residual)

        if self.variant == EncoderVariant.VANILLA:
            v_m, back_pm = ops.global_avg_pool(x_m)
            v_r, back_pr = ops.global_avg_pool(x_r)
            zero = np.zeros_like(v_m)
            embedding = PFrameEmbedding(v_m + v_r, v_m, v_r, zero, zero, np.zeros_like(x_i))

            def backward_vanilla(grad: Tensor) -> Tensor:
                back_fm(back_pm(grad))
                back_fr(back_pr(grad))
                return np.zeros_like(x_i)

            return embedding, backward_vanilla

        height = pframe.motion.shape[1]
        stride = height // x_i.shape[1]
        motion_ds, _ = ops.avg_pool(pframe.motion, stride)
        residual_ds, _ = ops.avg_pool(pframe.residual, stride)

        motion_gates, back_gm = self.motion_branch(x_i, x_m, motion_ds)
        residual_gates, back_gr = self.residual_branch(x_i, x_r, residual_ds)
        embedding, back_fuse = refine_and_fuse(x_i, motion_gates, x_m, residual_gates, x_r)

        def backward(grad: Tensor) -> Tensor:
            d_i, (d_cha_m, d_spa_m), d_x_m, (d_cha_r, d_spa_r), d_x_r = back_fuse(grad)
            d_i_m, d_x_m_gate = back_gm(d_cha_m, d_spa_m)
            d_i_r, d_x_r_gate = back_gr(d_cha_r, d_spa_r)
            back_fm(d_x_m + d_x_m_gate)
            back_fr(d_x_r + d_x_r_gate)
            return d_i + d_i_m + d_i_r

        return embedding, backward

    def encode_prepared(self, gop: GopInput) -> Tuple[GopEmbeddings, Callable[[Tensor], None]]:
        """Embeddings of a prepared GOP; backward takes an (n, C) gradient."""
        x_i, back_fi = self.extract_iframe(gop.iframe)
        e_i, back_ei = ops.global_avg_pool(x_i)

        vectors = [e_i]
        pframes = []
        backwards = []
        for pframe in gop.pframes:
            embedding, back = self.encode_pframe(x_i, pframe)
            vectors.append(embedding.vector)
            pframes.append(embedding)
            backwards.append(back)

        result = GopEmbeddings(
            vectors=np.stack(vectors),
            frame_indices=[gop.frame_index] + [p.frame_index for p in gop.pframes],
            pframes=pframes,
        )

        def backward(grad: Tensor) -> None:
            d_i = back_ei(grad[0])
            for row, back in enumerate(backwards, start=1):
                d_i = d_i + back(grad[row])
            back_fi(d_i)

        return result, backward

    def encode_gop(
        self,
        iframe: np.ndarray,
        accumulated: Sequence[AccumulatedPFrame],
        sample_t: int,
        frame_index: int = 0,
        search_radius: int = 8,
    ) -> Tuple[GopEmbeddings, Callable[[Tensor], None]]:
        """Sample P-frames evenly, then embed [I, P^{t_1}, ..., P^{t_T}]."""
        if iframe is None or iframe.size == 0:
            raise ShapeError("Cannot encode an empty GOP")
        picks = set(sample_pframe_indices(len(accumulated), sample_t))
        sampled = [acc for acc in accumulated if acc.t in picks]
        return self.encode_prepared(prepare_gop_input(iframe, sampled, search_radius, frame_index))
