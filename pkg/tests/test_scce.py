import numpy as np
import pytest

from cgebd.codec import CodecParams, accumulate_gop, encode_video
from cgebd.model.scce import (
    EncoderVariant,
    Gates,
    GopInput,
    PFrameInput,
    ScceEncoder,
    refine_and_fuse,
    sample_pframe_indices,
)
from cgebd.nn import ParamSet, gradient_check
from cgebd.utils.errors import ShapeError
from tests.conftest import random_video

CHANNELS = 8


def naive_conv(x, weight, bias):
    c_out, _, kernel, _ = weight.shape
    pad = kernel // 2
    _, height, width = x.shape
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out = np.empty((c_out, height, width))
    for o in range(c_out):
        for y in range(height):
            for z in range(width):
                out[o, y, z] = np.sum(weight[o] * padded[:, y : y + kernel, z : z + kernel]) + bias[
                    o
                ]
    return out


def naive_pool(x, factor):
    channels, height, width = x.shape
    out = np.zeros((channels, height // factor, width // factor))
    for y in range(height):
        for z in range(width):
            out[:, y // factor, z // factor] += x[:, y, z]
    return out / factor**2


def relu(x):
    return np.maximum(x, 0.0)


def straight_line_extractor(params, name, x, stages):
    for stage in range(stages):
        x = naive_pool(
            relu(naive_conv(x, params[f"{name}.{stage}.weight"], params[f"{name}.{stage}.bias"])), 2
        )
    extra = 8 // 2**stages
    return naive_pool(x, extra) if extra > 1 else x


def straight_line_branch(params, name, x_i, x_aux, aux_ds):
    """v = sum_p (x_I * W_cha)(p) W_spa(p) + mean(x_aux), evaluated step by step."""
    stacked = np.concatenate([x_i, x_aux, aux_ds])
    z = relu(naive_conv(stacked, params[f"{name}.trunk.0.weight"], params[f"{name}.trunk.0.bias"]))
    z = relu(naive_conv(z, params[f"{name}.trunk.1.weight"], params[f"{name}.trunk.1.bias"]))

    h = z.mean(axis=(1, 2))
    hidden = relu(params[f"{name}.fc1.weight"] @ h + params[f"{name}.fc1.bias"])
    channel = 1.0 / (
        1.0 + np.exp(-(params[f"{name}.fc2.weight"] @ hidden + params[f"{name}.fc2.bias"]))
    )

    logits = naive_conv(z, params[f"{name}.spatial.weight"], params[f"{name}.spatial.bias"])[0]
    spatial = np.exp(logits - logits.max())
    spatial /= spatial.sum()

    v_hat = np.zeros(x_i.shape[0])
    for y in range(x_i.shape[1]):
        for z_ in range(x_i.shape[2]):
            v_hat += x_i[:, y, z_] * channel * spatial[y, z_]
    return v_hat + x_aux.mean(axis=(1, 2))


@pytest.fixture
def encoder_params():
    params = ParamSet(seed=11)
    return params, ScceEncoder(params, channels=CHANNELS, reduction=4)


@pytest.fixture
def gop_input(rng):
    return random_gop_input(rng)


def random_gop_input(rng: np.random.Generator, size: int = 16) -> GopInput:
    return GopInput(
        iframe=rng.uniform(size=(3, size, size)),
        frame_index=4,
        pframes=[
            PFrameInput(
                t=t,
                frame_index=4 + t,
                motion=rng.uniform(-1, 1, (2, size, size)),
                residual=rng.normal(0, 0.2, (3, size, size)),
            )
            for t in (1, 3)
        ],
    )


class TestSampling:
    def test_evenly_spaced_indices(self):
        assert sample_pframe_indices(11, 3) == [3, 6, 8]

    def test_no_samples(self):
        assert sample_pframe_indices(11, 0) == []
        assert sample_pframe_indices(0, 3) == []

    def test_short_gop_samples_what_it_has(self):
        picks = sample_pframe_indices(2, 3)
        assert picks == sorted(set(picks))
        assert all(1 <= t <= 2 for t in picks)

    @pytest.mark.parametrize("available", range(1, 20))
    def test_indices_ascending_and_in_range(self, available):
        picks = sample_pframe_indices(available, 3)
        assert picks == sorted(set(picks))
        assert 1 <= picks[0] and picks[-1] <= available


class TestFeatureExtractors:
    def test_zero_input_gives_constant_interior(self, encoder_params):
        params, encoder = encoder_params
        for name in params.names():
            if name.startswith("f_i.") and name.endswith(".bias"):
                params.parameter(name).value[...] = np.linspace(0.1, 0.5, params[name].size)

        x_i, _ = encoder.extract_iframe(np.zeros((3, 64, 64)))
        interior = x_i[:, 2:6, 2:6]
        assert x_i.shape == (CHANNELS, 8, 8)
        assert np.allclose(interior, interior[:, :1, :1], rtol=0, atol=1e-12)

    def test_matches_loop_oracle(self, encoder_params, rng):
        params, encoder = encoder_params
        iframe = rng.uniform(size=(3, 16, 16))
        motion = rng.uniform(-1, 1, size=(2, 16, 16))

        x_i, _ = encoder.extract_iframe(iframe)
        x_m, _ = encoder.extract_motion(motion)

        assert np.allclose(
            x_i, straight_line_extractor(params, "f_i", iframe, 3), rtol=1e-12, atol=1e-14
        )
        assert np.allclose(
            x_m, straight_line_extractor(params, "f_m", motion, 2), rtol=1e-12, atol=1e-14
        )

    def test_same_seed_same_features(self, rng):
        iframe = rng.uniform(size=(3, 16, 16))
        outputs = [
            ScceEncoder(ParamSet(3), channels=CHANNELS).extract_iframe(iframe)[0] for _ in range(2)
        ]
        assert np.array_equal(outputs[0], outputs[1])


class TestGates:
    def test_zero_trunk_gives_zero_z(self, encoder_params, rng):
        params, encoder = encoder_params
        for name in params.names():
            if name.startswith("motion.trunk."):
                params.parameter(name).value[...] = 0.0

        z, _ = encoder.motion_branch.fusion_trunk(
            rng.normal(size=(CHANNELS, 2, 2)), rng.normal(size=(CHANNELS, 2, 2)), rng.normal(
                size=(2, 2, 2)
            )
        )
        assert not z.any()

    def test_zero_fc_gives_half(self, encoder_params, rng):
        params, encoder = encoder_params
        for name in (
            "motion.fc1.weight", "motion.fc1.bias", "motion.fc2.weight", "motion.fc2.bias"
        ):
            params.parameter(name).value[...] = 0.0

        gate, _ = encoder.motion_branch.channel_gate(rng.normal(size=(CHANNELS, 4, 4)))
        assert np.array_equal(gate, np.full(CHANNELS, 0.5))

    def test_gate_ranges(self, encoder_params, rng):
        _, encoder = encoder_params
        for _ in range(5):
            z = rng.normal(scale=5, size=(CHANNELS, 3, 5))
            channel, _ = encoder.residual_branch.channel_gate(z)
            spatial, _ = encoder.residual_branch.spatial_gate(z)

            assert np.all((channel > 0) & (channel < 1))
            assert np.all(spatial >= 0)
            assert abs(spatial.sum() - 1.0) < 1e-12

    def test_zero_spatial_conv_is_uniform(self, encoder_params, rng):
        params, encoder = encoder_params
        params.parameter("motion.spatial.weight").value[...] = 0.0

        spatial, _ = encoder.motion_branch.spatial_gate(rng.normal(size=(CHANNELS, 3, 4)))
        assert np.allclose(spatial, 1.0 / 12, rtol=0, atol=1e-15)

    def test_reduction_must_divide_channels(self):
        with pytest.raises(ShapeError):
            ScceEncoder(ParamSet(0), channels=10, reduction=4)


class TestRefineAndFuse:
    def test_uniform_spatial_weights_average(self, rng):
        x_i = rng.normal(size=(4, 3, 3))
        channel = rng.uniform(size=4)
        uniform = Gates(channel=channel, spatial=np.full((3, 3), 1 / 9))
        zero_r = Gates(channel=np.zeros(4), spatial=np.full((3, 3), 1 / 9))

        embedding, _ = refine_and_fuse(
            x_i, uniform, np.zeros((4, 3, 3)), zero_r, np.zeros((4, 3, 3))
        )

        assert np.allclose(
            embedding.v_hat_motion, (x_i * channel[:, None, None]).mean(axis=(1, 2)), atol=1e-15
        )
        assert np.allclose(embedding.vector, embedding.v_hat_motion, atol=1e-15)

    def test_sum_of_branches(self, rng):
        x_i = rng.normal(size=(4, 2, 3))
        spatial = rng.uniform(size=(2, 3))
        spatial /= spatial.sum()
        gates_m = Gates(channel=rng.uniform(size=4), spatial=spatial)
        gates_r = Gates(channel=rng.uniform(size=4), spatial=spatial[::-1].copy())

        embedding, _ = refine_and_fuse(
            x_i, gates_m, rng.normal(size=(4, 2, 3)), gates_r, rng.normal(size=(4, 2, 3))
        )
        assert np.array_equal(embedding.vector, embedding.v_motion + embedding.v_residual)


class TestEncodeGop:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_straight_line_evaluation(self, seed):
        params = ParamSet(seed=seed)
        encoder = ScceEncoder(params, channels=CHANNELS, reduction=4)
        gop_input = random_gop_input(np.random.default_rng(seed), size=8 * (1 + seed % 3))
        embeddings, _ = encoder.encode_prepared(gop_input)

        x_i = straight_line_extractor(params, "f_i", gop_input.iframe, 3)
        assert np.allclose(embeddings.vectors[0], x_i.mean(axis=(1, 2)), rtol=1e-10, atol=1e-14)

        for row, pframe in enumerate(gop_input.pframes, start=1):
            x_m = straight_line_extractor(params, "f_m", pframe.motion, 2)
            x_r = straight_line_extractor(params, "f_r", pframe.residual, 2)
            v_m = straight_line_branch(params, "motion", x_i, x_m, naive_pool(pframe.motion, 8))
            v_r = straight_line_branch(params, "residual", x_i, x_r, naive_pool(pframe.residual, 8))

            assert np.allclose(embeddings.vectors[row], v_m + v_r, rtol=1e-10, atol=1e-14)

        assert embeddings.frame_indices == [4, 5, 7]

    def test_encode_gop_sampling(self, encoder_params, rng):
        _, encoder = encoder_params
        params = CodecParams(block_size=8, search_radius=2, gop_pframes=6)
        cv = encode_video(random_video(rng, 7, 16, 16), params)
        accumulated = accumulate_gop(cv.gops[0], 8)

        embeddings, _ = encoder.encode_gop(
            cv.gops[0].iframe, accumulated, sample_t=2, search_radius=2
        )
        assert embeddings.vectors.shape == (3, CHANNELS)
        assert embeddings.frame_indices == [0, 2, 4]

        only_iframe, _ = encoder.encode_gop(
            cv.gops[0].iframe, accumulated, sample_t=0, frame_index=10
        )
        assert only_iframe.vectors.shape == (1, CHANNELS)
        assert only_iframe.frame_indices == [10]

    def test_deterministic(self, encoder_params, rng):
        _, encoder = encoder_params
        cv = encode_video(
            random_video(rng, 4, 16, 16), CodecParams(block_size=8, search_radius=2, gop_pframes=3)
        )
        accumulated = accumulate_gop(cv.gops[0], 8)

        first, _ = encoder.encode_gop(cv.gops[0].iframe, accumulated, sample_t=3)
        second, _ = encoder.encode_gop(cv.gops[0].iframe.copy(), accumulated, sample_t=3)
        assert np.array_equal(first.vectors, second.vectors)

    def test_frame_size_must_divide_by_stride(self, encoder_params):
        _, encoder = encoder_params
        with pytest.raises(ShapeError, match="divisible"):
            encoder.encode_gop(np.zeros((12, 16, 3), np.uint8), [], sample_t=0)

    def test_empty_gop(self, encoder_params):
        _, encoder = encoder_params
        with pytest.raises(ShapeError, match="empty"):
            encoder.encode_gop(np.zeros((0, 0, 3), np.uint8), [], sample_t=0)

    @pytest.mark.parametrize("variant", list(EncoderVariant))
    def test_gradients(self, gop_input, rng, variant):
        params = ParamSet(seed=21)
        encoder = ScceEncoder(params, channels=CHANNELS, variant=variant)
        coeff = rng.normal(size=(3, CHANNELS))

        def loss_and_grad():
            embeddings, backward = encoder.encode_prepared(gop_input)
            backward(coeff)
            return float(np.sum(embeddings.vectors * coeff))

        report = gradient_check(loss_and_grad, params, tolerance=1e-5, samples_per_param=3)
        assert report.passed, report.max_rel_err

    def test_no_compressed_signal_repeats_iframe_embedding(self, gop_input):
        encoder = ScceEncoder(ParamSet(0), channels=CHANNELS, variant=EncoderVariant.NONE)
        embeddings, _ = encoder.encode_prepared(gop_input)
        assert np.array_equal(embeddings.vectors[1], embeddings.vectors[0])
