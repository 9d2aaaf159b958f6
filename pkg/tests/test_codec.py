import numpy as np
import pytest

from cgebd.codec import CodecParams, RawVideo, decode_sequential, densify_motion_field, encode_video
from cgebd.codec.encoder import block_sad, search_block_motion
from cgebd.codec.models import CompressedVideo, Gop, PFrame
from cgebd.utils.errors import DataError, ShapeError
from tests.conftest import random_video, translating_video


class TestEncoder:
    """Block motion search and GOP layout."""

    def test_static_scene_has_zero_motion_and_residual(self, rng):
        frame = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        video = RawVideo(frames=np.repeat(frame[None], 24, axis=0), fps=12.0)

        cv = encode_video(video, CodecParams(block_size=8, search_radius=8))

        for gop in cv.gops:
            for pframe in gop.pframes:
                assert not pframe.motion.any()
                assert not pframe.residual.any()

    def test_gop_layout_with_short_last_gop(self, rng, small_params):
        cv = encode_video(random_video(rng, 10, 16, 16), small_params)

        assert [len(g.pframes) for g in cv.gops] == [3, 3, 1]
        assert cv.num_frames == 10
        assert cv.gop_start(2) == 8

    def test_rigid_translation_found_with_negative_sign(self, rng):
        video = translating_video(rng, frames=3, size=32, step=(2, 0))
        params = CodecParams(block_size=8, search_radius=4, gop_pframes=2)

        motion = search_block_motion(video.frames[0], video.frames[1], params)

        # Top block row reads above the frame and is clamped
        assert np.all(motion[1:, :, 0] == -2)
        assert np.all(motion[1:, :, 1] == 0)

    def test_chosen_vector_never_worse_than_zero(self, rng):
        params = CodecParams(block_size=8, search_radius=3)
        reference = rng.integers(0, 256, size=(20, 28, 3), dtype=np.uint8)
        target = rng.integers(0, 256, size=(20, 28, 3), dtype=np.uint8)

        motion = search_block_motion(reference, target, params)
        dense = densify_motion_field(motion, 8, 20, 28)
        rows = np.clip(np.arange(20)[:, None] + dense[0], 0, 19)
        cols = np.clip(np.arange(28)[None, :] + dense[1], 0, 27)

        chosen = block_sad(target, reference[rows, cols], 8)
        zero = block_sad(target, reference, 8)
        assert np.all(chosen <= zero)

    def test_encoding_is_deterministic_and_worker_invariant(self, rng, small_params):
        video = random_video(rng, 9, 16, 24)
        assert encode_video(video, small_params) == encode_video(video, small_params, workers=3)

    def test_empty_video_is_rejected(self, small_params):
        video = RawVideo(frames=np.zeros((0, 8, 8, 3), dtype=np.uint8), fps=8.0)
        with pytest.raises(DataError):
            encode_video(video, small_params)

    def test_fps_is_rounded_to_storage_precision(self, rng, small_params):
        cv = encode_video(random_video(rng, 2, 8, 8, fps=29.97), small_params)
        assert cv.fps == float(np.float32(29.97))


class TestDecoder:
    """Sequential reconstruction."""

    @pytest.mark.parametrize("seed", range(50))
    def test_round_trip_is_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        height, width = rng.choice([8, 16, 24, 32], size=2)
        frames = int(rng.integers(6, 14))
        video = random_video(rng, frames, int(height), int(width))
        params = CodecParams(block_size=8, search_radius=2, gop_pframes=int(rng.integers(1, 6)))

        assert decode_sequential(encode_video(video, params)) == video

    def test_round_trip_on_moving_content(self, rng):
        video = translating_video(rng, frames=12, size=32, step=(1, -2))
        assert decode_sequential(encode_video(video, CodecParams())) == video

    def test_zero_fields_repeat_the_iframe(self, rng):
        iframe = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        pframes = [
            PFrame(np.zeros((2, 2, 2), np.int8), np.zeros((16, 16, 3), np.int16)) for _ in range(3)
        ]
        cv = CompressedVideo(CodecParams(gop_pframes=3), 8.0, 16, 16, [Gop(iframe, pframes)])

        decoded = decode_sequential(cv)
        assert all(np.array_equal(frame, iframe) for frame in decoded.frames)

    def test_residual_only_coding(self, rng):
        iframe = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        target = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        residual = target.astype(np.int16) - iframe.astype(np.int16)
        pframe = PFrame(np.zeros((1, 1, 2), np.int8), residual)
        cv = CompressedVideo(CodecParams(gop_pframes=1), 8.0, 8, 8, [Gop(iframe, [pframe])])

        assert np.array_equal(decode_sequential(cv).frames[1], target)

    def test_motion_beyond_search_radius_is_malformed(self):
        motion = np.full((1, 1, 2), 5, dtype=np.int8)
        pframe = PFrame(motion, np.zeros((8, 8, 3), np.int16))
        cv = CompressedVideo(
            CodecParams(search_radius=4, gop_pframes=1), 8.0, 8, 8, [
                Gop(np.zeros((8, 8, 3), np.uint8), [pframe])
            ]
        )
        with pytest.raises(DataError, match="Malformed GOP 0"):
            decode_sequential(cv)


class TestDensify:
    def test_single_block(self):
        dense = densify_motion_field(np.array([[[3, -1]]]), 8, 8, 8)
        assert np.all(dense[0] == 3) and np.all(dense[1] == -1)

    def test_block_membership(self):
        grid = np.array([[[0, 0], [1, 1]], [[2, 2], [3, 3]]])
        dense = densify_motion_field(grid, 8, 16, 16)

        assert tuple(dense[:, 0, 15]) == (1, 1)
        assert tuple(dense[:, 15, 0]) == (2, 2)

    def test_matches_loop_oracle_with_partial_blocks(self, rng):
        grid = rng.integers(-4, 5, size=(3, 2, 2))
        dense = densify_motion_field(grid, 8, 20, 13)

        for y in range(20):
            for x in range(13):
                assert tuple(dense[:, y, x]) == tuple(grid[y // 8, x // 8])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            densify_motion_field(np.zeros((1, 1, 2)), 8, 16, 16)
