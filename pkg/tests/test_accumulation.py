import numpy as np
import pytest

from cgebd.codec import (
    CodecParams,
    accumulate_gop,
    decode_sequential,
    encode_video,
    read_accumulated,
    reconstruct_from_accumulated,
    write_accumulated,
)
from cgebd.codec.accumulation import reconstruct_wide
from cgebd.codec.decoder import decode_gop_wide
from cgebd.codec.models import Gop, PFrame
from cgebd.utils.errors import ContainerError, DataError
from tests.conftest import random_video, translating_video


def random_gop(
    rng: np.random.Generator, pframes: int, height: int, width: int, block: int, radius: int
) -> Gop:
    """GOP with arbitrary in-range fields, not produced by the encoder."""
    grid = (-(-height // block), -(-width // block), 2)
    return Gop(
        iframe=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
        pframes=[
            PFrame(
                motion=rng.integers(-radius, radius + 1, size=grid).astype(np.int8),
                residual=rng.integers(-255, 256, size=(height, width, 3)).astype(np.int16),
            )
            for _ in range(pframes)
        ],
    )


class TestAccumulation:
    def test_zero_motion_sums_residuals(self, rng):
        gop = random_gop(rng, 4, 16, 16, 8, 0)
        accumulated = accumulate_gop(gop, 8)

        running = np.zeros((3, 16, 16), dtype=np.int32)
        for acc, pframe in zip(accumulated, gop.pframes):
            running += pframe.residual.transpose(2, 0, 1)
            assert not acc.motion.any()
            assert np.array_equal(acc.residual, running)

    def test_rigid_translation_accumulates_linearly(self, rng):
        video = translating_video(rng, frames=5, size=48, step=(1, 2))
        cv = encode_video(video, CodecParams(block_size=8, search_radius=4, gop_pframes=4))
        accumulated = accumulate_gop(cv.gops[0], 8)

        # Interior pixels are far enough from the border that no hop clamps
        for acc in accumulated:
            assert np.all(acc.motion[0, 16:32, 16:32] == -acc.t)
            assert np.all(acc.motion[1, 16:32, 16:32] == -2 * acc.t)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_sequential_decode_on_arbitrary_gops(self, seed):
        rng = np.random.default_rng(seed)
        height, width = (int(v) for v in rng.integers(5, 30, size=2))
        block = int(rng.choice([2, 4, 8]))
        radius = int(rng.integers(0, 6))
        gop = random_gop(rng, int(rng.integers(1, 12)), height, width, block, radius)

        sequential = decode_gop_wide(gop, block)
        for acc in accumulate_gop(gop, block):
            assert np.array_equal(reconstruct_wide(gop.iframe, acc), sequential[acc.t])
            assert np.abs(acc.motion).max(initial=0) <= acc.t * radius

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_decoded_video(self, seed):
        rng = np.random.default_rng(100 + seed)
        video = random_video(rng, int(rng.integers(6, 16)), 16, 16)
        cv = encode_video(video, CodecParams(block_size=8, search_radius=2, gop_pframes=5))
        decoded = decode_sequential(cv).frames

        for index, gop in enumerate(cv.gops):
            start = cv.gop_start(index)
            for acc in accumulate_gop(gop, 8):
                assert np.array_equal(
                    reconstruct_from_accumulated(gop.iframe, acc), decoded[start + acc.t]
                )

    def test_gop_without_pframes(self, rng):
        assert accumulate_gop(random_gop(rng, 0, 8, 8, 8, 0), 8) == []

    def test_single_pframe_equals_one_decode_step(self, rng):
        gop = random_gop(rng, 1, 12, 12, 4, 3)
        (acc,) = accumulate_gop(gop, 4)
        assert np.array_equal(reconstruct_wide(gop.iframe, acc), decode_gop_wide(gop, 4)[1])


class TestAccumulationDump:
    def test_round_trip(self, rng, tmp_path):
        accumulated = accumulate_gop(random_gop(rng, 3, 8, 16, 4, 2), 4)
        path = tmp_path / "gop.acc"
        write_accumulated(accumulated, path)

        assert read_accumulated(path) == accumulated
        assert path.read_bytes()[:4] == b"ACC1"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.acc"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(ContainerError, match="NOPE"):
            read_accumulated(path)

    def test_trailing_bytes(self, rng, tmp_path):
        path = tmp_path / "gop.acc"
        write_accumulated(accumulate_gop(random_gop(rng, 2, 8, 8, 4, 1), 4), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(ContainerError, match="2 trailing bytes"):
            read_accumulated(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            read_accumulated(tmp_path / "absent.acc")
