"""
Lossless block codec encoder.

Each GOP stores its first frame raw. Every following frame is predicted from
the previous reconstruction with one integer-pel vector per block, chosen by
exhaustive SAD search, and the residual is stored exactly.
"""

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import List

import numpy as np
from loguru import logger

from cgebd.codec.decoder import densify_motion_field, motion_compensate
from cgebd.codec.models import CodecConstants, CodecParams, CompressedVideo, Gop, PFrame, RawVideo
from cgebd.utils.errors import DataError


@lru_cache(maxsize=32)
def search_order(search_radius: int) -> np.ndarray:
    """
    Candidate offsets in tie-break priority.

    Sorted by |dy| + |dx|, then by row-major position in [-S, S]^2, so the
    first minimum over this order is the deterministic winner.
    """
    span = range(-search_radius, search_radius + 1)
    offsets = [(dy, dx) for dy in span for dx in span]
    ranked = sorted(range(len(offsets)), key=lambda i: (abs(offsets[i][0]) + abs(offsets[i][1]), i))
    return np.array([offsets[i] for i in ranked], dtype=np.int64)


def block_sad(target: np.ndarray, prediction: np.ndarray, block_size: int) -> np.ndarray:
    """Sum of absolute differences per block, partial edge blocks over their actual extent."""
    diff = np.abs(target.astype(np.int32) - prediction.astype(np.int32)).sum(axis=2)
    row_starts = np.arange(0, diff.shape[0], block_size)
    col_starts = np.arange(0, diff.shape[1], block_size)
    return np.add.reduceat(np.add.reduceat(diff, row_starts, axis=0), col_starts, axis=1)


def search_block_motion(
    reference: np.ndarray, target: np.ndarray, params: CodecParams
) -> np.ndarray:
    """
    Exhaustive block-matching motion search.

    Returns:
        (ceil(H/B), ceil(W/B), 2) int8 grid of (dy, dx) such that
        target(p) is predicted by reference(clamp(p + M)).
    """
    height, width = reference.shape[:2]
    rows = np.arange(height)
    cols = np.arange(width)
    candidates = search_order(params.search_radius)

    costs = []
    for dy, dx in candidates:
        shifted = reference[np.clip(rows + dy, 0, height - 1)][:, np.clip(cols + dx, 0, width - 1)]
        costs.append(block_sad(target, shifted, params.block_size))

    best = np.argmin(np.stack(costs), axis=0)
    return candidates[best].astype(np.int8)


def encode_gop(frames: np.ndarray, params: CodecParams) -> Gop:
    """Encode 1 + n consecutive frames (n <= T_enc) as one GOP."""
    height, width = frames.shape[1:3]
    gop = Gop(iframe=frames[0].copy())

    for t in range(1, frames.shape[0]):
        # lossless residuals make the reconstruction equal the raw previous frame
        reference = frames[t - 1]
        target = frames[t]
        motion = search_block_motion(reference, target, params)
        dense = densify_motion_field(motion, params.block_size, height, width)
        prediction = motion_compensate(reference, dense)
        residual = (target.astype(np.int16) - prediction.astype(np.int16)).astype(np.int16)
        gop.pframes.append(PFrame(motion=motion, residual=residual))

    return gop


def encode_video(video: RawVideo, params: CodecParams, workers: int = 1) -> CompressedVideo:
    """
    Encode a raw video into GOPs of one I-frame and up to T_enc P-frames.

    Encoding is deterministic and independent of ``workers``.
    """
    if video.num_frames == 0:
        raise DataError("Cannot encode an empty video")
    if video.width > CodecConstants.MAX_DIMENSION or video.height > CodecConstants.MAX_DIMENSION:
        raise DataError(
            f"Frame size {video.width}x{video.height} overflows the u16 header fields"
        )

    gop_length = 1 + params.gop_pframes
    chunks: List[np.ndarray] = [
        video.frames[start : start + gop_length] for start in range(0, video.num_frames, gop_length)
    ]
    if len(chunks) > CodecConstants.MAX_GOPS:
        raise DataError(f"{len(chunks)} GOPs overflow the u32 header field")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            gops = list(pool.map(lambda chunk: encode_gop(chunk, params), chunks))
    else:
        gops = [encode_gop(chunk, params) for chunk in chunks]

    logger.debug(f"Encoded {video.num_frames} frames into {len(gops)} GOPs")
    return CompressedVideo(
        params=params,
        fps=float(np.float32(video.fps)),
        width=video.width,
        height=video.height,
        gops=gops,
    )
