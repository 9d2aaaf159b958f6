"""
Motion-compensated reconstruction for the block codec.

Motion vector convention, shared by the encoder and accumulation:
prediction(p) = reference(clamp(p + M(p))), clamped per axis to the frame.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List

import numpy as np

from cgebd.codec.models import CodecConstants, CompressedVideo, Gop, RawVideo, block_grid_shape
from cgebd.utils.errors import DataError, ShapeError


def densify_motion_field(
    motion: np.ndarray, block_size: int, height: int, width: int
) -> np.ndarray:
    """
    Expand a block motion grid into per-pixel offsets.

    Args:
        motion: (ceil(H/B), ceil(W/B), 2) block vectors
        block_size: block size B
        height, width: frame size

    Returns:
        (2, H, W) int64 array; every pixel carries its containing block's vector.
    """
    expected = block_grid_shape(height, width, block_size)
    if motion.ndim != 3 or motion.shape[:2] != expected or motion.shape[2] != 2:
        raise ShapeError(f"Motion grid shape {motion.shape} does not match {expected + (2,)}")

    dense = np.repeat(np.repeat(motion.astype(np.int64), block_size, axis=0), block_size, axis=1)
    return np.ascontiguousarray(dense[:height, :width].transpose(2, 0, 1))


def clamped_coordinates(offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Absolute (row, col) index arrays of p + offset(p), clamped into the frame."""
    _, height, width = offsets.shape
    rows = np.clip(np.arange(height)[:, None] + offsets[0], 0, height - 1)
    cols = np.clip(np.arange(width)[None, :] + offsets[1], 0, width - 1)
    return rows, cols


def motion_compensate(reference: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Gather reference(clamp(p + offset(p))) for every pixel p."""
    rows, cols = clamped_coordinates(offsets)
    return reference[rows, cols]


def validate_gop(gop: Gop, block_size: int, search_radius: int) -> None:
    """Check MV magnitudes and residual ranges of one GOP."""
    height, width = gop.iframe.shape[:2]
    grid = block_grid_shape(height, width, block_size)

    for t, pframe in enumerate(gop.pframes, start=1):
        if pframe.motion.shape != grid + (2,):
            raise ShapeError(
                f"P-frame {t}: motion grid {pframe.motion.shape}, expected {grid + (2,)}"
            )
        if pframe.residual.shape != gop.iframe.shape:
            raise ShapeError(
                f"P-frame {t}: residual {pframe.residual.shape}, expected {gop.iframe.shape}"
            )
        if pframe.motion.size and np.abs(pframe.motion.astype(np.int64)).max() > search_radius:
            raise DataError(f"P-frame {t}: motion vector exceeds search radius {search_radius}")
        residual_peak = np.abs(pframe.residual.astype(np.int64)).max(initial=0)
        if residual_peak > CodecConstants.RESIDUAL_LIMIT:
            raise DataError(f"P-frame {t}: residual outside [-255, 255]")


def decode_gop_wide(gop: Gop, block_size: int) -> List[np.ndarray]:
    """
    Decode one GOP without clipping.

    Returns the I-frame and every P-frame as int32 (H, W, 3) planes; the
    arithmetic is exact so the chain never loses information.
    """
    height, width = gop.iframe.shape[:2]
    frames = [gop.iframe.astype(np.int32)]

    for pframe in gop.pframes:
        dense = densify_motion_field(pframe.motion, block_size, height, width)
        prediction = motion_compensate(frames[-1], dense)
        frames.append(prediction + pframe.residual.astype(np.int32))

    return frames


def decode_gop(gop: Gop, block_size: int) -> np.ndarray:
    """Decode one GOP into an (1 + T, H, W, 3) uint8 array."""
    wide = decode_gop_wide(gop, block_size)
    return np.clip(np.stack(wide), 0, 255).astype(np.uint8)


def decode_sequential(cv: CompressedVideo, workers: int = 1) -> RawVideo:
    """
    Decode every GOP and concatenate the frames in order.

    GOPs are independent, so they may decode in parallel; the output does not
    depend on ``workers``.
    """
    for index, gop in enumerate(cv.gops):
        try:
            validate_gop(gop, cv.params.block_size, cv.params.search_radius)
        except (DataError, ShapeError) as e:
            raise DataError(f"Malformed GOP {index}: {e}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decoded = list(pool.map(lambda g: decode_gop(g, cv.params.block_size), cv.gops))
    else:
        decoded = [decode_gop(gop, cv.params.block_size) for gop in cv.gops]

    return RawVideo(frames=np.concatenate(decoded, axis=0), fps=cv.fps)
