"""
Accumulated motion vectors and residuals.

Every P-frame is re-expressed against its GOP's I-frame by tracing the motion
chain back one hop per frame:

    q = clamp(p + M^t(p))
    A^t(p) = target^{t-1}(q) - p      (end-to-end offset, already in-frame)
    D^t(p) = R^t(p) + D^{t-1}(q)

so that F^t(p) = I(p + A^t(p)) + D^t(p) holds exactly, borders included.
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from loguru import logger

from cgebd.codec.decoder import clamped_coordinates, densify_motion_field, motion_compensate
from cgebd.codec.models import Gop
from cgebd.utils.errors import ContainerError, DataError, ShapeError

ACC_MAGIC = b"ACC1"


@dataclass
class AccumulatedPFrame:
    """
    A P-frame that depends only on its reference I-frame.

    motion: (2, H, W) int32 accumulated offsets A^t, |A^t| <= t * S
    residual: (3, H, W) int32 accumulated residual D^t
    t: 1-based P-frame index within the GOP
    """

    motion: np.ndarray
    residual: np.ndarray
    t: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccumulatedPFrame):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.motion, other.motion)
            and np.array_equal(self.residual, other.residual)
        )


def accumulate_gop(gop: Gop, block_size: int) -> List[AccumulatedPFrame]:
    """
    Trace every P-frame of a GOP back to the I-frame.

    One backward composition per (pixel, frame); a GOP without P-frames
    yields an empty list.
    """
    height, width = gop.iframe.shape[:2]
    accumulated: List[AccumulatedPFrame] = []

    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    target_rows = np.broadcast_to(rows, (height, width)).astype(np.int64)
    target_cols = np.broadcast_to(cols, (height, width)).astype(np.int64)
    residual = np.zeros((3, height, width), dtype=np.int32)

    for t, pframe in enumerate(gop.pframes, start=1):
        if pframe.residual.shape != (height, width, 3):
            raise ShapeError(
                f"P-frame {t}: residual {pframe.residual.shape} does not match I-frame"
            )

        dense = densify_motion_field(pframe.motion, block_size, height, width)
        q_rows, q_cols = clamped_coordinates(dense)

        target_rows = target_rows[q_rows, q_cols]
        target_cols = target_cols[q_rows, q_cols]
        residual = pframe.residual.transpose(2, 0, 1).astype(np.int32) + residual[:, q_rows, q_cols]

        motion = np.stack([target_rows - rows, target_cols - cols]).astype(np.int32)
        accumulated.append(AccumulatedPFrame(motion=motion, residual=residual, t=t))

    logger.trace(f"Accumulated {len(accumulated)} P-frames over {height}x{width}")
    return accumulated


def reconstruct_wide(iframe: np.ndarray, acc: AccumulatedPFrame) -> np.ndarray:
    """I(clamp(p + A(p))) + D(p) in exact int32 arithmetic, (H, W, 3)."""
    if acc.motion.shape[1:] != iframe.shape[:2] or acc.residual.shape[1:] != iframe.shape[:2]:
        raise ShapeError(
            f"Accumulated fields {acc.motion.shape}/{acc.residual.shape} "
            f"do not match I-frame {iframe.shape}"
        )
    return motion_compensate(iframe.astype(np.int32), acc.motion) + acc.residual.transpose(1, 2, 0)


def reconstruct_from_accumulated(iframe: np.ndarray, acc: AccumulatedPFrame) -> np.ndarray:
    """Reconstruct P-frame t from the I-frame alone, as an (H, W, 3) uint8 plane."""
    return np.clip(reconstruct_wide(iframe, acc), 0, 255).astype(np.uint8)


def write_accumulated(accumulated: List[AccumulatedPFrame], path: str | Path) -> None:
    """
    Debug dump of accumulated fields.

    "ACC1" | u16 height | u16 width | u8 count, then per frame: u8 t |
    A as H*W*2 i16 | D as H*W*3 i32 (row-major, channel-interleaved).
    """
    if not accumulated:
        raise DataError("Nothing to dump")
    _, height, width = accumulated[0].motion.shape
    parts = [ACC_MAGIC, struct.pack("<HHB", height, width, len(accumulated))]
    for acc in accumulated:
        parts.append(struct.pack("<B", acc.t))
        parts.append(np.ascontiguousarray(acc.motion.transpose(1, 2, 0), dtype="<i2").tobytes())
        parts.append(np.ascontiguousarray(acc.residual.transpose(1, 2, 0), dtype="<i4").tobytes())
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(b"".join(parts))


def read_accumulated(path: str | Path) -> List[AccumulatedPFrame]:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"Accumulation dump not found: {path}")
    if data[:4] != ACC_MAGIC:
        raise ContainerError(f"Bad magic {bytes(data[:4])!r}, expected {ACC_MAGIC!r}", offset=0)
    if len(data) < 9:
        raise ContainerError("Truncated accumulation header", offset=len(data))

    height, width, count = struct.unpack_from("<HHB", data, 4)
    offset = 9
    frame_bytes = 1 + height * width * 2 * 2 + height * width * 3 * 4
    accumulated = []
    for _ in range(count):
        if offset + frame_bytes > len(data):
            raise ContainerError("Truncated accumulated frame", offset=offset)
        (t,) = struct.unpack_from("<B", data, offset)
        offset += 1
        motion = np.frombuffer(data, dtype="<i2", count=height * width * 2, offset=offset)
        offset += height * width * 2 * 2
        residual = np.frombuffer(data, dtype="<i4", count=height * width * 3, offset=offset)
        offset += height * width * 3 * 4
        accumulated.append(
            AccumulatedPFrame(
                motion=motion.reshape(height, width, 2).transpose(2, 0, 1).astype(np.int32),
                residual=residual.reshape(height, width, 3).transpose(2, 0, 1).astype(np.int32),
                t=t,
            )
        )
    if offset != len(data):
        raise ContainerError(f"{len(data) - offset} trailing bytes after last frame", offset=offset)
    return accumulated
