"""
Bit-exact container for compressed videos.

Layout (little-endian):
    magic "CGV1" | u8 version | u16 width | u16 height | f32 fps |
    u8 block_size | u8 t_enc | u32 num_gops
    per GOP: u8 pframe_count | I-frame 3*H*W u8 (row-major, RGB interleaved)
    per P-frame: ceil(H/B)*ceil(W/B) pairs of i8 (dy, dx) | residual 3*H*W i16
"""

import struct
from pathlib import Path
from typing import List

import numpy as np
from loguru import logger

from cgebd.codec.decoder import validate_gop
from cgebd.codec.models import (
    CodecConstants,
    CodecParams,
    CompressedVideo,
    Gop,
    PFrame,
    block_grid_shape,
)
from cgebd.utils.errors import ContainerError, DataError, ShapeError

HEADER = struct.Struct("<4sBHHfBBI")


class ByteReader:
    """Cursor over a byte buffer that reports the offset of truncations."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise ContainerError(
                f"Truncated container while reading {what}: need {count} bytes, "
                f"{len(self.data) - self.offset} left",
                offset=self.offset,
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        item = np.dtype(dtype)
        return np.frombuffer(self.take(count * item.itemsize, what), dtype=item).copy()

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset


def container_bytes(cv: CompressedVideo) -> bytes:
    """Serialize a compressed video to the container byte layout."""
    params = cv.params
    if cv.num_gops < 1:
        raise DataError("A container needs at least one GOP")
    if cv.width > CodecConstants.MAX_DIMENSION or cv.height > CodecConstants.MAX_DIMENSION:
        raise DataError(f"Frame size {cv.width}x{cv.height} overflows the u16 header fields")

    parts: List[bytes] = [
        HEADER.pack(
            CodecConstants.MAGIC,
            CodecConstants.VERSION,
            cv.width,
            cv.height,
            cv.fps,
            params.block_size,
            params.gop_pframes,
            cv.num_gops,
        )
    ]

    for index, gop in enumerate(cv.gops):
        if len(gop.pframes) > params.gop_pframes:
            raise DataError(
                f"GOP {index} has {len(gop.pframes)} P-frames, more than t_enc={params.gop_pframes}"
            )
        try:
            validate_gop(gop, params.block_size, params.search_radius)
        except DataError as e:
            raise DataError(f"GOP {index} cannot be written: {e}")
        parts.append(struct.pack("<B", len(gop.pframes)))
        parts.append(np.ascontiguousarray(gop.iframe, dtype=np.uint8).tobytes())
        for pframe in gop.pframes:
            parts.append(np.ascontiguousarray(pframe.motion, dtype="<i1").tobytes())
            parts.append(np.ascontiguousarray(pframe.residual, dtype="<i2").tobytes())

    return b"".join(parts)


def parse_container(data: bytes, search_radius: int = 8) -> CompressedVideo:
    """
    Parse container bytes.

    The search radius is not part of the format; callers supply it and every
    motion vector is validated against it.
    """
    reader = ByteReader(data)
    if data[:4] != CodecConstants.MAGIC:
        raise ContainerError(
            f"Bad magic {bytes(data[:4])!r}, expected {CodecConstants.MAGIC!r}", offset=0
        )

    _, version, width, height, fps, block_size, t_enc, num_gops = HEADER.unpack(
        reader.take(HEADER.size, "header")
    )

    if version != CodecConstants.VERSION:
        raise ContainerError(f"Unsupported container version {version}", offset=4)
    if width == 0 or height == 0 or block_size == 0 or t_enc == 0 or num_gops == 0:
        raise ContainerError("Header fields must be positive", offset=0)
    if not np.isfinite(fps) or fps <= 0:
        raise ContainerError(f"Invalid fps {fps}", offset=9)

    try:
        params = CodecParams(block_size=block_size, search_radius=search_radius, gop_pframes=t_enc)
    except ValueError as e:
        raise ContainerError(f"Invalid codec parameters: {e}", offset=0)

    grid = block_grid_shape(height, width, block_size)
    plane = height * width * 3
    gops: List[Gop] = []

    for index in range(num_gops):
        gop_offset = reader.offset
        (count,) = struct.unpack("<B", reader.take(1, f"GOP {index} P-frame count"))
        if count > t_enc:
            raise ContainerError(
                f"GOP {index} has {count} P-frames, more than t_enc={t_enc}", gop_offset
            )
        if count < t_enc and index != num_gops - 1:
            raise ContainerError(
                f"Only the last GOP may be short, GOP {index} has {count}", gop_offset
            )

        iframe = reader.array("u1", plane, f"GOP {index} I-frame").reshape(height, width, 3)
        gop = Gop(iframe=iframe)
        for t in range(1, count + 1):
            motion = reader.array("<i1", grid[0] * grid[1] * 2, f"GOP {index} P-frame {t} motion")
            residual = reader.array("<i2", plane, f"GOP {index} P-frame {t} residual")
            gop.pframes.append(
                PFrame(
                    motion=motion.astype(np.int8).reshape(grid[0], grid[1], 2),
                    residual=residual.astype(np.int16).reshape(height, width, 3),
                )
            )

        try:
            validate_gop(gop, block_size, search_radius)
        except (DataError, ShapeError) as e:
            raise ContainerError(f"GOP {index} violates codec invariants: {e}", gop_offset)
        gops.append(gop)

    if reader.remaining:
        raise ContainerError(f"{reader.remaining} trailing bytes after last GOP", reader.offset)

    return CompressedVideo(params=params, fps=float(fps), width=width, height=height, gops=gops)


def write_container(cv: CompressedVideo, path: str | Path) -> int:
    """Write a container file, returning the number of bytes written."""
    data = container_bytes(cv)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)
    logger.debug(f"Wrote {len(data)} bytes to {path}")
    return len(data)


def read_container(path: str | Path, search_radius: int = 8) -> CompressedVideo:
    """Read and validate a container file."""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"Container not found: {path}")
    try:
        return parse_container(data, search_radius=search_radius)
    except ContainerError as e:
        error = ContainerError(f"{path}: {e}")
        error.offset = e.offset
        raise error from e
