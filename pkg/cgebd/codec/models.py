from dataclasses import dataclass, field
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from cgebd.utils.errors import ShapeError


class CodecConstants:
    """Container layout constants"""

    MAGIC = b"CGV1"
    VERSION = 1

    # Header field limits
    MAX_DIMENSION = 0xFFFF
    MAX_BYTE_FIELD = 0xFF
    MAX_GOPS = 0xFFFFFFFF

    # Motion vectors are stored as i8
    MAX_SEARCH_RADIUS = 127
    RESIDUAL_LIMIT = 255


class CodecParams(BaseModel):
    """Parameters of the block codec."""

    model_config = ConfigDict(frozen=True)

    block_size: int = Field(
        default=8, ge=1, le=CodecConstants.MAX_BYTE_FIELD, description="Block size B in pixels"
    )
    search_radius: int = Field(
        default=8,
        ge=0,
        le=CodecConstants.MAX_SEARCH_RADIUS,
        description="Integer-pel motion search radius S",
    )
    gop_pframes: int = Field(
        default=11,
        ge=1,
        le=CodecConstants.MAX_BYTE_FIELD,
        description="P-frames per GOP (T_enc); each GOP is 1 I-frame + T_enc P-frames",
    )


@dataclass
class RawVideo:
    """Raw RGB video, frames stacked as an (F, H, W, 3) uint8 array."""

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ShapeError(f"Frames must be (F, H, W, 3), got {self.frames.shape}")
        if self.frames.dtype != np.uint8:
            raise ShapeError(f"Frames must be uint8, got {self.frames.dtype}")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawVideo):
            return NotImplemented
        return self.fps == other.fps and np.array_equal(self.frames, other.frames)


@dataclass
class PFrame:
    """
    One predicted frame.

    motion: (ceil(H/B), ceil(W/B), 2) grid of (dy, dx) block vectors
    residual: (H, W, 3) int16 plane, values in [-255, 255]
    """

    motion: np.ndarray
    residual: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, PFrame):
            return NotImplemented
        return np.array_equal(self.motion, other.motion) and np.array_equal(
            self.residual, other.residual
        )


@dataclass
class Gop:
    """Group of pictures: a raw I-frame followed by its P-frames."""

    iframe: np.ndarray
    pframes: List[PFrame] = field(default_factory=list)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gop):
            return NotImplemented
        return np.array_equal(self.iframe, other.iframe) and self.pframes == other.pframes


@dataclass
class CompressedVideo:
    """Header plus ordered GOPs."""

    params: CodecParams
    fps: float
    width: int
    height: int
    gops: List[Gop] = field(default_factory=list)

    @property
    def num_gops(self) -> int:
        return len(self.gops)

    @property
    def num_frames(self) -> int:
        return sum(1 + len(gop.pframes) for gop in self.gops)

    @property
    def duration(self) -> float:
        return self.num_frames / self.fps

    def gop_start(self, index: int) -> int:
        """Frame index of the I-frame of GOP ``index``."""
        return index * (1 + self.params.gop_pframes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompressedVideo):
            return NotImplemented
        return (
            self.params == other.params
            and self.fps == other.fps
            and self.width == other.width
            and self.height == other.height
            and self.gops == other.gops
        )


def block_grid_shape(height: int, width: int, block_size: int) -> tuple[int, int]:
    """Shape of the block grid under ceiling tiling."""
    return -(-height // block_size), -(-width // block_size)
