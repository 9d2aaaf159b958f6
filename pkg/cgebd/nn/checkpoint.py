"""
Checkpoint format (little-endian):
    "CKP1" | u32 count | per parameter: u16 name length | name bytes (utf-8) |
    u8 rank | u32 dims[rank] | f64 data
"""

import struct
from pathlib import Path
from typing import Dict

import numpy as np
from loguru import logger

from cgebd.nn.tensor import ParamSet, Tensor
from cgebd.utils.errors import ContainerError, DataError

CHECKPOINT_MAGIC = b"CKP1"


def checkpoint_bytes(state: Dict[str, Tensor]) -> bytes:
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(state))]
    for name, value in state.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(parts)


def parse_checkpoint(data: bytes) -> Dict[str, Tensor]:
    if data[:4] != CHECKPOINT_MAGIC:
        raise ContainerError(
            f"Bad magic {bytes(data[:4])!r}, expected {CHECKPOINT_MAGIC!r}", offset=0
        )

    offset = 4
    try:
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        state: Dict[str, Tensor] = {}
        for _ in range(count):
            (name_length,) = struct.unpack_from("<H", data, offset)
            offset += 2
            raw_name = data[offset : offset + name_length]
            if len(raw_name) != name_length:
                raise ContainerError("Truncated parameter name", offset=offset)
            try:
                name = raw_name.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ContainerError(
                    f"Parameter name is not valid UTF-8: {e.reason}", offset=offset
                )
            offset += name_length
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * size > len(data):
                raise ContainerError(f"Truncated data for parameter {name}", offset=offset)
            values = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
            state[name] = values.reshape(shape).copy()
            offset += 8 * size
    except struct.error as e:
        raise ContainerError(f"Truncated checkpoint: {e}", offset=offset)

    if offset != len(data):
        raise ContainerError(f"{len(data) - offset} trailing bytes in checkpoint", offset=offset)
    return state


def save_checkpoint(params: ParamSet, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(checkpoint_bytes(params.state_dict()))
    logger.info(f"Saved checkpoint with {len(params)} parameters to {path}")


def load_checkpoint(path: str | Path) -> Dict[str, Tensor]:
    try:
        return parse_checkpoint(Path(path).read_bytes())
    except FileNotFoundError:
        raise DataError(f"Checkpoint not found: {path}")
