from cgebd.codec.accumulation import (
    AccumulatedPFrame,
    accumulate_gop,
    read_accumulated,
    reconstruct_from_accumulated,
    write_accumulated,
)
from cgebd.codec.container import read_container, write_container
from cgebd.codec.decoder import decode_sequential, densify_motion_field
from cgebd.codec.encoder import encode_video
from cgebd.codec.models import CodecParams, CompressedVideo, Gop, PFrame, RawVideo

__all__ = [
    "AccumulatedPFrame",
    "CodecParams",
    "CompressedVideo",
    "Gop",
    "PFrame",
    "RawVideo",
    "accumulate_gop",
    "decode_sequential",
    "densify_motion_field",
    "encode_video",
    "read_accumulated",
    "read_container",
    "reconstruct_from_accumulated",
    "write_accumulated",
    "write_container",
]
