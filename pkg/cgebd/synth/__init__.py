from cgebd.synth.generator import (
    EventKind,
    SynthDefaults,
    SynthEvent,
    SynthSpec,
    corpus_specs,
    generate_video,
    video_seed,
)

__all__ = [
    "EventKind",
    "SynthDefaults",
    "SynthEvent",
    "SynthSpec",
    "corpus_specs",
    "generate_video",
    "video_seed",
]
