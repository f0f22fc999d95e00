"""Encoding by random hitting, decoding by random tessellation."""
from .objects import (
    DEFAULT_RESOLUTION,
    Disk,
    GeometricObject,
    PolygonUnion,
    Union,
    fidelity,
    object_from_json,
)
from .stopping import CodecRun, StoppingReport, run_codec, stopping_check
from .tessellation import HitSet, Tessellation, decode, encode, tessellate
from .walk import WalkResult, geodesic_walk

__all__ = [
    "DEFAULT_RESOLUTION",
    "CodecRun",
    "Disk",
    "GeometricObject",
    "HitSet",
    "PolygonUnion",
    "StoppingReport",
    "Tessellation",
    "Union",
    "WalkResult",
    "decode",
    "encode",
    "fidelity",
    "geodesic_walk",
    "object_from_json",
    "run_codec",
    "stopping_check",
    "tessellate",
]
