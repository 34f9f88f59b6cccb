"""Feature sequence file IO: CSV (one frame per row) and VLF1 binary.

VLF1 layout: 16-byte header (magic "VLF1", uint32 frame count, uint32
dimension, 4 reserved zero bytes), then float32 little-endian frames in
row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"VLF1"
HEADER = struct.Struct("<4sII4x")


class FeatureFormatError(ValueError):
    pass


def write_features_csv(path, frames):
    frames = np.asarray(frames, dtype=np.float64)
    np.savetxt(path, frames, delimiter=",", fmt="%.10g")


def read_features_csv(path):
    frames = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if frames.size == 0:
        raise FeatureFormatError(f"{path}: empty feature file")
    return frames


def write_features_vlf(path, frames):
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise FeatureFormatError("frames must be a 2-d array")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, frames.shape[0], frames.shape[1]))
        fh.write(frames.tobytes())


def read_features_vlf(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise FeatureFormatError(f"{path}: truncated header")
        magic, count, dim = HEADER.unpack(head)
        if magic != MAGIC:
            raise FeatureFormatError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != count * dim:
        raise FeatureFormatError(f"{path}: expected {count * dim} values, found {data.size}")
    return data.reshape(count, dim).astype(np.float64)
