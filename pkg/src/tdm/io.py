"""Volume file format (TDV1) and PNG slice export.

Layout: magic ``TDV1`` | u32 LE (nz, ny, nx) | f64 LE (dz, dy, dx) |
nz*ny*nx f32 LE voxels, z-major.  Values are stored single precision and
widened to float64 on read.
"""

import os
import struct

import numpy as np
from PIL import Image

from .errors import ConfigurationError, VolumeFormatError
from .volume import Volume3

VOLUME_MAGIC = b"TDV1"
_HEADER = struct.Struct("<4s3I3d")


def write_raw(vol, path):
    """Write a Volume3 to the TDV1 container."""
    nz, ny, nx = vol.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(VOLUME_MAGIC, nz, ny, nx, *vol.spacing))
        fh.write(np.ascontiguousarray(vol.data, dtype="<f4").tobytes())


def read_raw(path):
    """Read a TDV1 volume, validating header fields and payload size."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise VolumeFormatError(
            f"file shorter than the {_HEADER.size}-byte header", offset=len(raw)
        )
    magic, nz, ny, nx, dz, dy, dx = _HEADER.unpack_from(raw, 0)
    if magic != VOLUME_MAGIC:
        raise VolumeFormatError(
            f"bad magic {magic!r}, expected {VOLUME_MAGIC!r}", offset=0, field="magic"
        )
    if min(nz, ny, nx) < 1:
        raise VolumeFormatError(
            f"non-positive dimensions ({nz}, {ny}, {nx})", offset=4, field="shape"
        )
    spacing = (dz, dy, dx)
    if not all(np.isfinite(spacing)) or min(spacing) <= 0:
        raise VolumeFormatError(
            f"invalid spacing {spacing}", offset=16, field="spacing"
        )
    expected = nz * ny * nx * 4
    payload = raw[_HEADER.size :]
    if len(payload) != expected:
        raise VolumeFormatError(
            f"payload holds {len(payload)} bytes, expected {expected}",
            offset=_HEADER.size,
            field="payload",
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(nz, ny, nx).astype(np.float64)
    if not np.isfinite(data).all():
        raise VolumeFormatError("payload contains non-finite voxels", offset=_HEADER.size)
    return Volume3(data, spacing)


def export_png_slices(vol, out_dir, window=(0.0, 1.0), axis="axial", stride=1):
    """Write normalized 8-bit PNGs of the planes along one axis.

    Values are windowed to [window[0], window[1]] before quantization.
    Returns the list of written paths.
    """
    lo, hi = window
    if hi <= lo:
        raise ConfigurationError(f"window must satisfy lo < hi, got {window}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k, plane in enumerate(vol.plane_views(axis)):
        if k % stride:
            continue
        scaled = np.clip((plane - lo) / (hi - lo), 0.0, 1.0)
        img = Image.fromarray((scaled * 255.0 + 0.5).astype(np.uint8))
        path = os.path.join(out_dir, f"{axis}_{k:04d}.png")
        img.save(path)
        paths.append(path)
    return paths
