"""3D volume containers and plane iteration.

Volumes are stored z-major: ``data[k]`` is the k-th axial (ny, nx) slice,
so slice extraction during slice-wise denoising is zero-copy.  Scalars are
float64 internally; file I/O (see :mod:`tdm.io`) converts to float32.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

AXES = ("axial", "coronal", "sagittal")


@dataclass(frozen=True)
class GridGeometry:
    """Grid dimensions and physical voxel spacing (dz, dy, dx)."""

    nz: int
    ny: int
    nx: int
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("nz", "ny", "nx"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ConfigurationError(f"spacing must be 3 positive floats, got {self.spacing!r}")

    @property
    def shape(self):
        return (self.nz, self.ny, self.nx)


def _validated(data, dtype, name):
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr.ndim != 3:
        raise ConfigurationError(f"{name} data must be 3D (nz, ny, nx), got shape {arr.shape}")
    if arr.size == 0:
        raise ConfigurationError(f"{name} must have at least one voxel")
    if not np.isfinite(arr).all():
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


class Volume3:
    """Real-valued 3D image of shape (nz, ny, nx)."""

    __slots__ = ("data", "spacing")

    def __init__(self, data, spacing=(1.0, 1.0, 1.0)):
        self.data = _validated(data, np.float64, "Volume3")
        self.spacing = tuple(float(s) for s in spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ConfigurationError(f"spacing must be 3 positive floats, got {spacing!r}")

    @classmethod
    def zeros(cls, shape, spacing=(1.0, 1.0, 1.0)):
        return cls(np.zeros(shape, dtype=np.float64), spacing)

    @property
    def shape(self):
        return self.data.shape

    @property
    def nz(self):
        return self.data.shape[0]

    @property
    def ny(self):
        return self.data.shape[1]

    @property
    def nx(self):
        return self.data.shape[2]

    @property
    def geometry(self):
        return GridGeometry(self.nz, self.ny, self.nx, self.spacing)

    def slice_view(self, k):
        """k-th axial plane as a writable view (writes go through to data)."""
        if not 0 <= k < self.nz:
            raise IndexError(f"slice index {k} out of range for nz={self.nz}")
        return self.data[k]

    def plane_views(self, axis):
        """Iterate 2D plane views along an anatomical axis.

        axial yields nz (ny, nx) planes, coronal ny (nz, nx) planes,
        sagittal nx (nz, ny) planes.
        """
        if axis == "axial":
            return (self.data[k] for k in range(self.nz))
        if axis == "coronal":
            return (self.data[:, j, :] for j in range(self.ny))
        if axis == "sagittal":
            return (self.data[:, :, i] for i in range(self.nx))
        raise ConfigurationError(f"axis must be one of {AXES}, got {axis!r}")

    def copy(self):
        return Volume3(self.data.copy(), self.spacing)

    def __repr__(self):
        return f"Volume3(shape={self.shape}, spacing={self.spacing})"


class ComplexVolume3:
    """Complex-valued 3D grid (e.g. stacked k-space), same layout as Volume3."""

    __slots__ = ("data", "spacing")

    def __init__(self, data, spacing=(1.0, 1.0, 1.0)):
        self.data = _validated(data, np.complex128, "ComplexVolume3")
        self.spacing = tuple(float(s) for s in spacing)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"ComplexVolume3(shape={self.shape})"


def as_array(vol):
    """Accept a Volume3/ComplexVolume3/Sinogram3 or a bare ndarray."""
    return vol.data if hasattr(vol, "data") else np.asarray(vol)
