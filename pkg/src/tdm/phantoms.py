"""Analytic test phantoms: 3D Shepp-Logan, random spheres, ellipsoid overlays.

All generators rasterize closed-form membership tests on voxel-center grids
and are deterministic per seed.  Intensities live in [0, 1].
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .volume import Volume3

# Canonical 10-ellipsoid head phantom: (value, a, b, c, x0, y0, z0, phi_deg)
# with semi-axes (a, b, c) along (x, y, z) and phi a rotation about z.
SHEPP_LOGAN_ELLIPSOIDS = (
    (1.00, 0.6900, 0.9200, 0.810, 0.00, 0.0000, 0.00, 0.0),
    (-0.80, 0.6624, 0.8740, 0.780, 0.00, -0.0184, 0.00, 0.0),
    (-0.20, 0.1100, 0.3100, 0.220, 0.22, 0.0000, 0.00, -18.0),
    (-0.20, 0.1600, 0.4100, 0.280, -0.22, 0.0000, 0.00, 18.0),
    (0.10, 0.2100, 0.2500, 0.410, 0.00, 0.3500, -0.15, 0.0),
    (0.10, 0.0460, 0.0460, 0.050, 0.00, 0.1000, 0.25, 0.0),
    (0.10, 0.0460, 0.0460, 0.050, 0.00, -0.1000, 0.25, 0.0),
    (0.10, 0.0460, 0.0230, 0.050, -0.08, -0.6050, 0.00, 0.0),
    (0.10, 0.0230, 0.0230, 0.020, 0.00, -0.6050, 0.00, 0.0),
    (0.10, 0.0230, 0.0460, 0.020, 0.06, -0.6050, 0.00, 0.0),
)


def _voxel_centers(n):
    """n symmetric voxel-center coordinates spanning (-1, 1)."""
    return (np.arange(n) + 0.5 - n / 2.0) * (2.0 / n)


def _grid(n):
    c = _voxel_centers(n)
    return np.meshgrid(c, c, c, indexing="ij")  # (z, y, x)


def shepp_logan_3d(n):
    """Rasterize the canonical 10-ellipsoid head phantom on an n^3 grid."""
    if n < 8:
        raise ConfigurationError(f"phantom size must be >= 8, got {n}")
    zz, yy, xx = _grid(n)
    vol = np.zeros((n, n, n))
    for value, a, b, c, x0, y0, z0, phi_deg in SHEPP_LOGAN_ELLIPSOIDS:
        phi = np.deg2rad(phi_deg)
        xr = (xx - x0) * np.cos(phi) + (yy - y0) * np.sin(phi)
        yr = -(xx - x0) * np.sin(phi) + (yy - y0) * np.cos(phi)
        inside = (xr / a) ** 2 + (yr / b) ** 2 + ((zz - z0) / c) ** 2 <= 1.0
        vol[inside] += value
    return Volume3(np.clip(vol, 0.0, 1.0))


def sphere_specs(count, seed, radius_range=(0.08, 0.22), intensity_range=(0.35, 1.0)):
    """Reproducible list of (cz, cy, cx, radius, intensity) in grid units."""
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(count):
        center = rng.uniform(-0.72, 0.72, size=3)
        radius = rng.uniform(*radius_range)
        intensity = rng.uniform(*intensity_range)
        specs.append((center[0], center[1], center[2], radius, intensity))
    return specs


def random_spheres(n, count, seed, radius_range=(0.08, 0.22), intensity_range=(0.35, 1.0)):
    """Spheres painted in draw order (later spheres overwrite earlier ones)."""
    if n < 8:
        raise ConfigurationError(f"phantom size must be >= 8, got {n}")
    if count < 0:
        raise ConfigurationError(f"count must be >= 0, got {count}")
    zz, yy, xx = _grid(n)
    vol = np.zeros((n, n, n))
    for cz, cy, cx, radius, intensity in sphere_specs(count, seed, radius_range, intensity_range):
        inside = (zz - cz) ** 2 + (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
        vol[inside] = intensity
    return Volume3(np.clip(vol, 0.0, 1.0))


def ellipse_overlay(base, center=(0.0, 0.0, 0.0), axes=(0.3, 0.45, 0.25), phi_deg=0.0,
                    intensity=0.9):
    """Overlay one bright ellipsoid on an existing volume (out-of-distribution probe)."""
    vol = base.data.copy()
    n_z, n_y, n_x = vol.shape
    cz = _voxel_centers(n_z)[:, None, None]
    cy = _voxel_centers(n_y)[None, :, None]
    cx = _voxel_centers(n_x)[None, None, :]
    az, ay, ax = axes
    if min(axes) <= 0:
        raise ConfigurationError("ellipsoid axes must be positive")
    phi = np.deg2rad(phi_deg)
    xr = (cx - center[2]) * np.cos(phi) + (cy - center[1]) * np.sin(phi)
    yr = -(cx - center[2]) * np.sin(phi) + (cy - center[1]) * np.cos(phi)
    inside = (xr / ax) ** 2 + (yr / ay) ** 2 + ((cz - center[0]) / az) ** 2 <= 1.0
    vol[inside] = intensity
    return Volume3(np.clip(vol, 0.0, 1.0), base.spacing)


PHANTOM_KINDS = ("shepp-logan", "random-spheres", "ellipse-overlay")


@dataclass(frozen=True)
class PhantomSpec:
    """Declarative phantom description used by the CLI."""

    kind: str
    size: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise ConfigurationError(f"kind must be one of {PHANTOM_KINDS}, got {self.kind!r}")
        if self.size < 8:
            raise ConfigurationError(f"size must be >= 8, got {self.size}")

    def build(self):
        if self.kind == "shepp-logan":
            return shepp_logan_3d(self.size)
        if self.kind == "random-spheres":
            count = int(self.params.get("count", 12))
            return random_spheres(self.size, count, self.seed)
        base = shepp_logan_3d(self.size)
        return ellipse_overlay(base, **self.params)
