"""Measurement pattern constructors: CT view sets and MRI line masks."""

import math

import numpy as np

from .errors import ConfigurationError
from .fourier import SamplingMask
from .radon import ProjectionGeometry


def sparse_view_geometry(n_views, n_det, det_spacing=1.0):
    """n_views angles uniformly spread over [0, 180) degrees."""
    if n_views < 1:
        raise ConfigurationError(f"n_views must be >= 1, got {n_views}")
    angles = np.linspace(0.0, np.pi, n_views, endpoint=False)
    return ProjectionGeometry(angles, n_det, det_spacing)


def limited_angle_geometry(start_deg, end_deg, n_views, n_det, det_spacing=1.0):
    """n_views angles uniformly spread over the measured wedge [start, end)."""
    if not 0 <= start_deg < end_deg <= 180:
        raise ConfigurationError(
            f"need 0 <= start < end <= 180 degrees, got [{start_deg}, {end_deg}]"
        )
    if n_views < 1:
        raise ConfigurationError(f"n_views must be >= 1, got {n_views}")
    angles = np.deg2rad(np.linspace(start_deg, end_deg, n_views, endpoint=False))
    return ProjectionGeometry(angles, n_det, det_spacing)


def uniform1d_mask(ny, nx, accel, acs_frac=0.15, seed=0):
    """1D phase-encode line mask: centered ACS block plus uniform strides.

    Keeps ceil(acs_frac * ny) central lines around the DC row, then strides
    through the remaining rows so the total kept equals round(ny / accel).
    Line placement is deterministic (stride phase 0); ``seed`` is accepted
    for interface stability but unused.
    """
    del seed
    if ny < 1 or nx < 1:
        raise ConfigurationError("mask dimensions must be positive")
    if accel < 1:
        raise ConfigurationError(f"accel must be >= 1, got {accel}")
    if not 0 <= acs_frac < 1:
        raise ConfigurationError(f"acs_frac must be in [0, 1), got {acs_frac}")
    n_acs = math.ceil(acs_frac * ny)
    target = round(ny / accel)
    if n_acs > target:
        raise ConfigurationError(
            f"{n_acs} ACS lines exceed the {target}-line budget at accel={accel}"
        )
    rows = np.zeros(ny, dtype=bool)
    start = ny // 2 - n_acs // 2
    rows[start : start + n_acs] = True
    extra = target - n_acs
    if extra > 0:
        candidates = np.flatnonzero(~rows)
        stride = len(candidates) / extra
        picks = candidates[(np.arange(extra) * stride).astype(int)]
        rows[picks] = True
    mask = np.repeat(rows[:, None], nx, axis=1)
    return SamplingMask(mask)
