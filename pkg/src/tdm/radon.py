"""Parallel-beam Radon transform, matched backprojector, ART, and FBP.

The projector is ray-driven (Joseph's method): each ray steps along its
major axis, one sample per row/column, with linear interpolation transverse
to the ray and a path-length weight per step.  Weights are assembled once
per (geometry, grid) into a sparse matrix, so the adjoint is the exact
transpose by construction and slices of a volume are projected with a
single sparse matmul.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .linops import LinearOperator
from .volume import Volume3, as_array


@dataclass(frozen=True, eq=False)
class ProjectionGeometry:
    """View angles (radians, strictly increasing in [0, pi)) and detector layout."""

    angles: np.ndarray
    n_det: int
    det_spacing: float = 1.0

    def __post_init__(self):
        angles = np.atleast_1d(np.asarray(self.angles, dtype=np.float64))
        object.__setattr__(self, "angles", angles)
        if angles.size == 0:
            raise ConfigurationError("angles must be non-empty")
        if np.any(angles < 0.0) or np.any(angles >= np.pi):
            raise ConfigurationError("angles must lie in [0, pi)")
        if angles.size > 1 and np.any(np.diff(angles) <= 0):
            raise ConfigurationError("angles must be strictly increasing")
        if self.n_det < 1:
            raise ConfigurationError(f"n_det must be >= 1, got {self.n_det}")
        if self.det_spacing <= 0:
            raise ConfigurationError("det_spacing must be positive")

    @property
    def n_views(self):
        return int(self.angles.size)


def default_n_det(ny, nx):
    """Detector bins covering the full image diagonal at unit spacing."""
    return math.ceil(math.sqrt(2.0) * max(ny, nx))


@dataclass(eq=False)
class Sinogram3:
    """Stacked per-slice sinograms, shape (nz, n_views, n_det)."""

    data: np.ndarray
    geometry: ProjectionGeometry

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ConfigurationError(f"sinogram data must be 3D, got shape {self.data.shape}")
        if self.data.shape[1] != self.geometry.n_views or self.data.shape[2] != self.geometry.n_det:
            raise ConfigurationError(
                f"sinogram shape {self.data.shape} does not match geometry "
                f"({self.geometry.n_views} views, {self.geometry.n_det} bins)"
            )
        if not np.isfinite(self.data).all():
            raise ConfigurationError("sinogram contains non-finite entries")

    @property
    def shape(self):
        return self.data.shape


def _joseph_matrix(geom, grid_shape, spacing):
    """Sparse (n_views*n_det, ny*nx) system matrix for one slice."""
    ny, nx = grid_shape
    dy, dx = spacing
    n_det = geom.n_det
    t = (np.arange(n_det) - (n_det - 1) / 2.0) * geom.det_spacing
    rows, cols, vals = [], [], []
    for v, theta in enumerate(geom.angles):
        c, s = math.cos(theta), math.sin(theta)
        if abs(c) >= abs(s):
            # march over image rows; ray satisfies x*cos + y*sin = t
            yy = (np.arange(ny) - (ny - 1) / 2.0) * dy
            fx = ((t[:, None] - yy[None, :] * s) / c) / dx + (nx - 1) / 2.0
            i0 = np.floor(fx).astype(np.int64)
            frac = fx - i0
            w = dy / abs(c)
            along = np.arange(ny)[None, :] * nx
            for offset, weight in ((0, (1.0 - frac) * w), (1, frac * w)):
                idx = i0 + offset
                ok = (idx >= 0) & (idx < nx) & (weight != 0.0)
                det_i, step_i = np.nonzero(ok)
                rows.append(v * n_det + det_i)
                cols.append(along[0, step_i] + idx[ok])
                vals.append(weight[ok])
        else:
            xx = (np.arange(nx) - (nx - 1) / 2.0) * dx
            fy = ((t[:, None] - xx[None, :] * c) / s) / dy + (ny - 1) / 2.0
            i0 = np.floor(fy).astype(np.int64)
            frac = fy - i0
            w = dx / abs(s)
            for offset, weight in ((0, (1.0 - frac) * w), (1, frac * w)):
                idx = i0 + offset
                ok = (idx >= 0) & (idx < ny) & (weight != 0.0)
                det_i, step_i = np.nonzero(ok)
                rows.append(v * n_det + det_i)
                cols.append(idx[ok] * nx + step_i)
                vals.append(weight[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    m = geom.n_views * n_det
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, ny * nx)).tocsr()


class RadonTransform(LinearOperator):
    """Slice-wise 2D parallel-beam projector on (nz, ny, nx) volumes."""

    def __init__(self, geom, vol_shape, spacing=(1.0, 1.0)):
        if len(vol_shape) != 3:
            raise ConfigurationError(f"vol_shape must be (nz, ny, nx), got {vol_shape}")
        self.geom = geom
        nz, ny, nx = vol_shape
        self.domain_shape = (nz, ny, nx)
        self.range_shape = (nz, geom.n_views, geom.n_det)
        self.spacing = tuple(float(s) for s in spacing)
        self._W = _joseph_matrix(geom, (ny, nx), self.spacing)
        self._WT = sp.csr_matrix(self._W.T)
        self._row_sq = None

    def apply(self, x):
        x = self._check_domain(np.asarray(x, dtype=np.float64))
        nz = x.shape[0]
        sino = (self._W @ x.reshape(nz, -1).T).T
        return np.ascontiguousarray(sino.reshape(self.range_shape))

    def adjoint(self, y):
        y = self._check_range(np.asarray(y, dtype=np.float64))
        nz = y.shape[0]
        vol = (self._WT @ y.reshape(nz, -1).T).T
        return np.ascontiguousarray(vol.reshape(self.domain_shape))

    def _row_norms(self):
        if self._row_sq is None:
            sq = np.asarray(self._W.multiply(self._W).sum(axis=1)).ravel()
            inv = np.zeros_like(sq)
            nonzero = sq > 0
            inv[nonzero] = 1.0 / sq[nonzero]
            self._row_sq = inv
        return self._row_sq

    def kaczmarz_project(self, x, y, n_sweeps=1, relax=0.3):
        """View-major block-Kaczmarz (ART) passes toward Ax = y."""
        x = self._check_domain(np.asarray(x, dtype=np.float64))
        y = self._check_range(np.asarray(y, dtype=np.float64))
        nz = x.shape[0]
        n_det = self.geom.n_det
        inv_sq = self._row_norms()
        X = x.reshape(nz, -1).copy()
        Y = y.reshape(nz, -1)
        for _ in range(n_sweeps):
            for v in range(self.geom.n_views):
                lo, hi = v * n_det, (v + 1) * n_det
                Wv = self._W[lo:hi]
                resid = Y[:, lo:hi] - (Wv @ X.T).T
                X += relax * (Wv.T @ (resid * inv_sq[lo:hi]).T).T
        return X.reshape(self.domain_shape)


def radon_forward(vol, geom):
    """Slice-wise parallel-beam forward projection of a Volume3."""
    arr = as_array(vol)
    spacing = getattr(vol, "spacing", (1.0, 1.0, 1.0))
    op = RadonTransform(geom, arr.shape, spacing=spacing[1:])
    return Sinogram3(op.apply(arr), geom)


def radon_adjoint(sino, geom=None, vol_shape=None, spacing=(1.0, 1.0, 1.0)):
    """Exact transpose of radon_forward (unfiltered backprojection)."""
    geom = geom or sino.geometry
    arr = as_array(sino)
    if vol_shape is None:
        n = _default_grid_side(geom)
        vol_shape = (arr.shape[0], n, n)
    op = RadonTransform(geom, vol_shape, spacing=spacing[1:])
    return Volume3(op.adjoint(arr), spacing)


def _default_grid_side(geom):
    """Largest square grid whose diagonal the detector row covers."""
    return max(1, math.floor(geom.n_det / math.sqrt(2.0)))


FILTERS = ("ramp", "ram-lak-windowed", "none")


def _filter_sinogram(sino2, det_spacing, kind):
    n_det = sino2.shape[-1]
    npad = 1 << max(6, (2 * n_det - 1).bit_length())
    freqs = np.fft.fftfreq(npad, d=det_spacing)
    filt = np.abs(freqs)
    if kind == "ram-lak-windowed":
        # Hann-tapered ramp: soften the high frequencies against noise
        filt = filt * (0.5 + 0.5 * np.cos(np.pi * freqs / np.abs(freqs).max()))
    padded = np.zeros(sino2.shape[:-1] + (npad,), dtype=np.float64)
    padded[..., :n_det] = sino2
    spectrum = np.fft.fft(padded, axis=-1) * filt
    return np.fft.ifft(spectrum, axis=-1).real[..., :n_det]


def fbp(sino, geom=None, vol_shape=None, filter="ramp", spacing=(1.0, 1.0, 1.0)):
    """Filtered backprojection: ramp-filter detector rows, backproject, scale by pi/n_views."""
    geom = geom or sino.geometry
    arr = as_array(sino)
    if filter not in FILTERS:
        raise ConfigurationError(f"filter must be one of {FILTERS}, got {filter!r}")
    if vol_shape is None:
        n = _default_grid_side(geom)
        vol_shape = (arr.shape[0], n, n)
    if filter != "none":
        arr = _filter_sinogram(arr, geom.det_spacing, filter)
    op = RadonTransform(geom, vol_shape, spacing=spacing[1:])
    recon = op.adjoint(arr) * (np.pi / geom.n_views)
    return Volume3(recon, spacing)
