"""Masked single-coil Fourier measurement for compressed-sensing MRI.

Per-slice centered orthonormal 2D DFT with a shared (ny, nx) sampling mask.
Images are treated as real-valued, so the adjoint returns the real part and
the exact data-consistency projection replaces coefficients on the
Hermitian-symmetrized mask (a real image pins the mirrored coefficient of
every measured one).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .linops import LinearOperator
from .volume import ComplexVolume3, Volume3, as_array


@dataclass(eq=False)
class SamplingMask:
    """Boolean keep/drop per k-space coefficient, applied to every slice."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ConfigurationError(f"mask must be 2D (ny, nx), got shape {self.mask.shape}")
        if not self.mask.any():
            raise ConfigurationError("mask keeps no coefficients")

    @classmethod
    def full(cls, ny, nx):
        return cls(np.ones((ny, nx), dtype=bool))

    @property
    def shape(self):
        return self.mask.shape

    @property
    def n_kept(self):
        return int(self.mask.sum())


def centered_fft2(x):
    """Orthonormal 2D DFT over the last two axes with DC moved to the center."""
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1), norm="ortho"), axes=(-2, -1))


def centered_ifft2(k):
    return np.fft.ifft2(np.fft.ifftshift(k, axes=(-2, -1)), axes=(-2, -1), norm="ortho")


def conj_mirror(k):
    """k[f] -> conj(k[-f]) in the centered layout; fixes real-image symmetry."""
    u = np.fft.ifftshift(k, axes=(-2, -1))
    u = u[..., ::-1, ::-1]
    u = np.roll(np.roll(u, 1, axis=-1), 1, axis=-2)
    return np.conj(np.fft.fftshift(u, axes=(-2, -1)))


def mirror_mask(mask):
    """Mask of locations whose mirror coefficient is kept."""
    m = np.fft.ifftshift(mask)
    m = np.roll(np.roll(m[::-1, ::-1], 1, axis=-1), 1, axis=-2)
    return np.fft.fftshift(m)


class MaskedFourierOperator(LinearOperator):
    """Per-slice masked centered orthonormal DFT on (nz, ny, nx) volumes."""

    def __init__(self, mask, nz):
        if isinstance(mask, np.ndarray):
            mask = SamplingMask(mask)
        self.mask = mask
        ny, nx = mask.shape
        self.domain_shape = (nz, ny, nx)
        self.range_shape = (nz, ny, nx)

    def apply(self, x):
        x = self._check_domain(np.asarray(x, dtype=np.float64))
        return centered_fft2(x) * self.mask.mask

    def adjoint(self, y):
        y = self._check_range(np.asarray(y))
        return centered_ifft2(y * self.mask.mask).real

    def project_measurements(self, x, y):
        """Exact projection of a real volume onto {x : masked F x = y}.

        Replacement happens on the symmetrized mask with Hermitian-completed
        measurements, so the result is real (up to round-off), idempotent,
        and reproduces y exactly on the measured set.
        """
        x = self._check_domain(np.asarray(x, dtype=np.float64))
        y = self._check_range(np.asarray(y))
        m = self.mask.mask
        k = centered_fft2(x)
        y_full = np.where(m, y, conj_mirror(y * m))
        k = np.where(m | mirror_mask(m), y_full, k)
        return centered_ifft2(k).real


def fourier_forward(vol, mask):
    """Per-slice centered orthonormal DFT, zeroed where the mask drops lines."""
    arr = as_array(vol)
    if mask.shape != arr.shape[1:]:
        raise ConfigurationError(
            f"mask shape {mask.shape} does not match slice shape {arr.shape[1:]}"
        )
    op = MaskedFourierOperator(mask, arr.shape[0])
    return ComplexVolume3(op.apply(arr), getattr(vol, "spacing", (1.0, 1.0, 1.0)))


def fourier_adjoint(ksp, mask):
    """Zero unmeasured coefficients, inverse DFT per slice, take the real part."""
    arr = as_array(ksp)
    op = MaskedFourierOperator(mask, arr.shape[0])
    return Volume3(op.adjoint(arr), getattr(ksp, "spacing", (1.0, 1.0, 1.0)))
