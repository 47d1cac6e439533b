"""PSNR / SSIM and per-plane-family averaging.

SSIM uses the standard windowed form: 11x11 Gaussian window (sigma 1.5,
truncate 3.5), K1 = 0.01, K2 = 0.03, population covariances, edge strips of
half a window cropped before averaging.  The per-plane report averages the
2D metric over every plane of each axis family, since reconstruction
quality differs between the slice plane and the stacking direction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError
from .volume import AXES, as_array

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_PAD = int(_SSIM_TRUNCATE * _SSIM_SIGMA + 0.5)  # 11x11 window


def psnr(x, ref, data_range=None):
    """10 log10(range^2 / MSE); +inf for identical inputs."""
    x = np.asarray(as_array(x), dtype=np.float64)
    ref = np.asarray(as_array(ref), dtype=np.float64)
    if x.shape != ref.shape:
        raise ConfigurationError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if data_range is None:
        data_range = float(ref.max())
    if data_range <= 0:
        raise ConfigurationError(f"data_range must be positive, got {data_range}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / mse))


def ssim(x, ref, data_range=None):
    """Mean structural similarity of two 2D planes."""
    x = np.asarray(as_array(x), dtype=np.float64)
    ref = np.asarray(as_array(ref), dtype=np.float64)
    if x.shape != ref.shape:
        raise ConfigurationError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if x.ndim != 2:
        raise ConfigurationError(f"ssim expects 2D planes, got shape {x.shape}")
    win = 2 * _SSIM_PAD + 1
    if min(x.shape) < win:
        raise ConfigurationError(
            f"plane {x.shape} smaller than the {win}x{win} SSIM window"
        )
    if data_range is None:
        data_range = float(ref.max())
    if data_range <= 0:
        raise ConfigurationError(f"data_range must be positive, got {data_range}")

    filt = lambda a: gaussian_filter(a, sigma=_SSIM_SIGMA, truncate=_SSIM_TRUNCATE)
    ux = filt(x)
    uy = filt(ref)
    uxx = filt(x * x)
    uyy = filt(ref * ref)
    uxy = filt(x * ref)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux**2 + uy**2 + c1) * (vx + vy + c2))
    crop = s[_SSIM_PAD:-_SSIM_PAD, _SSIM_PAD:-_SSIM_PAD]
    return float(crop.mean())


@dataclass(frozen=True)
class MetricsReport:
    """Per-plane-family PSNR/SSIM averages plus global PSNR."""

    psnr_axial: float
    psnr_coronal: float
    psnr_sagittal: float
    ssim_axial: float
    ssim_coronal: float
    ssim_sagittal: float
    psnr_global: float

    def to_dict(self):
        def enc(v):
            return "inf" if np.isinf(v) else float(v)

        return {
            "psnr": {
                "axial": enc(self.psnr_axial),
                "coronal": enc(self.psnr_coronal),
                "sagittal": enc(self.psnr_sagittal),
                "global": enc(self.psnr_global),
            },
            "ssim": {
                "axial": enc(self.ssim_axial),
                "coronal": enc(self.ssim_coronal),
                "sagittal": enc(self.ssim_sagittal),
            },
        }


def _family_means(x, ref, axis, data_range):
    axis_index = {"axial": 0, "coronal": 1, "sagittal": 2}[axis]
    n = x.shape[axis_index]
    take = lambda a, j: (a[j] if axis_index == 0 else a[:, j, :] if axis_index == 1 else a[:, :, j])
    psnrs = np.empty(n)
    ssims = np.empty(n)
    for j in range(n):
        psnrs[j] = psnr(take(x, j), take(ref, j), data_range)
        ssims[j] = ssim(take(x, j), take(ref, j), data_range)
    # planes reproduced exactly (typically empty boundary slices) would drag
    # the family average to +inf; keep inf only when every plane is identical
    finite = np.isfinite(psnrs)
    mean_psnr = float(np.mean(psnrs[finite])) if finite.any() else float("inf")
    return mean_psnr, float(np.mean(ssims))


def per_plane_metrics(x, ref):
    """MetricsReport with the 2D metrics averaged over each plane family.

    The data range is fixed to the reference volume's maximum so numbers are
    comparable across plane families and runs.
    """
    x = np.asarray(as_array(x), dtype=np.float64)
    ref = np.asarray(as_array(ref), dtype=np.float64)
    if x.shape != ref.shape:
        raise ConfigurationError(f"shape mismatch: {x.shape} vs {ref.shape}")
    data_range = float(ref.max())
    values = {}
    for axis in AXES:
        values[axis] = _family_means(x, ref, axis, data_range)
    return MetricsReport(
        psnr_axial=values["axial"][0],
        psnr_coronal=values["coronal"][0],
        psnr_sagittal=values["sagittal"][0],
        ssim_axial=values["axial"][1],
        ssim_coronal=values["coronal"][1],
        ssim_sagittal=values["sagittal"][1],
        psnr_global=psnr(x, ref, data_range),
    )
