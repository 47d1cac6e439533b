"""Matrix-free linear operators with exact numerical adjoints.

Operators act on bare float64 arrays shaped like volumes (nz, ny, nx); the
typed wrappers in :mod:`tdm.radon` / :mod:`tdm.fourier` sit on top.  Every
forward/adjoint pair uses identical weights so the transpose pairing
``<Ax, y> == <x, A^T y>`` holds to round-off, which conjugate gradients on
the normal equations relies on.
"""

import abc

import numpy as np

from .errors import ConfigurationError


def real_vdot(a, b):
    """Real inner product; complex arrays are paired as Re(a^H b)."""
    return float(np.vdot(a, b).real)


class LinearOperator(abc.ABC):
    """A -> measurement with exact transpose, on bare arrays."""

    domain_shape = None
    range_shape = None

    @abc.abstractmethod
    def apply(self, x):
        ...

    @abc.abstractmethod
    def adjoint(self, y):
        ...

    def normal(self, x):
        """A^T A x."""
        return self.adjoint(self.apply(x))

    def __call__(self, x):
        return self.apply(x)

    def _check_domain(self, x):
        x = np.asarray(x)
        if x.shape != tuple(self.domain_shape):
            raise ConfigurationError(
                f"{type(self).__name__}: expected domain shape {tuple(self.domain_shape)}, "
                f"got {x.shape}"
            )
        return x

    def _check_range(self, y):
        y = np.asarray(y)
        if y.shape != tuple(self.range_shape):
            raise ConfigurationError(
                f"{type(self).__name__}: expected range shape {tuple(self.range_shape)}, "
                f"got {y.shape}"
            )
        return y


def adjoint_mismatch(op, rng, n_trials=20):
    """Max relative transpose-pairing error |<Ax,y> - <x,A^Ty>| / (|Ax||y|)."""
    worst = 0.0
    for _ in range(n_trials):
        x = rng.standard_normal(op.domain_shape)
        Ax = op.apply(x)
        if np.iscomplexobj(Ax):
            y = rng.standard_normal(Ax.shape) + 1j * rng.standard_normal(Ax.shape)
        else:
            y = rng.standard_normal(Ax.shape)
        lhs = real_vdot(Ax, y)
        rhs = real_vdot(x, op.adjoint(y))
        denom = np.linalg.norm(Ax.ravel()) * np.linalg.norm(y.ravel())
        if denom == 0:
            continue
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


class IdentityOperator(LinearOperator):
    def __init__(self, shape):
        self.domain_shape = tuple(shape)
        self.range_shape = tuple(shape)

    def apply(self, x):
        return self._check_domain(x).astype(np.float64, copy=True)

    def adjoint(self, y):
        return self._check_range(y).astype(np.float64, copy=True)

    def project_measurements(self, x, y):
        return self._check_range(y).astype(np.float64, copy=True)


class ZeroOperator(LinearOperator):
    """Maps everything to zero; the fully-unmeasured degenerate case."""

    def __init__(self, shape):
        self.domain_shape = tuple(shape)
        self.range_shape = tuple(shape)

    def apply(self, x):
        self._check_domain(x)
        return np.zeros(self.range_shape)

    def adjoint(self, y):
        self._check_range(y)
        return np.zeros(self.domain_shape)

    def project_measurements(self, x, y):
        if np.any(self._check_range(y)):
            raise ConfigurationError("zero operator cannot reach a non-zero measurement")
        return self._check_domain(x).astype(np.float64, copy=True)


class CoordinateMaskOperator(LinearOperator):
    """Keeps a boolean subset of voxels (measurement = masked volume)."""

    def __init__(self, keep):
        keep = np.asarray(keep, dtype=bool)
        if keep.ndim != 3:
            raise ConfigurationError("keep mask must be 3D")
        if not keep.any():
            raise ConfigurationError("keep mask selects no voxels")
        self.keep = keep
        self.domain_shape = keep.shape
        self.range_shape = keep.shape

    def apply(self, x):
        return np.where(self.keep, self._check_domain(x), 0.0)

    def adjoint(self, y):
        return np.where(self.keep, self._check_range(y), 0.0)

    def project_measurements(self, x, y):
        """Exact projection onto {x : x[keep] = y[keep]}."""
        return np.where(self.keep, self._check_range(y), self._check_domain(x))


class FiniteDiffZ(LinearOperator):
    """Forward difference along z with replicate boundary (last row zero)."""

    def __init__(self, shape):
        self.domain_shape = tuple(shape)
        self.range_shape = tuple(shape)

    def apply(self, x):
        x = self._check_domain(x)
        out = np.zeros_like(x, dtype=np.float64)
        if x.shape[0] > 1:
            out[:-1] = x[1:] - x[:-1]
        return out

    def adjoint(self, v):
        v = self._check_range(v)
        out = np.zeros_like(v, dtype=np.float64)
        nz = v.shape[0]
        if nz == 1:
            return out
        out[0] = -v[0]
        out[1:-1] = v[:-2] - v[1:-1]
        out[-1] = v[-2]
        return out


def _forward_diff(x, axis):
    out = np.zeros_like(x, dtype=np.float64)
    n = x.shape[axis]
    if n > 1:
        head = [slice(None)] * x.ndim
        head[axis] = slice(0, n - 1)
        tail = [slice(None)] * x.ndim
        tail[axis] = slice(1, n)
        out[tuple(head)] = x[tuple(tail)] - x[tuple(head)]
    return out


def _forward_diff_adjoint(v, axis):
    out = np.zeros_like(v, dtype=np.float64)
    n = v.shape[axis]
    if n == 1:
        return out
    idx = lambda s: tuple(s if a == axis else slice(None) for a in range(v.ndim))
    out[idx(slice(0, 1))] = -v[idx(slice(0, 1))]
    out[idx(slice(1, n - 1))] = v[idx(slice(0, n - 2))] - v[idx(slice(1, n - 1))]
    out[idx(slice(n - 1, n))] = v[idx(slice(n - 2, n - 1))]
    return out


class FiniteDiffXYZ(LinearOperator):
    """Stacked (D_x, D_y, D_z) differences; range shape (3, nz, ny, nx)."""

    def __init__(self, shape):
        self.domain_shape = tuple(shape)
        self.range_shape = (3,) + tuple(shape)

    def apply(self, x):
        x = self._check_domain(x)
        return np.stack([_forward_diff(x, 2), _forward_diff(x, 1), _forward_diff(x, 0)])

    def adjoint(self, v):
        v = self._check_range(v)
        return (
            _forward_diff_adjoint(v[0], 2)
            + _forward_diff_adjoint(v[1], 1)
            + _forward_diff_adjoint(v[2], 0)
        )


def diff_z(x):
    """(D_z x)[k] = x[k+1] - x[k], zero on the last slice."""
    return FiniteDiffZ(np.asarray(x).shape).apply(x)


def diff_z_adjoint(v):
    return FiniteDiffZ(np.asarray(v).shape).adjoint(v)


def diff_xyz(x):
    """Stacked per-axis forward differences, order (D_x, D_y, D_z)."""
    return FiniteDiffXYZ(np.asarray(x).shape).apply(x)


def z_total_variation(x):
    """Anisotropic z-direction TV: sum of |x[k+1] - x[k]|."""
    return float(np.abs(diff_z(np.asarray(x))).sum())


def project_data_consistency(x, A, y, n_sweeps=1, relax=0.3):
    """Pull x toward the measurement set {x : Ax = y}.

    Operators with an exact affine projection (Fourier replacement,
    coordinate masks, identity) use it directly; row-action operators
    (Radon) run ``n_sweeps`` Kaczmarz/ART passes with the given relaxation.
    """
    if n_sweeps < 1:
        raise ConfigurationError(f"n_sweeps must be >= 1, got {n_sweeps}")
    if hasattr(A, "project_measurements"):
        return A.project_measurements(x, y)
    if hasattr(A, "kaczmarz_project"):
        return A.kaczmarz_project(x, y, n_sweeps=n_sweeps, relax=relax)
    raise ConfigurationError(f"{type(A).__name__} has no data-consistency projection rule")
