"""Conjugate gradients, l1 proximal operators, and the ADMM machinery.

The x-update solves the normal system (A^T A + rho D_z^T D_z) x = A^T y +
rho D_z^T (z - w) by CG; the z-update is the soft-threshold prox of the l1
norm; w accumulates the scaled dual residual.  The isotropic variant stacks
all three axis differences and shrinks each voxel's difference vector by
its Euclidean norm.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .linops import FiniteDiffXYZ, FiniteDiffZ, real_vdot


def soft_threshold(v, tau):
    """Elementwise sign(v) * max(|v| - tau, 0)."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def group_soft_threshold(d, tau):
    """Shrink each voxel's stacked difference vector d[:, ...] by its 2-norm."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    d = np.asarray(d, dtype=np.float64)
    norm = np.sqrt((d * d).sum(axis=0))
    scale = np.zeros_like(norm)
    np.divide(np.maximum(norm - tau, 0.0), norm, out=scale, where=norm > 0)
    return d * scale


def cg_solve(op, b, x0=None, max_iter=10, tol=0.0):
    """Conjugate gradients on a symmetric PSD operator.

    ``op`` is a callable or a LinearOperator applied as the full system
    matrix.  Runs ``max_iter`` iterations, stopping early when
    ||r|| <= tol * ||b|| (tol = 0 keeps the fixed-iteration semantics of the
    sampling loop).  Raises NumericalError on breakdown (p^T A p <= 0).
    """
    apply_op = op.apply if hasattr(op, "apply") else op
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    if max_iter < 1:
        raise ConfigurationError(f"max_iter must be >= 1, got {max_iter}")
    r = b - apply_op(x)
    p = r.copy()
    rs = real_vdot(r, r)
    b_norm = float(np.linalg.norm(b.ravel()))
    threshold = tol * b_norm
    for it in range(max_iter):
        if rs == 0.0 or (tol > 0.0 and np.sqrt(rs) <= threshold):
            break
        Ap = apply_op(p)
        pAp = real_vdot(p, Ap)
        if pAp <= 0.0:
            raise NumericalError("CG breakdown: p^T A p <= 0", iteration=it)
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = real_vdot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


@dataclass(frozen=True)
class ADMMConfig:
    """Weights and iteration counts for the z-TV consistency step."""

    lam: float = 0.04
    rho: float = 10.0
    sweeps: int = 1
    cg_iters: int = 1
    cg_tol: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lam must be >= 0, got {self.lam}")
        if self.rho <= 0:
            raise ConfigurationError(f"rho must be > 0, got {self.rho}")
        if self.sweeps < 1 or self.cg_iters < 1:
            raise ConfigurationError("sweeps and cg_iters must be >= 1")
        if self.cg_tol < 0:
            raise ConfigurationError("cg_tol must be >= 0")


@dataclass(eq=False)
class ADMMState:
    """Primal x, split variable z = D_z x, and scaled dual w."""

    x: np.ndarray
    z: np.ndarray
    w: np.ndarray

    @classmethod
    def from_volume(cls, x):
        x = np.asarray(x, dtype=np.float64)
        return cls(x.copy(), np.zeros_like(x), np.zeros_like(x))


class _NormalOperator:
    """A^T A + rho D^T D as a callable on volume arrays."""

    def __init__(self, A, diff, rho):
        self.A = A
        self.diff = diff
        self.rho = rho

    def __call__(self, x):
        return self.A.adjoint(self.A.apply(x)) + self.rho * self.diff.adjoint(self.diff.apply(x))


def admm_x_update(A, y, z, w, rho, x0, cg_iters, cg_tol=0.0, diff=None, Aty=None):
    """CG iterations on (A^T A + rho D_z^T D_z) x = A^T y + rho D_z^T (z - w)."""
    if rho <= 0:
        raise ConfigurationError(f"rho must be > 0, got {rho}")
    x0 = np.asarray(x0, dtype=np.float64)
    diff = diff or FiniteDiffZ(x0.shape)
    if Aty is None:
        Aty = A.adjoint(y)
    rhs = Aty + rho * diff.adjoint(z - w)
    return cg_solve(_NormalOperator(A, diff, rho), rhs, x0=x0, max_iter=cg_iters, tol=cg_tol)


def admm_sweep(state, A, y, cfg, diff=None, Aty=None):
    """One x -> z -> w sweep; CG warm-starts at the current x.

    When the l1 weight is zero and the right-hand side vanishes identically
    (no measurement pull, no dual memory) the sweep is a no-op: the
    subproblem objective is flat and moving x would only chase the splitting
    penalty.
    """
    diff = diff or FiniteDiffZ(state.x.shape)
    if Aty is None:
        Aty = A.adjoint(y)
    rhs = Aty + cfg.rho * diff.adjoint(state.z - state.w)
    if cfg.lam == 0.0 and not rhs.any():
        return state
    x = cg_solve(
        _NormalOperator(A, diff, cfg.rho),
        rhs,
        x0=state.x,
        max_iter=cfg.cg_iters,
        tol=cfg.cg_tol,
    )
    dx = diff.apply(x)
    z = soft_threshold(dx + state.w, cfg.lam / cfg.rho)
    w = state.w + dx - z
    return ADMMState(x, z, w)


def admm_tv(y, A, cfg, init, n_outer):
    """Solve min_x 0.5||y - Ax||^2 + lam ||D_z x||_1 by repeated sweeps."""
    if n_outer < 0:
        raise ConfigurationError(f"n_outer must be >= 0, got {n_outer}")
    state = ADMMState.from_volume(init)
    diff = FiniteDiffZ(state.x.shape)
    Aty = A.adjoint(y)
    for _ in range(n_outer):
        state = admm_sweep(state, A, y, cfg, diff=diff, Aty=Aty)
    return state.x


def tv_z_objective(x, y, A, lam):
    """0.5 ||y - Ax||^2 + lam ||D_z x||_1."""
    r = A.apply(x) - y
    fit = 0.5 * real_vdot(r, r)
    dz = FiniteDiffZ(np.asarray(x).shape).apply(x)
    return fit + lam * float(np.abs(dz).sum())


def admm_tv_isotropic(y, A, lam=0.5, rho=50.0, n_outer=30, n_cg=20, init=None):
    """Isotropic-TV baseline: ADMM on stacked (D_x, D_y, D_z) with group shrinkage.

    Shipped default profile (lam, rho) = (0.5, 50) for sparse-view CT;
    (0.15, 40) for limited-angle CT.
    """
    if init is None:
        init = np.zeros(A.domain_shape)
    x = np.asarray(init, dtype=np.float64).copy()
    diff = FiniteDiffXYZ(x.shape)
    z = np.zeros(diff.range_shape)
    w = np.zeros(diff.range_shape)
    Aty = A.adjoint(y)
    normal = _NormalOperator(A, diff, rho)
    for _ in range(n_outer):
        rhs = Aty + rho * diff.adjoint(z - w)
        x = cg_solve(normal, rhs, x0=x, max_iter=n_cg, tol=0.0)
        dx = diff.apply(x)
        z = group_soft_threshold(dx + w, lam / rho)
        w = w + dx - z
    return x
