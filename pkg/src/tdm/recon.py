"""3D reconstructors: diffusion sampling coupled with a z-TV consistency step.

Two variants of the same loop: the fast one carries the ADMM split/dual
variables (z, w) across all SDE steps so a single ADMM sweep with a single
warm-started CG iteration per step suffices; the slow one re-initializes
them every step and runs M sweeps of K CG iterations.  The per-slice
projection baseline replaces the consistency sweep with a plain projection
onto the measurement set.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .diffusion import SamplerConfig, SigmaSchedule, _STREAM_INIT, solve_step, stream
from .errors import ConfigurationError, NumericalError
from .linops import FiniteDiffZ, project_data_consistency
from .optim import ADMMConfig, ADMMState, admm_sweep
from .volume import as_array


@dataclass(frozen=True)
class ReconConfig:
    """Everything a reconstruction run needs besides (y, A, prior)."""

    schedule: SigmaSchedule = None
    admm: ADMMConfig = field(default_factory=ADMMConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    sub_batch: int = 16
    final_projection: bool = True
    projection_sweeps: int = 30
    pocs_sweeps: int = 1
    art_relax: float = 0.3
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.sub_batch < 1:
            raise ConfigurationError(f"sub_batch must be >= 1, got {self.sub_batch}")
        if self.projection_sweeps < 1 or self.pocs_sweeps < 1:
            raise ConfigurationError("projection sweep counts must be >= 1")
        if not 0 < self.art_relax <= 2:
            raise ConfigurationError(f"art_relax must be in (0, 2], got {self.art_relax}")
        if self.log_every < 1:
            raise ConfigurationError(f"log_every must be >= 1, got {self.log_every}")


@dataclass
class ReconResult:
    """Reconstruction plus run metadata (emitted as the JSON report)."""

    volume: np.ndarray
    method: str
    residuals: list  # (step index, ||Ax - y||) at the logging cadence
    wall_time: float
    warnings: list
    config: dict
    psnr_trace: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "method": self.method,
            "wall_time_sec": self.wall_time,
            "warnings": list(self.warnings),
            "residual_trace": [[int(i), float(r)] for i, r in self.residuals],
            "config": self.config,
        }
        if self.psnr_trace:
            out["psnr_trace"] = [[int(i), float(p)] for i, p in self.psnr_trace]
        return out


def _config_snapshot(cfg, schedule):
    return {
        "schedule": {
            "sigma_min": schedule.sigma_min,
            "sigma_max": schedule.sigma_max,
            "n_steps": schedule.n_steps,
        },
        "admm": {
            "lam": cfg.admm.lam,
            "rho": cfg.admm.rho,
            "sweeps": cfg.admm.sweeps,
            "cg_iters": cfg.admm.cg_iters,
            "cg_tol": cfg.admm.cg_tol,
        },
        "sampler": {"n_corrector": cfg.sampler.n_corrector, "snr": cfg.sampler.snr},
        "sub_batch": cfg.sub_batch,
        "final_projection": cfg.final_projection,
        "projection_sweeps": cfg.projection_sweeps,
        "pocs_sweeps": cfg.pocs_sweeps,
        "art_relax": cfg.art_relax,
        "seed": cfg.seed,
    }


def _resolve_schedule(cfg, prior):
    if cfg.schedule is not None and cfg.schedule != prior.schedule:
        raise ConfigurationError("cfg.schedule disagrees with the prior's schedule")
    return prior.schedule


def _check_finite(x, step):
    if not np.isfinite(x).all():
        raise NumericalError("non-finite iterate; check schedule and weights", iteration=step)


def denoise_subbatched(x, prior, i, sub_batch, cfg=None, seed=0):
    """solve_step over contiguous z-chunks of at most sub_batch slices.

    Per-slice RNG streams are keyed by absolute slice index, so the output
    is bitwise identical for every chunk size.
    """
    if sub_batch < 1:
        raise ConfigurationError(f"sub_batch must be >= 1, got {sub_batch}")
    cfg = cfg or SamplerConfig()
    x = np.asarray(x, dtype=np.float64)
    nz = x.shape[0]
    out = np.empty_like(x)
    for lo in range(0, nz, sub_batch):
        hi = min(lo + sub_batch, nz)
        out[lo:hi] = solve_step(x[lo:hi], prior, i, cfg, seed, slice_keys=range(lo, hi))
    return out


def final_projection(x, A, y, n_sweeps=30, relax=0.3, enabled=True):
    """Optional exact/ART projection onto the measurement set at the end."""
    if not enabled:
        return np.asarray(x, dtype=np.float64)
    return project_data_consistency(x, A, y, n_sweeps=n_sweeps, relax=relax)


def _init_sample(schedule, shape, seed):
    rng = stream(seed, _STREAM_INIT)
    return schedule.sigma_max * rng.standard_normal(shape)


def _residual(A, x, y):
    r = A.apply(x) - y
    return float(np.linalg.norm(r.ravel()))


def _psnr_vs_ref(x, ref):
    err = float(np.mean((x - ref) ** 2))
    if err == 0:
        return float("inf")
    rng = float(np.max(ref))
    return 10.0 * np.log10(rng * rng / err)


def _run_mbir(y, A, prior, cfg, method, share_state, ref=None):
    y = as_array(y)
    schedule = _resolve_schedule(cfg, prior)
    warnings = []
    if share_state and (cfg.admm.sweeps != 1 or cfg.admm.cg_iters != 1):
        warnings.append(
            f"variable sharing expects M=K=1, running with M={cfg.admm.sweeps}, "
            f"K={cfg.admm.cg_iters}"
        )
    t0 = time.perf_counter()
    x = _init_sample(schedule, A.domain_shape, cfg.seed)
    diff = FiniteDiffZ(A.domain_shape)
    Aty = A.adjoint(y)
    z = np.zeros(A.domain_shape)
    w = np.zeros(A.domain_shape)
    residuals = []
    psnr_trace = []
    for i in range(schedule.n_steps - 1, -1, -1):
        x = denoise_subbatched(x, prior, i, cfg.sub_batch, cfg.sampler, cfg.seed)
        if not share_state:
            z = np.zeros(A.domain_shape)
            w = np.zeros(A.domain_shape)
        state = ADMMState(x, z, w)
        for _ in range(cfg.admm.sweeps):
            state = admm_sweep(state, A, y, cfg.admm, diff=diff, Aty=Aty)
        x, z, w = state.x, state.z, state.w
        _check_finite(x, i)
        if i % cfg.log_every == 0:
            residuals.append((i, _residual(A, x, y)))
            if ref is not None:
                psnr_trace.append((i, _psnr_vs_ref(x, ref)))
    x = final_projection(
        x, A, y, n_sweeps=cfg.projection_sweeps, relax=cfg.art_relax,
        enabled=cfg.final_projection,
    )
    if cfg.final_projection:
        residuals.append((-1, _residual(A, x, y)))
    return ReconResult(
        volume=x,
        method=method,
        residuals=residuals,
        wall_time=time.perf_counter() - t0,
        warnings=warnings,
        config=_config_snapshot(cfg, schedule),
        psnr_trace=psnr_trace,
    )


def diffusion_mbir_fast(y, A, prior, cfg, ref=None, _reset_state_each_step=False):
    """Variable-sharing reconstruction: (z, w) persist across all SDE steps.

    ``_reset_state_each_step`` forces the slow variant's per-step
    re-initialization; it exists to verify the two loops coincide and is not
    part of the public contract.
    """
    return _run_mbir(
        y, A, prior, cfg, "diffmbir-fast", share_state=not _reset_state_each_step, ref=ref
    )


def diffusion_mbir_slow(y, A, prior, cfg, ref=None):
    """Per-step ADMM: (z, w) re-zeroed inside every SDE iteration, M sweeps of K CG iters."""
    return _run_mbir(y, A, prior, cfg, "diffmbir-slow", share_state=False, ref=ref)


def per_slice_pocs(y, A, prior, cfg):
    """Slice-wise denoising alternated with projection onto the measurement set.

    No coupling across z beyond what the operator itself carries; the
    baseline whose cross-slice incoherence the z-TV sweep removes.
    """
    y = as_array(y)
    schedule = _resolve_schedule(cfg, prior)
    t0 = time.perf_counter()
    x = _init_sample(schedule, A.domain_shape, cfg.seed)
    residuals = []
    for i in range(schedule.n_steps - 1, -1, -1):
        x = denoise_subbatched(x, prior, i, cfg.sub_batch, cfg.sampler, cfg.seed)
        x = project_data_consistency(x, A, y, n_sweeps=cfg.pocs_sweeps, relax=cfg.art_relax)
        _check_finite(x, i)
        if i % cfg.log_every == 0:
            residuals.append((i, _residual(A, x, y)))
    x = final_projection(
        x, A, y, n_sweeps=cfg.projection_sweeps, relax=cfg.art_relax,
        enabled=cfg.final_projection,
    )
    if cfg.final_projection:
        residuals.append((-1, _residual(A, x, y)))
    return ReconResult(
        volume=x,
        method="pocs",
        residuals=residuals,
        wall_time=time.perf_counter() - t0,
        warnings=[],
        config=_config_snapshot(cfg, schedule),
    )
