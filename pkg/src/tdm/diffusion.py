"""Variance-exploding noise schedule, score priors, and the PC sampling step.

Sampling is organized slice-wise over the z-stack: every (step, slice) pair
draws from its own RNG stream derived from the master seed, so chunking the
stack into sub-batches or permuting slices (together with their keys) can
never change the result.
"""

import abc
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TIME_FLOOR = 1e-5  # continuous-time lower cutoff the discrete grid stands on

_STREAM_INIT = 0
_STREAM_SLICE = 1


@dataclass(frozen=True)
class SigmaSchedule:
    """Geometric noise levels sigma_min * (sigma_max/sigma_min)^(i/(N-1))."""

    sigma_min: float = 0.01
    sigma_max: float = 50.0
    n_steps: int = 500

    def __post_init__(self):
        if self.sigma_min <= 0:
            raise ConfigurationError(f"sigma_min must be > 0, got {self.sigma_min}")
        if self.sigma_max <= self.sigma_min:
            raise ConfigurationError("sigma_max must exceed sigma_min")
        if self.n_steps < 2:
            raise ConfigurationError(f"n_steps must be >= 2, got {self.n_steps}")
        object.__setattr__(
            self, "_sigmas", np.geomspace(self.sigma_min, self.sigma_max, self.n_steps)
        )

    @property
    def sigmas(self):
        return self._sigmas

    def sigma(self, i):
        if not 0 <= i < self.n_steps:
            raise IndexError(f"step index {i} out of range for N={self.n_steps}")
        return float(self._sigmas[i])

    def __len__(self):
        return self.n_steps


def stream(seed, *key):
    """Independent Generator for a (seed, key...) address; stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def slice_stream(seed, step, slice_key):
    return stream(seed, _STREAM_SLICE, step, slice_key)


class ScorePrior(abc.ABC):
    """Estimator of grad log p_sigma(x) for 2D slices at schedule step i."""

    schedule: SigmaSchedule
    supports_batch = True

    @abc.abstractmethod
    def score(self, x, i):
        """Score of the sigma(i)-perturbed density, same shape as x."""


class GaussianScorePrior(ScorePrior):
    """Exact score of N(mu, sigma_data^2 I) perturbed to level sigma(i).

    A closed-form prior used to verify samplers against Gaussian statistics.
    """

    def __init__(self, mu, sigma_data, schedule):
        if sigma_data <= 0:
            raise ConfigurationError(f"sigma_data must be > 0, got {sigma_data}")
        self.mu = np.asarray(mu, dtype=np.float64)
        self.sigma_data = float(sigma_data)
        self.schedule = schedule

    def score(self, x, i):
        var = self.sigma_data**2 + self.schedule.sigma(i) ** 2
        return (self.mu - np.asarray(x, dtype=np.float64)) / var


def predictor_step(x, prior, i, rng):
    """Euler-Maruyama reverse-SDE step from level i to i-1 (additive form).

    The update is x + (sigma_i^2 - sigma_{i-1}^2) * score + sqrt(.) * eps;
    at i = 0 the adjacent level is taken as 0 so the final step denoises
    below sigma_min.
    """
    sched = prior.schedule
    sigma = sched.sigma(i)
    sigma_prev = sched.sigma(i - 1) if i >= 1 else 0.0
    delta = sigma**2 - sigma_prev**2
    eps = rng.standard_normal(np.shape(x))
    return x + delta * prior.score(x, i) + np.sqrt(delta) * eps


def _slice_norms(a):
    """Per-slice 2-norms; a 2D array is one slice, 3D arrays are z-stacks."""
    a = np.asarray(a)
    if a.ndim == 2:
        return np.linalg.norm(a)
    return np.linalg.norm(a.reshape(a.shape[0], -1), axis=1).reshape(-1, 1, 1)


def corrector_step(x, prior, i, snr, rng):
    """One annealed-Langevin step x + eta*score + sqrt(2 eta)*eps.

    eta = 2 (snr ||eps|| / ||score||)^2 per slice, capped at sigma(i)^2 so a
    vanishing score cannot produce an unbounded step.
    """
    if snr <= 0:
        raise ConfigurationError(f"snr must be > 0, got {snr}")
    eps = rng.standard_normal(np.shape(x))
    s = prior.score(x, i)
    eta_max = prior.schedule.sigma(i) ** 2
    s_norm = _slice_norms(s)
    eps_norm = _slice_norms(eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = 2.0 * (snr * eps_norm / s_norm) ** 2
    eta = np.where(np.isfinite(eta), np.minimum(eta, eta_max), eta_max)
    return x + eta * s + np.sqrt(2.0 * eta) * eps


@dataclass(frozen=True)
class SamplerConfig:
    """Predictor-corrector settings: correctors per predictor and Langevin SNR."""

    n_corrector: int = 1
    snr: float = 0.16

    def __post_init__(self):
        if self.n_corrector < 0:
            raise ConfigurationError(f"n_corrector must be >= 0, got {self.n_corrector}")
        if self.snr <= 0:
            raise ConfigurationError(f"snr must be > 0, got {self.snr}")


def solve_step(x, prior, i, cfg, seed, slice_keys=None):
    """One PC step (predictor then correctors) applied slice-wise over z.

    Each slice k draws from the stream keyed by (seed, i, slice_keys[k]);
    keys default to absolute slice indices.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ConfigurationError(f"solve_step expects a (nz, ny, nx) stack, got {x.shape}")
    nz = x.shape[0]
    if slice_keys is None:
        slice_keys = range(nz)
    else:
        slice_keys = list(slice_keys)
        if len(slice_keys) != nz:
            raise ConfigurationError("slice_keys length must match the number of slices")
    out = np.empty_like(x)
    for k, key in zip(range(nz), slice_keys):
        rng = slice_stream(seed, i, int(key))
        xk = predictor_step(x[k], prior, i, rng)
        for _ in range(cfg.n_corrector):
            xk = corrector_step(xk, prior, i, cfg.snr, rng)
        out[k] = xk
    return out


def sample_prior(prior, shape, cfg=None, seed=0):
    """Unconditional sample: start at N(0, sigma_max^2 I), run solve_step N-1..0.

    Returns the (nz, ny, nx) array; bitwise reproducible for a fixed seed.
    """
    cfg = cfg or SamplerConfig()
    if len(shape) != 3:
        raise ConfigurationError(f"shape must be (nz, ny, nx), got {shape}")
    sched = prior.schedule
    init_rng = stream(seed, _STREAM_INIT)
    x = sched.sigma_max * init_rng.standard_normal(shape)
    for i in range(sched.n_steps - 1, -1, -1):
        x = solve_step(x, prior, i, cfg, seed)
    return x
