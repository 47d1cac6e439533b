"""Noise-conditional slice denoiser: DSM training, scoring, checkpoints.

A compact 4-level encoder-decoder predicts the residual noise of a slice;
the noise level enters through feature-wise scale/shift computed from
Fourier features of log(sigma).  The network is trained with denoising
score matching weighted by sigma^2, which reduces to plain MSE between the
network output and the injected noise.

Scoring during sampling always runs single-slice, single-threaded forward
passes: CPU convolutions are not bitwise reproducible across batch sizes or
thread counts, and the samplers promise results independent of both.
"""

import hashlib
import json
import struct

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .diffusion import ScorePrior, SigmaSchedule
from .errors import CheckpointFormatError, ConfigurationError, TrainingError

CHECKPOINT_MAGIC = b"TDM1"
_SIGMA_DATA = 0.5  # nominal data scale for input preconditioning


class _FilmBlock(nn.Module):
    """Conv -> GroupNorm -> sigma-conditional scale/shift -> SiLU."""

    def __init__(self, cin, cout, emb_dim):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 3, padding=1)
        self.norm = nn.GroupNorm(min(8, cout), cout)
        self.film = nn.Linear(emb_dim, 2 * cout)

    def forward(self, x, emb):
        h = self.norm(self.conv(x))
        scale, shift = self.film(emb).chunk(2, dim=1)
        h = h * (1.0 + scale[:, :, None, None]) + shift[:, :, None, None]
        return F.silu(h)


class SigmaUNet(nn.Module):
    """4-level encoder-decoder residual-noise predictor conditioned on sigma."""

    def __init__(self, base=24, emb_dim=128):
        super().__init__()
        widths = [base, 2 * base, 3 * base, 4 * base]
        self.base = base
        self.emb_dim = emb_dim
        # fixed random Fourier features of log(sigma)
        gen = torch.Generator().manual_seed(0x5EED)
        self.register_buffer("freqs", torch.randn(emb_dim // 2, generator=gen) * 2.0)
        self.embed = nn.Sequential(nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim))
        self.inc = _FilmBlock(1, widths[0], emb_dim)
        self.downs = nn.ModuleList(
            _FilmBlock(widths[i], widths[i + 1], emb_dim) for i in range(3)
        )
        self.mid = _FilmBlock(widths[3], widths[3], emb_dim)
        self.ups = nn.ModuleList(
            _FilmBlock(widths[i + 1] + widths[i], widths[i], emb_dim) for i in reversed(range(3))
        )
        self.out = nn.Conv2d(widths[0], 1, 3, padding=1)

    def forward(self, x, sigma):
        ang = torch.log(sigma)[:, None] * self.freqs[None, :]
        emb = self.embed(torch.cat([torch.sin(ang), torch.cos(ang)], dim=1))
        h = self.inc(x, emb)
        skips = [h]
        for down in self.downs:
            h = down(F.avg_pool2d(h, 2), emb)
            skips.append(h)
        h = self.mid(h, emb)
        for up in self.ups:
            skip = skips.pop(-2)
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = up(torch.cat([h, skip], dim=1), emb)
        return self.out(h)


class DenoiserModel(ScorePrior):
    """Trained slice denoiser exposing the ScorePrior interface."""

    supports_batch = False

    def __init__(self, net, schedule, meta=None):
        self.net = net.eval()
        self.schedule = schedule
        self.meta = dict(meta or {})

    def predict_noise(self, x, sigma):
        """Network estimate of the residual noise eps in x = x0 + sigma*eps."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        batch = x[None] if squeeze else x
        out = np.empty_like(batch)
        c_in = 1.0 / np.sqrt(sigma**2 + _SIGMA_DATA**2)
        sig = torch.full((1,), float(sigma), dtype=torch.float32)
        n_threads = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            with torch.no_grad():
                for k in range(batch.shape[0]):
                    xt = torch.from_numpy((c_in * batch[k]).astype(np.float32))[None, None]
                    out[k] = self.net(xt, sig)[0, 0].numpy().astype(np.float64)
        finally:
            torch.set_num_threads(n_threads)
        return out[0] if squeeze else out

    def score(self, x, i):
        sigma = self.schedule.sigma(i)
        return -self.predict_noise(x, sigma) / sigma

    def parameter_count(self):
        return sum(p.numel() for p in self.net.parameters())


def _draw_batch(x0, schedule, rng):
    """Noise levels, perturbed slices, and targets for one DSM batch."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 3 or x0.shape[0] == 0:
        raise ConfigurationError("x0_batch must be a non-empty (B, ny, nx) stack")
    idx = rng.integers(0, schedule.n_steps, size=x0.shape[0])
    sigmas = schedule.sigmas[idx]
    eps = rng.standard_normal(x0.shape)
    xt = x0 + sigmas[:, None, None] * eps
    return idx, sigmas, eps, xt


def dsm_loss(model, x0_batch, rng):
    """Denoising score matching loss, sigma^2-weighted, averaged over the batch.

    Draws a uniform step index and Gaussian noise per slice and compares the
    model score against the conditional score -(x_t - x_0)/sigma^2; for a
    model emitting zero score the expectation equals the slice
    dimensionality.
    """
    schedule = model.schedule
    idx, sigmas, eps, xt = _draw_batch(x0_batch, schedule, rng)
    total = 0.0
    for k in range(xt.shape[0]):
        s = model.score(xt[k], int(idx[k]))
        diff = s + eps[k] / sigmas[k]
        total += sigmas[k] ** 2 * float((diff * diff).sum())
    return total / xt.shape[0]


def train_denoiser(
    dataset,
    schedule=None,
    epochs=8,
    lr=2e-4,
    rng=None,
    batch_size=8,
    base_width=24,
    log_every=0,
):
    """Train a DenoiserModel on a stack of 2D slices with Adam on the DSM loss.

    Deterministic given ``rng``: the torch seed, batch order, step indices,
    and noise draws all derive from it.  Returns the model with the per-step
    loss trace in ``model.meta["loss_trace"]``.
    """
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 3 or data.shape[0] == 0:
        raise ConfigurationError("dataset must be a non-empty (S, ny, nx) stack")
    if epochs < 0:
        raise ConfigurationError(f"epochs must be >= 0, got {epochs}")
    schedule = schedule or SigmaSchedule()
    rng = rng or np.random.default_rng(0)

    torch.manual_seed(int(rng.integers(2**31 - 1)))
    net = SigmaUNet(base=base_width)
    meta = {
        "epochs": epochs,
        "lr": lr,
        "batch_size": batch_size,
        "n_slices": int(data.shape[0]),
        "dataset_hash": hashlib.sha256(np.ascontiguousarray(data, dtype=np.float32)).hexdigest(),
        "loss_trace": [],
    }
    model = DenoiserModel(net, schedule, meta)
    if epochs == 0:
        return model

    opt = torch.optim.Adam(net.parameters(), lr=lr, betas=(0.9, 0.999))
    n = data.shape[0]
    step = 0
    net.train()
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            x0 = data[order[lo : lo + batch_size]]
            _, sigmas, eps, xt = _draw_batch(x0, schedule, rng)
            c_in = 1.0 / np.sqrt(sigmas**2 + _SIGMA_DATA**2)
            xt_t = torch.from_numpy((c_in[:, None, None] * xt).astype(np.float32))[:, None]
            eps_t = torch.from_numpy(eps.astype(np.float32))[:, None]
            sig_t = torch.from_numpy(sigmas.astype(np.float32))
            pred = net(xt_t, sig_t)
            # sigma^2-weighted DSM == MSE against the injected noise
            loss = ((pred - eps_t) ** 2).flatten(1).sum(dim=1).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingError(f"DSM loss diverged at step {step}")
            meta["loss_trace"].append(value)
            if log_every and step % log_every == 0:
                print(f"step {step:5d}  dsm loss {value:.4f}")
            step += 1
    net.eval()
    return model


def save_model(model, path):
    """Write the TDM1 container: magic, length-prefixed JSON, raw f32 tensors."""
    state = model.net.state_dict()
    tensors = [[name, list(t.shape)] for name, t in state.items()]
    header = {
        "format": 1,
        "arch": {"kind": "sigma_unet", "base": model.net.base, "emb_dim": model.net.emb_dim},
        "schedule": {
            "sigma_min": model.schedule.sigma_min,
            "sigma_max": model.schedule.sigma_max,
            "n_steps": model.schedule.n_steps,
        },
        "training": {k: v for k, v in model.meta.items() if k != "loss_trace"},
        "tensors": tensors,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, tensor in state.items():
            fh.write(tensor.detach().numpy().astype("<f4").tobytes())


def load_model(path):
    """Read a TDM1 checkpoint back into a DenoiserModel."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {raw[:4]!r}, expected {CHECKPOINT_MAGIC!r}", offset=0)
    if len(raw) < 8:
        raise CheckpointFormatError("truncated header", offset=len(raw))
    (json_len,) = struct.unpack_from("<I", raw, 4)
    if len(raw) < 8 + json_len:
        raise CheckpointFormatError("truncated metadata block", offset=len(raw))
    try:
        header = json.loads(raw[8 : 8 + json_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"metadata is not valid JSON: {exc}", offset=8) from exc
    arch = header.get("arch", {})
    if arch.get("kind") != "sigma_unet":
        raise CheckpointFormatError(f"unknown architecture {arch.get('kind')!r}")
    net = SigmaUNet(base=arch["base"], emb_dim=arch["emb_dim"])
    schedule = SigmaSchedule(**header["schedule"])
    offset = 8 + json_len
    state = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointFormatError(f"truncated tensor {name!r}", offset=offset)
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[name] = torch.from_numpy(arr.copy())
        offset = end
    if offset != len(raw):
        raise CheckpointFormatError("trailing bytes after tensor payload", offset=offset)
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointFormatError(f"tensor list does not match architecture: {exc}") from exc
    return DenoiserModel(net, schedule, header.get("training", {}))
