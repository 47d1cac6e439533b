"""Command-line interface: phantom generation, training, reconstruction, evaluation.

Exit codes: 0 success, 1 usage error, 2 runtime/numerical error.  The
TDM_THREADS environment variable caps worker threads; results are identical
for any value >= 1.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import build_recon_config, load_config
from .denoiser import load_model, save_model, train_denoiser
from .diffusion import GaussianScorePrior, SigmaSchedule
from .errors import ConfigurationError, NumericalError, TrainingError, VolumeFormatError
from .fourier import MaskedFourierOperator
from .io import export_png_slices, read_raw, write_raw
from .linops import FiniteDiffXYZ, FiniteDiffZ, adjoint_mismatch
from .metrics import per_plane_metrics, psnr
from .optim import admm_tv, admm_tv_isotropic
from .phantoms import PhantomSpec
from .radon import RadonTransform, Sinogram3, default_n_det, fbp
from .recon import diffusion_mbir_fast, diffusion_mbir_slow, per_slice_pocs
from .sampling import limited_angle_geometry, sparse_view_geometry, uniform1d_mask
from .volume import Volume3

METHODS = ("diffmbir-fast", "diffmbir-slow", "pocs", "admm-tv", "admm-tv-iso", "fbp", "zero-filled")
TASKS = ("svct", "lact", "csmri")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _apply_thread_cap():
    cap = os.environ.get("TDM_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ConfigurationError(f"TDM_THREADS must be an integer, got {cap!r}")
    import torch

    torch.set_num_threads(n)


def _build_parser():
    parser = _Parser(prog="tdm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tdm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate an analytic phantom volume")
    p.add_argument("--kind", default="shepp-logan",
                   choices=("shepp-logan", "random-spheres", "ellipse-overlay"))
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=12, help="sphere count for random-spheres")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the slice denoiser with DSM")
    p.add_argument("--data", nargs="+", required=True, help="training volumes (.tdv)")
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--base-width", type=int, default=24)
    p.add_argument("--sigma-min", type=float, default=0.01)
    p.add_argument("--sigma-max", type=float, default=50.0)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("recon", help="simulate a measurement and reconstruct")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--phantom", required=True, help="ground-truth volume (.tdv)")
    p.add_argument("--out", required=True, help="output volume (.tdv)")
    p.add_argument("--report", help="write the JSON run report here")
    p.add_argument("--model", help="denoiser checkpoint for diffusion methods")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--views", type=int, default=8, help="CT view count")
    p.add_argument("--angle-range", type=float, nargs=2, default=(0.0, 90.0),
                   metavar=("START", "END"), help="measured wedge for lact (degrees)")
    p.add_argument("--accel", type=float, default=2.0, help="CS-MRI acceleration factor")
    p.add_argument("--acs-frac", type=float, default=0.15)
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="Gaussian measurement noise level (default noiseless)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None, help="override schedule length")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--sub-batch", type=int, default=None)
    p.add_argument("--no-final-projection", action="store_true")
    p.add_argument("--tv-outer", type=int, default=30, help="ADMM-TV outer iterations")
    p.add_argument("--tv-cg", type=int, default=20, help="ADMM-TV inner CG iterations")
    p.add_argument("--png-dir", help="also export axial PNG slices here")

    p = sub.add_parser("eval", help="per-plane PSNR/SSIM of a reconstruction")
    p.add_argument("--recon", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="write the JSON report here (default stdout)")

    p = sub.add_parser("adjoint-check", help="transpose-pairing test for all operators")
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("sweep", help="view count vs reconstruction PSNR table")
    p.add_argument("--views", default="2,4,8,16,32")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--model", required=True)
    p.add_argument("--method", default="diffmbir-fast",
                   choices=("diffmbir-fast", "diffmbir-slow", "pocs"))
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write the JSON table here (default stdout)")
    return parser


def _emit(payload, out_path):
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_phantom(args):
    params = {"count": args.count} if args.kind == "random-spheres" else {}
    vol = PhantomSpec(args.kind, args.size, args.seed, params).build()
    write_raw(vol, args.out)
    print(f"wrote {args.kind} phantom {vol.shape} to {args.out}")
    return 0


def _cmd_train(args):
    slices = np.concatenate([read_raw(path).data for path in args.data], axis=0)
    schedule = SigmaSchedule(args.sigma_min, args.sigma_max, args.steps)
    model = train_denoiser(
        slices,
        schedule=schedule,
        epochs=args.epochs,
        lr=args.lr,
        rng=np.random.default_rng(args.seed),
        batch_size=args.batch_size,
        base_width=args.base_width,
        log_every=50,
    )
    save_model(model, args.out)
    trace = model.meta["loss_trace"]
    first = trace[0] if trace else float("nan")
    last = trace[-1] if trace else float("nan")
    print(f"trained on {slices.shape[0]} slices; loss {first:.1f} -> {last:.1f}; saved {args.out}")
    return 0


def _simulate(args, vol):
    """Build (measurement, operator, zero-filled-style baseline input)."""
    nz, ny, nx = vol.shape
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    if args.task in ("svct", "lact"):
        n_det = default_n_det(ny, nx)
        if args.task == "svct":
            geom = sparse_view_geometry(args.views, n_det)
        else:
            start, end = args.angle_range
            geom = limited_angle_geometry(start, end, args.views, n_det)
        A = RadonTransform(geom, vol.shape, spacing=vol.spacing[1:])
        y = A.apply(vol.data)
    else:
        mask = uniform1d_mask(ny, nx, args.accel, args.acs_frac)
        A = MaskedFourierOperator(mask, nz)
        y = A.apply(vol.data)
    if args.noise_sigma > 0:
        noise = rng.standard_normal(y.shape)
        if np.iscomplexobj(y):
            noise = noise + 1j * rng.standard_normal(y.shape)
        y = y + args.noise_sigma * noise
    return y, A


def _cmd_recon(args):
    vol = read_raw(args.phantom)
    y, A = _simulate(args, vol)
    cfg_data = load_config(args.config) if args.config else {}
    cfg = build_recon_config(
        cfg_data,
        seed=args.seed,
        n_steps=args.steps,
        lam=args.lam,
        rho=args.rho,
        snr=args.snr,
        sub_batch=args.sub_batch,
        final_projection=False if args.no_final_projection else None,
    )
    report = {"task": args.task, "method": args.method, "phantom": args.phantom}

    if args.method in ("diffmbir-fast", "diffmbir-slow", "pocs"):
        if not args.model:
            raise ConfigurationError(f"--model is required for method {args.method}")
        prior = load_model(args.model)
        if cfg.schedule is not None and cfg.schedule != prior.schedule:
            prior = type(prior)(prior.net, cfg.schedule, prior.meta)
        runner = {
            "diffmbir-fast": diffusion_mbir_fast,
            "diffmbir-slow": diffusion_mbir_slow,
            "pocs": per_slice_pocs,
        }[args.method]
        result = runner(y, A, prior, cfg)
        out = result.volume
        report.update(result.to_dict())
    elif args.method == "admm-tv":
        out = admm_tv(y, A, cfg.admm, np.zeros(vol.shape), n_outer=args.tv_outer)
    elif args.method == "admm-tv-iso":
        lam = 0.5 if args.lam is None else args.lam
        rho = 50.0 if args.rho is None else args.rho
        if args.task == "lact" and args.lam is None:
            lam, rho = 0.15, 40.0
        out = admm_tv_isotropic(y, A, lam=lam, rho=rho, n_outer=args.tv_outer, n_cg=args.tv_cg)
        report["params"] = {"lam": lam, "rho": rho}
    elif args.method == "fbp":
        if args.task == "csmri":
            raise ConfigurationError("fbp applies to CT tasks only")
        out = fbp(Sinogram3(y, A.geom), vol_shape=vol.shape, spacing=vol.spacing).data
    else:  # zero-filled
        if args.task != "csmri":
            raise ConfigurationError("zero-filled applies to the csmri task only")
        out = A.adjoint(y)

    out_vol = Volume3(np.asarray(out), vol.spacing)
    write_raw(out_vol, args.out)
    report["global_psnr"] = psnr(out_vol.data, vol.data)
    if args.png_dir:
        export_png_slices(out_vol, args.png_dir)
    if args.report:
        _emit(report, args.report)
    print(f"{args.method}/{args.task}: PSNR {report['global_psnr']:.2f} dB -> {args.out}")
    return 0


def _cmd_eval(args):
    recon = read_raw(args.recon)
    ref = read_raw(args.ref)
    report = per_plane_metrics(recon, ref).to_dict()
    _emit(report, args.out)
    return 0


def _cmd_adjoint_check(args):
    n = args.size
    rng = np.random.default_rng(args.seed)
    geom = sparse_view_geometry(args.views, default_n_det(n, n))
    mask = uniform1d_mask(n, n, 2.0, 0.15)
    ops = {
        "radon": RadonTransform(geom, (n, n, n)),
        "fourier": MaskedFourierOperator(mask, n),
        "diff_z": FiniteDiffZ((n, n, n)),
        "diff_xyz": FiniteDiffXYZ((n, n, n)),
    }
    worst = 0.0
    for name, op in ops.items():
        err = adjoint_mismatch(op, rng, n_trials=args.trials)
        worst = max(worst, err)
        print(f"{name:10s} max relative adjoint error: {err:.3e}")
    if worst > args.tol:
        print(f"FAIL: worst error {worst:.3e} above tolerance {args.tol:.1e}")
        return 2
    print(f"OK: all operators within {args.tol:.1e}")
    return 0


def _cmd_sweep(args):
    try:
        view_counts = [int(v) for v in args.views.split(",") if v]
    except ValueError:
        raise _UsageError(f"--views must be comma-separated integers, got {args.views!r}")
    from .phantoms import shepp_logan_3d

    vol = shepp_logan_3d(args.size)
    prior = load_model(args.model)
    cfg_data = load_config(args.config) if args.config else {}
    cfg = build_recon_config(cfg_data, seed=args.seed, n_steps=args.steps)
    if cfg.schedule is not None and cfg.schedule != prior.schedule:
        prior = type(prior)(prior.net, cfg.schedule, prior.meta)
    runner = {
        "diffmbir-fast": diffusion_mbir_fast,
        "diffmbir-slow": diffusion_mbir_slow,
        "pocs": per_slice_pocs,
    }[args.method]
    rows = []
    for n_views in view_counts:
        geom = sparse_view_geometry(n_views, default_n_det(args.size, args.size))
        A = RadonTransform(geom, vol.shape)
        result = runner(A.apply(vol.data), A, prior, cfg)
        report = per_plane_metrics(result.volume, vol.data)
        rows.append(
            {
                "views": n_views,
                "psnr_global": report.psnr_global,
                "psnr_axial": report.psnr_axial,
                "psnr_coronal": report.psnr_coronal,
                "psnr_sagittal": report.psnr_sagittal,
            }
        )
        print(f"views {n_views:3d}: global PSNR {report.psnr_global:.2f} dB")
    _emit({"method": args.method, "size": args.size, "rows": rows}, args.out)
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "train": _cmd_train,
    "recon": _cmd_recon,
    "eval": _cmd_eval,
    "adjoint-check": _cmd_adjoint_check,
    "sweep": _cmd_sweep,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        _apply_thread_cap()
        return _COMMANDS[args.command](args)
    except (ConfigurationError, VolumeFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, TrainingError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
