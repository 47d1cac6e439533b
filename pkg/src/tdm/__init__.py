"""tdm: diffusion-regularized 3D reconstruction for CT and MRI.

Slice-wise 2D diffusion priors coupled across the stacking direction by a
z-only total-variation term, enforced with a single variable-shared ADMM/CG
sweep per sampling step.
"""

from .diffusion import (
    GaussianScorePrior,
    SamplerConfig,
    ScorePrior,
    SigmaSchedule,
    corrector_step,
    predictor_step,
    sample_prior,
    solve_step,
)
from .denoiser import DenoiserModel, dsm_loss, load_model, save_model, train_denoiser
from .errors import (
    CheckpointFormatError,
    ConfigurationError,
    NumericalError,
    TrainingError,
    VolumeFormatError,
)
from .fourier import MaskedFourierOperator, SamplingMask, fourier_adjoint, fourier_forward
from .linops import (
    CoordinateMaskOperator,
    FiniteDiffXYZ,
    FiniteDiffZ,
    IdentityOperator,
    LinearOperator,
    ZeroOperator,
    adjoint_mismatch,
    diff_xyz,
    diff_z,
    diff_z_adjoint,
    project_data_consistency,
    z_total_variation,
)
from .metrics import MetricsReport, per_plane_metrics, psnr, ssim
from .optim import (
    ADMMConfig,
    ADMMState,
    admm_sweep,
    admm_tv,
    admm_tv_isotropic,
    admm_x_update,
    cg_solve,
    group_soft_threshold,
    soft_threshold,
)
from .phantoms import PhantomSpec, ellipse_overlay, random_spheres, shepp_logan_3d
from .radon import (
    ProjectionGeometry,
    RadonTransform,
    Sinogram3,
    default_n_det,
    fbp,
    radon_adjoint,
    radon_forward,
)
from .recon import (
    ReconConfig,
    ReconResult,
    denoise_subbatched,
    diffusion_mbir_fast,
    diffusion_mbir_slow,
    final_projection,
    per_slice_pocs,
)
from .sampling import limited_angle_geometry, sparse_view_geometry, uniform1d_mask
from .volume import ComplexVolume3, GridGeometry, Volume3
from .io import export_png_slices, read_raw, write_raw

__version__ = "0.1.0"
