"""Self-calibrated plug-and-play MRI reconstruction in numpy.

Subpackages and modules
-----------------------
numerics        centered unitary FFTs and seeded random streams
sampling        Cartesian phase-encode masks
forward_model   multi-coil SENSE operator, norm and noise estimates
phantom         synthetic static and dynamic phantoms
denoiser        residual CNN, training and stored denoiser banks
solver          PnP-PDS, discrepancy tuning, scan-specific and multi-set modes
metrics         rSNR and SSIM
io, dataset     binary array files and dataset directories
cli             ``reside`` command-line entry point
"""

from .dataset import Dataset, load_dataset, save_dataset
from .forward_model import ForwardOperator, estimate_noise_variance, operator_norm_sq
from .metrics import quality_report, rsnr, ssim
from .numerics import make_rng
from .phantom import PhantomSpec, make_dynamic_phantom, make_static_phantom, simulate_acquisition
from .sampling import SamplingMask, acceleration_rate, make_mask_m1, make_mask_m2, make_mask_m3
from .solver import (
    MeasurementSet,
    SolverConfig,
    pds_pnp,
    reside_m_infer,
    reside_m_train,
    reside_s,
    run_pnp,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ForwardOperator",
    "MeasurementSet",
    "PhantomSpec",
    "SamplingMask",
    "SolverConfig",
    "acceleration_rate",
    "estimate_noise_variance",
    "load_dataset",
    "make_dynamic_phantom",
    "make_mask_m1",
    "make_mask_m2",
    "make_mask_m3",
    "make_rng",
    "make_static_phantom",
    "operator_norm_sq",
    "pds_pnp",
    "quality_report",
    "reside_m_infer",
    "reside_m_train",
    "reside_s",
    "rsnr",
    "run_pnp",
    "save_dataset",
    "simulate_acquisition",
    "ssim",
]
