"""PnP-PDS, self-calibrated reconstruction, discrepancy tuning, baseline denoiser."""

from .baseline import baseline_shrink_denoiser, haar_forward, haar_inverse, soft_threshold
from .config import DESK_PRESET, PRESETS, ConfigurationError, SolverConfig
from .discrepancy import DegenerateFitError, discrepancy_update
from .pds import DivergenceError, PDSChains, Trace, make_fixed_denoiser, pds_pnp
from .reside import (
    MeasurementSet,
    ReconResult,
    normalization_scale,
    reside_m_infer,
    reside_m_train,
    reside_s,
    run_pnp,
)

__all__ = [
    "ConfigurationError",
    "DESK_PRESET",
    "PRESETS",
    "DegenerateFitError",
    "DivergenceError",
    "MeasurementSet",
    "PDSChains",
    "ReconResult",
    "SolverConfig",
    "Trace",
    "baseline_shrink_denoiser",
    "discrepancy_update",
    "haar_forward",
    "haar_inverse",
    "make_fixed_denoiser",
    "normalization_scale",
    "pds_pnp",
    "reside_m_infer",
    "reside_m_train",
    "reside_s",
    "run_pnp",
    "soft_threshold",
]
