"""Solver hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

__all__ = ["SolverConfig", "ConfigurationError", "DESK_PRESET", "PRESETS"]

DENOISER_KINDS = ("cnn", "baseline", "identity")


class ConfigurationError(ValueError):
    """Inconsistent solver configuration or bank/config mismatch."""


@dataclass
class SolverConfig:
    """Hyperparameters shared by PnP, ReSiDe-S and ReSiDe-M.

    ``sigma2`` of ``None`` means "take the measurement noise variance from
    the data"; ``sigma2_floor`` keeps noiseless data usable.  ``s0_sq`` of
    ``None`` derives the first training noise variance from
    ``initial_snr_db`` and the first intermediate image.
    """

    nu: float | None = None
    gamma: float = 10.0
    tau: float = 0.65
    alpha: float = 0.1
    sigma2: float | None = None
    sigma2_floor: float = 1e-12
    s0_sq: float | None = None
    initial_snr_db: float = 5.0
    iterations: int = 80
    num_patches: int = 576
    patch_shape: tuple = (64, 64)
    epochs: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 32
    num_layers: int = 5
    num_kernels: int = 128
    warm_start: bool = False
    denoiser: str = "cnn"
    baseline_strength: float = 0.03
    bank_stride: int = 1
    normalize: bool = True
    divergence_factor: float = 10.0
    norm_iters: int = 100
    precision: str = "float32"
    seed: int = 0

    def __post_init__(self):
        self.patch_shape = tuple(int(p) for p in self.patch_shape)
        self.validate()

    def validate(self) -> None:
        positive = ["gamma", "tau", "alpha", "sigma2_floor", "learning_rate", "divergence_factor"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.nu is not None and not self.nu > 0:
            raise ConfigurationError(f"nu must be > 0, got {self.nu}")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ConfigurationError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.s0_sq is not None and not self.s0_sq > 0:
            raise ConfigurationError(f"s0_sq must be > 0, got {self.s0_sq}")
        for name in ("iterations", "num_patches", "epochs", "batch_size", "num_layers",
                     "num_kernels", "bank_stride", "norm_iters"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.denoiser not in DENOISER_KINDS:
            raise ConfigurationError(f"denoiser must be one of {DENOISER_KINDS}")
        if self.baseline_strength < 0:
            raise ConfigurationError("baseline_strength must be >= 0")
        if self.precision not in ("float32", "float64"):
            raise ConfigurationError("precision must be float32 or float64")
        if any(p < 1 for p in self.patch_shape):
            raise ConfigurationError("patch_shape entries must be positive")

    @classmethod
    def preset(cls, name: str = "full", **overrides) -> "SolverConfig":
        """Named starting point: ``full`` (published network size) or ``desk`` (reduced, warm-started)."""
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# small CPU-friendly network; warm starts let 20 Adam steps per iteration accumulate
DESK_PRESET = {"num_patches": 64, "patch_shape": (32, 32), "num_kernels": 32, "warm_start": True}
PRESETS = {"full": {}, "desk": DESK_PRESET}
