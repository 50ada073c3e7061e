"""Self-calibrated PnP: scan-specific (S) and multi-set (M) variants.

At every PDS iteration the denoiser is retrained on patches of the current
intermediate image(s) ``u_t``: clean targets are the patches themselves and
inputs are the patches plus complex white noise of variance ``s_{t-1}^2``.
After denoising, ``s_t^2`` is rescaled by the discrepancy correction so that
``||A x_t - y||^2`` is driven toward ``tau * M * sigma^2``.

The multi-set training mode runs ``K`` PDS chains against one shared
denoiser per iteration and stores every denoiser; inference replays the
stored sequence on new data without any training.  With ``K = 1`` training
is the scan-specific method.

Each data set is normalized by the 99th percentile of ``|A^H y|`` before
reconstruction (and rescaled afterwards) so that denoisers trained on one
set see intensities on the same scale as another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..denoiser import (
    DenoiserBank,
    TrainConfig,
    TrainingError,
    forward,
    init_params,
    sample_patches,
    snr_to_variance,
    train,
)
from ..numerics import make_rng
from .config import ConfigurationError, SolverConfig
from .discrepancy import DegenerateFitError, discrepancy_update
from .pds import PDSChains, Trace, make_fixed_denoiser

__all__ = [
    "MeasurementSet",
    "ReconResult",
    "reside_s",
    "reside_m_train",
    "reside_m_infer",
    "run_pnp",
    "normalization_scale",
]

log = logging.getLogger(__name__)

# rng stream keys, combined with (cfg.seed, key, t)
_PATCH_STREAM, _INIT_STREAM, _TRAIN_STREAM = 10, 11, 12


@dataclass
class MeasurementSet:
    """``K`` forward operators with their data and noise variances."""

    ops: list
    ys: list
    sigma2s: list

    def __post_init__(self):
        if not self.ops:
            raise ValueError("a measurement set needs at least one member")
        if not len(self.ops) == len(self.ys) == len(self.sigma2s):
            raise ValueError("ops, ys and sigma2s must have equal length")

    def __len__(self):
        return len(self.ops)

    @property
    def pooled_sigma2(self) -> float:
        """Noise variance averaged over members, weighted by measurement count."""
        m = np.array([op.num_measurements for op in self.ops], dtype=float)
        return float(np.dot(m, self.sigma2s) / m.sum())

    @classmethod
    def from_acquisitions(cls, acqs) -> "MeasurementSet":
        return cls([a.op for a in acqs], [a.y for a in acqs], [a.sigma2 for a in acqs])


@dataclass
class ReconResult:
    images: list
    trace: Trace
    bank: DenoiserBank | None = None
    norm_sq: float | None = None
    sigma2: float | None = None
    scales: list = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return self.images[0]


def normalization_scale(op, y) -> float:
    s = float(np.percentile(np.abs(op.adjoint(y)), 99))
    return s if s > 0 else 1.0


def _prepare(ops, ys, sigma2s, cfg: SolverConfig):
    """Normalized data, per-set scales and the pooled normalized noise variance."""
    scales = [normalization_scale(op, y) if cfg.normalize else 1.0 for op, y in zip(ops, ys)]
    ys_n = [np.asarray(y) / s for y, s in zip(ys, scales)]
    if cfg.sigma2 is not None:
        sigma2s = [cfg.sigma2] * len(ops)
    if any(s is None for s in sigma2s):
        raise ConfigurationError("noise variance unknown: pass sigma2 or set cfg.sigma2")
    sig_n = [max(float(s2) / s**2, cfg.sigma2_floor) for s2, s in zip(sigma2s, scales)]
    pooled = MeasurementSet(list(ops), ys_n, sig_n).pooled_sigma2
    return ys_n, scales, pooled


def _scaled_truth(x_true, scales):
    if x_true is None:
        return None
    return [None if xt is None else np.asarray(xt) / s for xt, s in zip(x_true, scales)]


def _check_patch_shape(cfg: SolverConfig, images):
    for im in images:
        if len(cfg.patch_shape) != im.ndim:
            raise ConfigurationError(
                f"patch_shape {cfg.patch_shape} does not match image dimensionality {im.shape}"
            )
        if any(p > s for p, s in zip(cfg.patch_shape, im.shape)):
            raise ConfigurationError(f"patch_shape {cfg.patch_shape} larger than image {im.shape}")


def reside_m_train(msets: MeasurementSet, cfg: SolverConfig, x_true=None, progress=None) -> ReconResult:
    """Train the per-iteration denoiser sequence on ``K`` measurement sets.

    Returns a :class:`ReconResult` whose ``bank`` holds ``theta_1..theta_T``
    and whose ``images`` are the ``K`` training-stage reconstructions.
    """
    if cfg.denoiser != "cnn":
        raise ConfigurationError("self-calibrated training requires denoiser='cnn'")
    ops = msets.ops
    ys_n, scales, sigma2 = _prepare(ops, msets.ys, msets.sigma2s, cfg)
    _check_patch_shape(cfg, [np.empty(op.image_shape) for op in ops])
    dtype = np.dtype(cfg.precision)
    ndim = len(cfg.patch_shape)
    chains = PDSChains(ops, ys_n, sigma2, cfg.nu, x_true=_scaled_truth(x_true, scales),
                       divergence_factor=cfg.divergence_factor, norm_rng=cfg.seed, norm_iters=cfg.norm_iters,
                       gamma=cfg.gamma)
    bank = DenoiserBank(cfg.iterations, cfg.bank_stride)
    m_total = chains.num_measurements
    s2 = None if cfg.s0_sq is None else cfg.s0_sq / float(np.mean(np.square(scales)))
    adapt = True
    theta = None
    for t in range(1, cfg.iterations + 1):
        us = chains.intermediate()
        if s2 is None:
            s2 = snr_to_variance(us, cfg.initial_snr_db)
        patches = sample_patches(us, cfg.num_patches, cfg.patch_shape, make_rng(cfg.seed, _PATCH_STREAM, t))
        if cfg.warm_start and theta is not None:
            theta_init = theta
        else:
            theta_init = init_params(make_rng(cfg.seed, _INIT_STREAM, t), ndim, cfg.num_layers,
                                     cfg.num_kernels, dtype)
        tcfg = TrainConfig(cfg.epochs, cfg.learning_rate, cfg.batch_size, s2)
        try:
            theta = train(theta_init, patches, tcfg, make_rng(cfg.seed, _TRAIN_STREAM, t))
        except TrainingError as exc:
            exc.iteration = t
            exc.trace = chains.trace
            exc.args = (f"iteration {t}: {exc.args[0]}",)
            raise
        theta.iteration = t
        xs = [forward(theta, u) for u in us]
        residual = chains.advance(xs)
        c_t = None
        s2_used = s2
        if adapt:
            try:
                c_t, s2 = discrepancy_update(s2, residual, m_total, sigma2, cfg.tau, cfg.alpha)
            except DegenerateFitError:
                log.info("exact data fit at iteration %d; noise level frozen", t)
                adapt = False
        bank.add(t, theta, s2_used)
        chains.trace.append(t, residual, c_t, s2, chains.quality())
        if progress is not None:
            progress(t, chains.trace)
        chains.check_divergence()
    images = [x * s for x, s in zip(chains.xs, scales)]
    return ReconResult(images, chains.trace, bank, chains.norm_sq, sigma2, scales)


def reside_s(op, y, cfg: SolverConfig, sigma2: float | None = None, x_true=None, progress=None) -> ReconResult:
    """Scan-specific reconstruction: multi-set training with a single set."""
    mset = MeasurementSet([op], [y], [sigma2])
    return reside_m_train(mset, cfg, None if x_true is None else [x_true], progress)


def reside_m_infer(op, y, bank: DenoiserBank, cfg: SolverConfig, sigma2: float | None = None,
                   x_true=None, norm_sq: float | None = None) -> ReconResult:
    """PnP reconstruction whose iteration ``t`` applies the stored ``theta_t``.

    No training happens.  ``norm_sq`` (and ``cfg.sigma2``) may be pinned to
    the training-stage values to replay a training chain exactly.
    """
    if bank is None or not bank.params:
        raise ConfigurationError("denoiser bank is empty")
    if len(bank) < cfg.iterations:
        raise ConfigurationError(f"bank covers {len(bank)} iterations, config asks for {cfg.iterations}")
    arch = bank.architecture()
    if arch.get("ndim") != len(op.image_shape):
        raise ConfigurationError(f"bank holds {arch.get('ndim')}D denoisers, data is {len(op.image_shape)}D")
    ys_n, scales, sig = _prepare([op], [y], [sigma2], cfg)
    chains = PDSChains([op], ys_n, sig, cfg.nu, norm_sq, _scaled_truth(None if x_true is None else [x_true], scales),
                       cfg.divergence_factor, norm_rng=cfg.seed, norm_iters=cfg.norm_iters, gamma=cfg.gamma)
    for t in range(1, cfg.iterations + 1):
        u = chains.intermediate()[0]
        residual = chains.advance([forward(bank.for_iteration(t), u)])
        s2 = bank.noise_vars[t - 1] if t - 1 < len(bank.noise_vars) else None
        chains.trace.append(t, residual, None, s2, chains.quality())
        chains.check_divergence()
    return ReconResult([chains.xs[0] * scales[0]], chains.trace, bank, chains.norm_sq, sig, scales)


def run_pnp(op, y, cfg: SolverConfig, sigma2: float | None = None, x_true=None) -> ReconResult:
    """PnP-PDS with the fixed ``identity`` or ``baseline`` denoiser from ``cfg``."""
    f = make_fixed_denoiser(cfg.denoiser, cfg.baseline_strength)
    ys_n, scales, sig = _prepare([op], [y], [sigma2], cfg)
    chains = PDSChains([op], ys_n, sig, cfg.nu, None, _scaled_truth(None if x_true is None else [x_true], scales),
                       cfg.divergence_factor, norm_rng=cfg.seed, norm_iters=cfg.norm_iters, gamma=cfg.gamma)
    for _ in range(cfg.iterations):
        residual = chains.advance([f(chains.intermediate()[0])])
        chains.trace.append(chains.t, residual, rsnr_db=chains.quality())
        chains.check_divergence()
    return ReconResult([chains.xs[0] * scales[0]], chains.trace, None, chains.norm_sq, sig, scales)

