"""Patch sampling and self-supervised (noisy-as-clean) denoiser training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import randn_complex
from .network import DenoiserParams, loss_and_grad

__all__ = [
    "Adam",
    "PatchSet",
    "TrainConfig",
    "TrainingError",
    "sample_patches",
    "snr_to_variance",
    "train",
]


class TrainingError(RuntimeError):
    """Loss became non-finite; ``params`` holds the last finite parameters."""

    def __init__(self, message, params=None, losses=None):
        super().__init__(message)
        self.params = params
        self.losses = losses or []


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 32
    noise_var: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.noise_var >= 0:
            raise ValueError("noise_var must be >= 0")


@dataclass
class PatchSet:
    """Complex patches stacked along axis 0 plus where they came from.

    ``sources[i]`` is ``(image_index, corner)`` for patch ``i``.
    """

    patches: np.ndarray
    sources: list = field(default_factory=list)

    def __len__(self):
        return self.patches.shape[0]

    def counts(self, num_images: int) -> np.ndarray:
        return np.bincount([s[0] for s in self.sources], minlength=num_images)


class Adam:
    """Adam with bias correction, keeping first/second moments per array."""

    def __init__(self, params: DenoiserParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in params.arrays]
        self.v = [np.zeros_like(a) for a in params.arrays]
        self.step_count = 0

    def step(self, params: DenoiserParams, grads: DenoiserParams) -> None:
        """Update ``params`` in place."""
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for p, g, m, v in zip(params.arrays, grads.arrays, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype, copy=False)


def snr_to_variance(images, snr_db: float) -> float:
    """Noise variance giving ``snr_db`` relative to the mean pixel power."""
    if isinstance(images, (list, tuple)):
        power = np.mean(np.concatenate([np.abs(np.ravel(im)) ** 2 for im in images]))
    else:
        power = np.mean(np.abs(np.asarray(images)) ** 2)
    if power == 0:
        raise ValueError("signal is zero; SNR undefined")
    return float(power / 10.0 ** (snr_db / 10.0))


def sample_patches(images, num_patches: int, patch_shape, rng) -> PatchSet:
    """Crop ``num_patches`` uniformly positioned patches, spread evenly over images.

    Image ``k`` contributes ``num_patches // K`` patches, plus one more for
    the first ``num_patches % K`` images.
    """
    if isinstance(images, np.ndarray):
        images = [images]
    if num_patches < 1:
        raise ValueError("num_patches must be >= 1")
    patch_shape = tuple(int(p) for p in patch_shape)
    for im in images:
        if im.ndim != len(patch_shape) or any(p > s for p, s in zip(patch_shape, im.shape)):
            raise ValueError(f"patch {patch_shape} does not fit inside image {im.shape}")
    k = len(images)
    per_image = [num_patches // k + (1 if i < num_patches % k else 0) for i in range(k)]
    dtype = np.result_type(*images)
    out = np.empty((num_patches, *patch_shape), dtype=dtype)
    sources = []
    n = 0
    for idx, (im, count) in enumerate(zip(images, per_image)):
        highs = np.array([s - p + 1 for s, p in zip(im.shape, patch_shape)])
        corners = rng.integers(0, highs, size=(count, len(patch_shape)))
        for corner in corners:
            sl = tuple(slice(c, c + p) for c, p in zip(corner, patch_shape))
            out[n] = im[sl]
            sources.append((idx, tuple(int(c) for c in corner)))
            n += 1
    return PatchSet(out, sources)


def train(params: DenoiserParams, patches, cfg: TrainConfig, rng, return_losses: bool = False):
    """Fit ``params`` (copied, not mutated) to remove ``N(0, noise_var)`` noise.

    Each epoch draws fresh noise for every patch, shuffles, and takes Adam
    steps over minibatches of ``cfg.batch_size``.
    """
    clean = patches.patches if isinstance(patches, PatchSet) else np.asarray(patches)
    num = clean.shape[0]
    if num < 1:
        raise ValueError("need at least one patch")
    params = params.copy()
    last_good = params.copy()
    opt = Adam(params, lr=cfg.learning_rate)
    cdtype = np.result_type(params.dtype, np.complex64)
    losses = []
    for epoch in range(cfg.epochs):
        noisy = clean + randn_complex(rng, clean.shape, cfg.noise_var, dtype=cdtype)
        order = rng.permutation(num)
        total = 0.0
        for start in range(0, num, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(params, noisy[batch], clean[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch + 1}", last_good, losses)
            total += loss * len(batch)
            opt.step(params, grads)
        epoch_loss = total / num
        losses.append(epoch_loss)
        if not all(np.all(np.isfinite(a)) for a in params.arrays):
            raise TrainingError(f"non-finite parameters after epoch {epoch + 1}", last_good, losses)
        last_good = params.copy()
    if return_losses:
        return params, losses
    return params
