"""Trainable residual CNN denoiser (forward, gradients, Adam, storage)."""

from .network import DenoiserParams, forward, from_channels, init_params, loss_and_grad, to_channels
from .storage import DenoiserBank, decode_params, encode_params, load_params, save_params
from .training import (
    Adam,
    PatchSet,
    TrainConfig,
    TrainingError,
    sample_patches,
    snr_to_variance,
    train,
)

__all__ = [
    "Adam",
    "DenoiserBank",
    "DenoiserParams",
    "PatchSet",
    "TrainConfig",
    "TrainingError",
    "decode_params",
    "encode_params",
    "forward",
    "from_channels",
    "init_params",
    "load_params",
    "loss_and_grad",
    "sample_patches",
    "save_params",
    "snr_to_variance",
    "to_channels",
    "train",
]
