"""Reconstruction SNR and SSIM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = ["QualityReport", "rsnr", "ssim", "ssim_map", "gaussian_window", "quality_report"]

WIN_SIZE = 11
WIN_SIGMA = 1.5
K1, K2 = 0.01, 0.03


@dataclass
class QualityReport:
    rsnr_db: float
    ssim: float
    per_frame_rsnr_db: list = field(default_factory=list)
    per_frame_ssim: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if np.isinf(v) else float(v)

        return {
            "rsnr_db": enc(self.rsnr_db),
            "ssim": float(self.ssim),
            "per_frame_rsnr_db": [enc(v) for v in self.per_frame_rsnr_db],
            "per_frame_ssim": [float(v) for v in self.per_frame_ssim],
        }


def rsnr(x_true: np.ndarray, x_hat: np.ndarray) -> float:
    """``20 log10(||x|| / ||x - x_hat||)`` in dB; ``inf`` for a perfect match.

    The reference image comes first.
    """
    x_true = np.asarray(x_true)
    x_hat = np.asarray(x_hat)
    if x_true.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x_true.shape} vs {x_hat.shape}")
    signal = np.linalg.norm(x_true.ravel())
    if signal == 0:
        raise ValueError("reference image is zero")
    err = np.linalg.norm((x_true - x_hat).ravel())
    if err == 0:
        return float("inf")
    return float(20.0 * np.log10(signal / err))


def gaussian_window(size: int = WIN_SIZE, sigma: float = WIN_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(x: np.ndarray, y: np.ndarray, data_range: float) -> np.ndarray:
    """Local SSIM over every fully contained 11x11 window of two 2D images."""
    if x.ndim != 2 or min(x.shape) < WIN_SIZE:
        raise ValueError(f"SSIM needs 2D images of at least {WIN_SIZE}x{WIN_SIZE}, got {x.shape}")
    w = gaussian_window()
    r = WIN_SIZE // 2

    def filt(a):
        return ndimage.correlate(a, w, mode="reflect")[r:-r, r:-r]

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(x_true_mag: np.ndarray, x_hat_mag: np.ndarray, data_range: float | None = None) -> float:
    """Mean SSIM of magnitude images (Gaussian window, sigma 1.5).

    ``data_range`` defaults to ``max(x_true_mag)``.  Inputs with three axes
    are treated as ``(frames, ny, nx)`` and scored frame by frame.
    """
    x = np.asarray(x_true_mag, dtype=np.float64)
    y = np.asarray(x_hat_mag, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if data_range is None:
        data_range = float(x.max())
    if x.ndim == 3:
        return float(np.mean([ssim_map(a, b, data_range).mean() for a, b in zip(x, y)]))
    return float(ssim_map(x, y, data_range).mean())


def quality_report(x_true: np.ndarray, x_hat: np.ndarray) -> QualityReport:
    x_true = np.asarray(x_true)
    x_hat = np.asarray(x_hat)
    mag_t, mag_h = np.abs(x_true), np.abs(x_hat)
    report = QualityReport(rsnr(x_true, x_hat), ssim(mag_t, mag_h))
    if x_true.ndim == 3:
        rng_ = float(mag_t.max())
        report.per_frame_rsnr_db = [rsnr(a, b) for a, b in zip(x_true, x_hat)]
        report.per_frame_ssim = [float(ssim_map(a, b, rng_).mean()) for a, b in zip(mag_t, mag_h)]
    return report
