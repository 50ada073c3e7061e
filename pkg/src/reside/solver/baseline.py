"""Orthogonal Haar wavelet soft-thresholding, a fixed non-learned denoiser."""

from __future__ import annotations

import numpy as np

__all__ = ["haar_forward", "haar_inverse", "soft_threshold", "baseline_shrink_denoiser"]

_S = 1.0 / np.sqrt(2.0)


def _haar_step(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    lo = (a[0::2] + a[1::2]) * _S
    hi = (a[0::2] - a[1::2]) * _S
    return np.moveaxis(np.concatenate([lo, hi], axis=0), 0, axis)


def _ihaar_step(c: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(c, axis, 0)
    n = c.shape[0] // 2
    lo, hi = c[:n], c[n:]
    out = np.empty_like(c)
    out[0::2] = (lo + hi) * _S
    out[1::2] = (lo - hi) * _S
    return np.moveaxis(out, 0, axis)


def haar_forward(a: np.ndarray, levels: int = 3) -> np.ndarray:
    """Multi-level separable Haar transform (Mallat layout, coarse block first).

    Every axis length must be divisible by ``2**levels``.
    """
    a = np.array(a, dtype=np.result_type(a, np.float64), copy=True)
    size = list(a.shape)
    for _ in range(levels):
        region = tuple(slice(0, s) for s in size)
        block = a[region]
        for axis in range(a.ndim):
            block = _haar_step(block, axis)
        a[region] = block
        size = [s // 2 for s in size]
    return a


def haar_inverse(c: np.ndarray, levels: int = 3) -> np.ndarray:
    c = np.array(c, copy=True)
    sizes = [[s >> lev for s in c.shape] for lev in range(levels)]
    for size in reversed(sizes):
        region = tuple(slice(0, s) for s in size)
        block = c[region]
        for axis in reversed(range(c.ndim)):
            block = _ihaar_step(block, axis)
        c[region] = block
    return c


def soft_threshold(v, strength: float):
    """``sign(v) * max(|v| - strength, 0)`` for real input."""
    return np.sign(v) * np.maximum(np.abs(v) - strength, 0.0)


def baseline_shrink_denoiser(u: np.ndarray, strength: float, levels: int = 3) -> np.ndarray:
    """Soft-threshold the Haar detail coefficients of the real and imaginary parts.

    Arrays whose axes are not multiples of ``2**levels`` are zero-padded
    for the transform and cropped afterwards.
    """
    if strength < 0:
        raise ValueError("strength must be >= 0")
    u = np.asarray(u)
    block = 2**levels
    pads = [(0, (-s) % block) for s in u.shape]
    coarse = tuple(slice(0, (s + p[1]) >> levels) for s, p in zip(u.shape, pads))
    crop = tuple(slice(0, s) for s in u.shape)
    parts = [u.real, u.imag] if np.iscomplexobj(u) else [u]
    out = []
    for part in parts:
        c = haar_forward(np.pad(part, pads), levels)
        keep = c[coarse].copy()
        c = soft_threshold(c, strength)
        c[coarse] = keep
        out.append(haar_inverse(c, levels)[crop])
    return out[0] + 1j * out[1] if len(out) == 2 else out[0]
