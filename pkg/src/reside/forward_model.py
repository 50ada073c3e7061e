"""Multi-coil Cartesian forward operator and calibration helpers."""

from __future__ import annotations

import numpy as np

from .numerics import fftc, ifftc, make_rng, randn_complex
from .sampling import SamplingMask

__all__ = [
    "ForwardOperator",
    "operator_norm_sq",
    "estimate_noise_variance",
    "estimate_sos_maps",
    "normalize_maps",
    "time_average_kspace",
]

FFT_AXES = (-2, -1)


class ForwardOperator:
    """``y = mask . F(S_c x)`` for every coil ``c``, packed into one vector.

    Parameters
    ----------
    maps : ndarray, shape (C, ny, nx)
        Coil sensitivities.  For dynamic images of shape ``(T, ny, nx)`` the
        same maps are used in every frame.
    mask : SamplingMask or ndarray of bool
        Phase-encode mask or a full k-space pattern.
    image_shape : tuple, optional
        Defaults to ``maps.shape[1:]`` (static) or ``(T, ny, nx)`` for a
        dynamic mask.

    Notes
    -----
    Measurements are ordered coil-major, then sampled locations in raster
    order of the centered k-space grid.
    """

    def __init__(self, maps: np.ndarray, mask, image_shape=None):
        maps = np.asarray(maps)
        if maps.ndim < 3:
            raise ValueError(f"maps must have shape (C, ny, nx), got {maps.shape}")
        if image_shape is None:
            if isinstance(mask, SamplingMask) and mask.lines.ndim == 2:
                image_shape = (mask.num_frames, *maps.shape[1:])
            else:
                image_shape = maps.shape[1:]
        self.image_shape = tuple(int(s) for s in image_shape)
        if self.image_shape[-maps.ndim + 1:] != maps.shape[1:]:
            raise ValueError(f"maps {maps.shape} incompatible with image shape {self.image_shape}")
        self.maps = maps.astype(np.complex128, copy=False)
        extra = len(self.image_shape) - (maps.ndim - 1)
        self._maps_b = self.maps.reshape(maps.shape[:1] + (1,) * extra + maps.shape[1:])
        if isinstance(mask, SamplingMask):
            self.mask = mask
            pattern = mask.pattern(self.image_shape)
        else:
            pattern = np.broadcast_to(np.asarray(mask, dtype=bool), self.image_shape).copy()
            self.mask = SamplingMask(pattern, 0, "custom")
        self.pattern = pattern
        self._pattern_b = np.broadcast_to(pattern, (self.num_coils, *self.image_shape))
        self.num_sampled = int(pattern.sum())
        if self.num_sampled == 0:
            raise ValueError("mask samples no k-space locations")

    @property
    def num_coils(self) -> int:
        return self.maps.shape[0]

    @property
    def num_measurements(self) -> int:
        return self.num_coils * self.num_sampled

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_measurements, int(np.prod(self.image_shape))

    @property
    def acceleration(self) -> float:
        return self.num_coils * int(np.prod(self.image_shape)) / self.num_measurements

    def coil_kspace(self, x: np.ndarray) -> np.ndarray:
        """Fully sampled coil k-space ``F(S_c x)``, shape ``(C, *image_shape)``."""
        return fftc(self._maps_b * x[None], axes=FFT_AXES)

    def sample(self, kspace: np.ndarray) -> np.ndarray:
        """Pick sampled locations out of a full ``(C, *image_shape)`` grid."""
        return kspace[self._pattern_b]

    def grid(self, y: np.ndarray) -> np.ndarray:
        """Zero-filled ``(C, *image_shape)`` grid holding measurement vector ``y``."""
        y = np.asarray(y)
        if y.shape != (self.num_measurements,):
            raise ValueError(f"expected {self.num_measurements} measurements, got shape {y.shape}")
        out = np.zeros((self.num_coils, *self.image_shape), dtype=np.result_type(y, np.complex64))
        out[self._pattern_b] = y
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != self.image_shape:
            raise ValueError(f"expected image of shape {self.image_shape}, got {x.shape}")
        return self.sample(self.coil_kspace(x))

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        imgs = ifftc(self.grid(y), axes=FFT_AXES)
        return np.sum(np.conj(self._maps_b) * imgs, axis=0)

    __call__ = apply

    def normal(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint(self.apply(x))

    def to_dense(self) -> np.ndarray:
        """Materialize the ``M x N`` matrix column by column (tiny problems only)."""
        m, n = self.shape
        dense = np.empty((m, n), dtype=np.complex128)
        e = np.zeros(n, dtype=np.complex128)
        for j in range(n):
            e[j] = 1.0
            dense[:, j] = self.apply(e.reshape(self.image_shape))
            e[j] = 0.0
        return dense


def operator_norm_sq(op: ForwardOperator, rng=0, iters: int = 200, tol: float = 1e-10) -> float:
    """Largest eigenvalue of ``A^H A`` by power iteration.

    Stops early once the Rayleigh quotient changes by less than ``tol``
    (relative) between iterations.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = make_rng(rng)
    v = randn_complex(rng, op.image_shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op.normal(v)
        lam_new = float(np.real(np.vdot(v, w)))
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def estimate_noise_variance(kspace: np.ndarray, fringe_fraction: float = 0.05, pattern=None) -> float:
    """Mean ``|k|^2`` in the four signal-free corners of centered k-space.

    The corner region spans the outermost ``fringe_fraction`` of phase-encode
    lines at each end and the same fraction of readout samples at each end.
    Leading axes (coils, frames) are pooled.  When ``pattern`` is given only
    sampled locations contribute.
    """
    if not 0.0 < fringe_fraction < 0.5:
        raise ValueError("fringe_fraction must lie in (0, 0.5)")
    kspace = np.asarray(kspace)
    ny, nx = kspace.shape[-2:]
    n_pe = int(np.floor(fringe_fraction * ny))
    n_ro = int(np.floor(fringe_fraction * nx))
    if n_pe == 0 or n_ro == 0:
        raise ValueError(f"fringe of {fringe_fraction} is empty for k-space of {ny}x{nx}")
    region = np.zeros((ny, nx), dtype=bool)
    rows = np.r_[0:n_pe, ny - n_pe:ny]
    cols = np.r_[0:n_ro, nx - n_ro:nx]
    region[np.ix_(rows, cols)] = True
    region = np.broadcast_to(region, kspace.shape)
    if pattern is not None:
        region = region & np.broadcast_to(np.asarray(pattern, dtype=bool), kspace.shape)
    if not region.any():
        raise ValueError("no sampled locations inside the fringe region")
    return float(np.mean(np.abs(kspace[region]) ** 2))


def normalize_maps(maps: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Divide maps by their root-sum-of-squares; pixels below ``floor * max`` become 0."""
    maps = np.asarray(maps, dtype=np.complex128)
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    keep = rss > floor * rss.max()
    out = np.zeros_like(maps)
    out[:, keep] = maps[:, keep] / rss[keep]
    return out


def estimate_sos_maps(kspace: np.ndarray, acs_width: int = 32) -> np.ndarray:
    """Coil maps from the central k-space of ``(C, ny, nx)`` calibration data.

    A separable Hamming window of width ``acs_width`` (clipped to the grid)
    low-passes each coil; the resulting coil images are divided by their
    root-sum-of-squares.
    """
    kspace = np.asarray(kspace)
    if kspace.ndim != 3:
        raise ValueError(f"expected (C, ny, nx) k-space, got {kspace.shape}")
    if not np.any(kspace):
        raise ValueError("calibration k-space is all zeros")
    window = np.ones(kspace.shape[1:])
    for axis, n in enumerate(kspace.shape[1:]):
        w = min(int(acs_width), n)
        profile = np.zeros(n)
        start = n // 2 - w // 2
        profile[start:start + w] = np.hamming(w) if w > 1 else 1.0
        shape = [1, 1]
        shape[axis] = n
        window = window * profile.reshape(shape)
    coil_imgs = ifftc(kspace * window, axes=FFT_AXES)
    return normalize_maps(coil_imgs)


def time_average_kspace(kspace: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Average zero-filled ``(C, T, ny, nx)`` k-space over frames where sampled."""
    kspace = np.asarray(kspace)
    pattern = np.asarray(pattern, dtype=bool)
    counts = pattern.sum(axis=0)
    total = kspace.sum(axis=1)
    out = np.zeros_like(total)
    hit = counts > 0
    out[:, hit] = total[:, hit] / counts[hit]
    return out
