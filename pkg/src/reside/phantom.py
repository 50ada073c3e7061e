"""Synthetic brain-like and perfusion-like phantoms with smooth coil maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .forward_model import ForwardOperator, normalize_maps
from .numerics import make_rng, randn_complex
from .sampling import SamplingMask

__all__ = [
    "PhantomSpec",
    "SimulatedAcquisition",
    "make_static_phantom",
    "make_dynamic_phantom",
    "dynamic_components",
    "make_coil_maps",
    "gamma_variate",
    "simulate_acquisition",
]

# (intensity, center_x, center_y, semi_x, semi_y, angle_deg), unit-square coordinates
_HEAD_ELLIPSES = [
    (1.00, 0.00, 0.00, 0.69, 0.92, 0),
    (-0.75, 0.00, -0.0184, 0.6624, 0.874, 0),
    (-0.20, 0.22, 0.00, 0.11, 0.31, -18),
    (-0.20, -0.22, 0.00, 0.16, 0.41, 18),
    (0.15, 0.00, 0.35, 0.21, 0.25, 0),
    (0.10, 0.00, 0.10, 0.046, 0.046, 0),
    (0.10, 0.00, -0.10, 0.046, 0.046, 0),
    (0.12, -0.08, -0.605, 0.046, 0.023, 0),
    (0.12, 0.00, -0.606, 0.023, 0.023, 0),
    (0.12, 0.06, -0.605, 0.023, 0.046, 0),
]


@dataclass
class PhantomSpec:
    """Parameters of a synthetic phantom.

    ``blood_peak`` and ``tissue_peak`` are fractions of the series length at
    which the two contrast curves reach their maxima; ``uptake`` is the
    gamma-variate shape exponent.
    """

    image_shape: tuple = (128, 128)
    num_coils: int = 4
    dynamic: bool = False
    num_frames: int = 16
    blood_peak: float = 0.3
    tissue_peak: float = 0.55
    uptake: float = 3.0
    seed: int = 0

    def __post_init__(self):
        self.image_shape = tuple(int(s) for s in self.image_shape)


@dataclass
class SimulatedAcquisition:
    x: np.ndarray
    maps: np.ndarray
    mask: SamplingMask
    op: ForwardOperator = field(repr=False)
    y: np.ndarray = field(repr=False)
    sigma2: float
    acceleration: float


def _grid(shape):
    ny, nx = shape
    yy, xx = np.meshgrid(np.linspace(-1, 1, ny), np.linspace(-1, 1, nx), indexing="ij")
    return xx, yy


def _ellipse(xx, yy, cx, cy, ax, ay, angle_deg):
    t = np.deg2rad(angle_deg)
    xr = (xx - cx) * np.cos(t) + (yy - cy) * np.sin(t)
    yr = -(xx - cx) * np.sin(t) + (yy - cy) * np.cos(t)
    return (xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0


# Gaussian point-spread width in pixels; keeps the k-space corners close to
# signal-free, as for a band-limited acquisition
PSF_SIGMA = 0.6


def _apodize(img):
    return ndimage.gaussian_filter(img, PSF_SIGMA, mode="constant")


def _check_shape(shape):
    if len(shape) != 2 or min(shape) < 32:
        raise ValueError(f"phantom needs a 2D shape of at least 32x32, got {shape}")


def _smooth_phase(rng, shape, strength=np.pi / 3):
    xx, yy = _grid(shape)
    a, b, c = rng.uniform(-1, 1, size=3)
    return strength * (0.6 * a * xx + 0.6 * b * yy + 0.4 * c * xx * yy)


def make_coil_maps(shape, num_coils: int, rng) -> np.ndarray:
    """Gaussian coil profiles around the field of view, SOS-normalized."""
    if num_coils < 1:
        raise ValueError("num_coils must be >= 1")
    rng = make_rng(rng)
    xx, yy = _grid(shape)
    maps = np.empty((num_coils, *shape), dtype=np.complex128)
    offset = rng.uniform(0, 2 * np.pi)
    for c in range(num_coils):
        ang = offset + 2 * np.pi * c / num_coils
        cx, cy = 1.3 * np.cos(ang), 1.3 * np.sin(ang)
        width = rng.uniform(0.9, 1.3)
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * width**2))
        kx, ky = rng.uniform(-0.5, 0.5, size=2)
        maps[c] = mag * np.exp(1j * (np.pi * (kx * xx + ky * yy) + rng.uniform(0, 2 * np.pi)))
    if num_coils == 1:
        maps[0] = np.abs(maps[0])
    return normalize_maps(maps)


def _fine_details(rng, shape, head):
    """Thin lines, point pairs and a striped patch placed inside ``head``."""
    ny, nx = shape
    img = np.zeros(shape)
    xx, yy = _grid(shape)
    # thin lines of one pixel width at a few orientations
    for _ in range(3):
        r0 = int(rng.integers(ny // 4, 3 * ny // 4))
        c0 = int(rng.integers(nx // 4, nx // 2))
        length = int(rng.integers(nx // 8, nx // 4))
        vertical = bool(rng.integers(2))
        amp = rng.uniform(0.15, 0.3)
        if vertical:
            img[r0:r0 + length, c0] += amp
        else:
            img[r0, c0:c0 + length] += amp
    # point pairs separated by two pixels
    for _ in range(4):
        r = int(rng.integers(ny // 3, 2 * ny // 3))
        c = int(rng.integers(nx // 2, 3 * nx // 4))
        amp = rng.uniform(0.2, 0.35)
        img[r, c] += amp
        img[r, c + 2] += amp
    # striped disc with period 4 pixels
    cy, cx = rng.uniform(-0.35, -0.15), rng.uniform(0.15, 0.35)
    disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= (0.12) ** 2
    stripes = 0.5 * (1 + np.cos(2 * np.pi * np.arange(nx) / 4.0))[None, :]
    img += 0.12 * disc * stripes
    # gentle multi-scale texture
    tex = np.zeros(shape)
    for scale in (4, 8, 16):
        fx = rng.uniform(0.5, 1.0) * nx / scale
        fy = rng.uniform(0.5, 1.0) * ny / scale
        tex += np.cos(np.pi * (fx * xx + rng.uniform())) * np.cos(np.pi * (fy * yy + rng.uniform()))
    img += 0.03 * tex / 3
    return img * head


def make_static_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Brain-like complex image (max magnitude 1) and SOS-normalized coil maps."""
    shape = spec.image_shape
    _check_shape(shape)
    rng = make_rng(spec.seed, 0)
    xx, yy = _grid(shape)
    mag = np.zeros(shape)
    for inten, cx, cy, ax, ay, ang in _HEAD_ELLIPSES:
        jitter = rng.uniform(0.95, 1.05)
        mag += inten * jitter * _ellipse(xx, yy, cx, cy, ax, ay, ang)
    head = _ellipse(xx, yy, 0.0, -0.0184, 0.6624, 0.874, 0)
    # lift the "brain" matter away from the skull level and add details
    mag = np.where(head, mag + 0.35, mag)
    mag += _fine_details(rng, shape, head)
    mag = _apodize(np.clip(mag, 0.0, None))
    mag /= mag.max()
    x = mag * np.exp(1j * _smooth_phase(rng, shape))
    maps = make_coil_maps(shape, spec.num_coils, make_rng(spec.seed, 1))
    return x, maps


def gamma_variate(t: np.ndarray, onset: float, peak: float, shape: float) -> np.ndarray:
    """Unit-peak gamma-variate bolus curve, zero before ``onset``."""
    t = np.asarray(t, dtype=float)
    s = np.clip((t - onset) / (peak - onset), 0.0, None)
    return s**shape * np.exp(shape * (1.0 - s))


def dynamic_components(spec: PhantomSpec):
    """Static base, per-class masks and per-class curves of the dynamic phantom.

    Returns ``(base, masks, curves, phase)`` with ``masks`` and ``curves``
    keyed by class name (``"blood"``, ``"tissue"``).  The magnitude of
    frame ``t`` is ``base + sum_k masks[k] * curves[k][t]``.
    """
    shape = spec.image_shape
    _check_shape(shape)
    if spec.num_frames < 2:
        raise ValueError("dynamic phantom needs num_frames >= 2")
    if not 0 < spec.blood_peak < spec.tissue_peak <= 1:
        raise ValueError("need 0 < blood_peak < tissue_peak <= 1")
    rng = make_rng(spec.seed, 2)
    xx, yy = _grid(shape)
    body = _ellipse(xx, yy, 0, 0, 0.85, 0.7, 0)
    cx, cy = rng.uniform(-0.1, 0.1, size=2)
    lv = _ellipse(xx, yy, cx, cy, 0.22, 0.25, 0)
    myo = _ellipse(xx, yy, cx, cy, 0.34, 0.37, 0) & ~lv
    rv = _ellipse(xx, yy, cx - 0.42, cy + 0.05, 0.14, 0.26, 15) & ~myo & ~lv
    base = 0.25 * body + 0.05 * (lv | rv) + 0.1 * myo
    # static fine structure outside the heart
    details = _fine_details(rng, shape, body & ~(lv | rv | myo))
    base = _apodize(base + 0.6 * details)
    masks = {"blood": _apodize((lv | rv).astype(float)), "tissue": _apodize(myo.astype(float))}

    n = spec.num_frames
    t = np.arange(n, dtype=float)
    span = n - 1
    blood = gamma_variate(t, 0.05 * span, spec.blood_peak * span, spec.uptake)
    tissue = gamma_variate(t, 0.15 * span, spec.tissue_peak * span, 0.7 * spec.uptake)
    curves = {"blood": 0.65 * blood, "tissue": 0.3 * tissue}
    # limit frame-to-frame change so every pixel moves by at most 0.2 per frame
    for key in curves:
        step = np.max(np.abs(np.diff(curves[key]))) if n > 1 else 0.0
        if step > 0.19:
            curves[key] = curves[key] * (0.19 / step)
    phase = _smooth_phase(rng, shape)
    return base, masks, curves, phase


def make_dynamic_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Perfusion-like ``(T, ny, nx)`` series and SOS-normalized coil maps."""
    base, masks, curves, phase = dynamic_components(spec)
    mag = np.repeat(base[None], spec.num_frames, axis=0)
    for key, m in masks.items():
        mag = mag + m[None] * curves[key][:, None, None]
    peak = mag.max()
    if peak > 1.0:
        raise ValueError("dynamic phantom intensities exceed 1")
    x = mag * np.exp(1j * phase)[None]
    maps = make_coil_maps(spec.image_shape, spec.num_coils, make_rng(spec.seed, 3))
    return x, maps


def simulate_acquisition(x, maps, mask, target_snr_db: float, rng) -> SimulatedAcquisition:
    """Noisy undersampled measurements ``y = A x + noise`` at a target SNR.

    The noise variance is ``mean |A x|^2 / 10**(snr/10)`` over sampled
    locations.  ``target_snr_db = inf`` disables noise (``sigma2 = 0``).
    """
    x = np.asarray(x)
    op = ForwardOperator(maps, mask, x.shape)
    clean = op.apply(x)
    power = float(np.mean(np.abs(clean) ** 2))
    if power == 0.0:
        raise ValueError("signal is zero; SNR undefined")
    if np.isinf(target_snr_db) and target_snr_db > 0:
        sigma2 = 0.0
        y = clean
    else:
        sigma2 = power / 10.0 ** (target_snr_db / 10.0)
        y = clean + randn_complex(make_rng(rng), clean.shape, sigma2)
    return SimulatedAcquisition(x, op.maps, op.mask, op, y, sigma2, op.acceleration)
