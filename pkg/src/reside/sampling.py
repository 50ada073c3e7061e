"""Cartesian phase-encode undersampling masks.

Masks are stored in *centered* line order: index ``num_lines // 2`` is the
k-space center (DC), matching the centered transforms used by
:class:`reside.forward_model.ForwardOperator`.  Phase encoding runs along the
second-to-last image axis; every readout sample of a selected line is
acquired.

Three generators are provided:

* ``m1`` -- central ACS block plus a stratified pseudo-random draw (one line
  per equal-width bin of the non-ACS lines), which keeps gaps small;
* ``m2`` -- central ACS block plus a uniform random draw without replacement;
* ``m3`` -- dynamic, no ACS; each frame is stratified and the per-bin offsets
  cycle through a random permutation over time so the union of frames covers
  every line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SamplingMask",
    "make_mask_m1",
    "make_mask_m2",
    "make_mask_m3",
    "acceleration_rate",
    "acs_slice",
    "default_acs_width",
]

MASK_KINDS = ("m1", "m2", "m3", "custom")


@dataclass(frozen=True)
class SamplingMask:
    """Boolean phase-encode mask.

    ``lines`` has shape ``(num_lines,)`` for static data or
    ``(num_frames, num_lines)`` for dynamic series.  A ``custom`` mask may
    instead hold a full k-space sampling pattern with the image's shape.
    """

    lines: np.ndarray
    acs_width: int = 0
    kind: str = "custom"

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=bool)
        if lines.ndim < 1 or lines.size == 0:
            raise ValueError("mask must have at least one line")
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.kind!r}")
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "acs_width", int(self.acs_width))

    @property
    def num_lines(self) -> int:
        return self.lines.shape[-1]

    @property
    def num_frames(self) -> int:
        return self.lines.shape[0] if self.lines.ndim == 2 else 1

    @property
    def sampled_fraction(self) -> float:
        return float(self.lines.mean())

    def pattern(self, image_shape) -> np.ndarray:
        """Expand to a boolean k-space pattern of shape ``image_shape``."""
        image_shape = tuple(image_shape)
        if self.lines.shape == image_shape:
            return self.lines
        if len(image_shape) < 2:
            raise ValueError(f"image shape {image_shape} has no readout axis")
        if self.lines.ndim == 1:
            if image_shape[-2] != self.num_lines:
                raise ValueError(
                    f"mask has {self.num_lines} lines but image has {image_shape[-2]} phase encodes"
                )
            pat = self.lines[:, None]
        elif self.lines.ndim == 2:
            if len(image_shape) != 3 or image_shape[0] != self.num_frames or image_shape[1] != self.num_lines:
                raise ValueError(f"dynamic mask {self.lines.shape} incompatible with image {image_shape}")
            pat = self.lines[:, :, None]
        else:
            raise ValueError(f"mask of shape {self.lines.shape} incompatible with image {image_shape}")
        return np.broadcast_to(pat, image_shape).copy()


def acs_slice(num_lines: int, acs_width: int) -> slice:
    """Indices of the centered ACS block."""
    start = num_lines // 2 - acs_width // 2
    return slice(start, start + acs_width)


def _budget(num_lines: int, target_R: float) -> int:
    if not target_R >= 1.0:
        raise ValueError(f"target_R must be >= 1, got {target_R}")
    return max(1, int(round(num_lines / target_R)))


def default_acs_width(num_lines: int) -> int:
    """Ten percent of the phase-encode lines (32 of 320)."""
    return max(2, int(round(0.1 * num_lines)))


def _check_acs(num_lines: int, target_R: float, acs_width):
    if num_lines < 1:
        raise ValueError("num_lines must be positive")
    if acs_width is None:
        acs_width = min(default_acs_width(num_lines), _budget(num_lines, target_R))
    if not 0 <= acs_width <= num_lines:
        raise ValueError(f"acs_width={acs_width} not in [0, {num_lines}]")
    total = _budget(num_lines, target_R)
    if total < acs_width:
        raise ValueError(
            f"budget of {total} lines (R={target_R}) cannot hold an ACS block of {acs_width} lines"
        )
    lines = np.zeros(num_lines, dtype=bool)
    lines[acs_slice(num_lines, acs_width)] = True
    candidates = np.flatnonzero(~lines)
    return total - acs_width, lines, candidates, acs_width


def _stratified(rng: np.random.Generator, candidates: np.ndarray, count: int) -> np.ndarray:
    """One uniform draw from each of ``count`` near-equal bins of ``candidates``."""
    if count <= 0:
        return candidates[:0]
    edges = (np.arange(count + 1) * len(candidates)) // count
    picks = [rng.integers(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    return candidates[np.asarray(picks, dtype=int)]


def make_mask_m1(rng: np.random.Generator, num_lines: int, target_R: float, acs_width: int | None = None) -> SamplingMask:
    """Pseudo-random mask with a central ACS block.

    ACS lines count toward the ``round(num_lines / target_R)`` budget; the
    rest is spread with one line per equal-width bin of the non-ACS lines.
    ``acs_width=None`` uses :func:`default_acs_width`.
    """
    remaining, lines, candidates, acs_width = _check_acs(num_lines, target_R, acs_width)
    lines[_stratified(rng, candidates, remaining)] = True
    return SamplingMask(lines, acs_width, "m1")


def make_mask_m2(rng: np.random.Generator, num_lines: int, target_R: float, acs_width: int | None = None) -> SamplingMask:
    """Random mask with a central ACS block; non-ACS lines drawn uniformly."""
    remaining, lines, candidates, acs_width = _check_acs(num_lines, target_R, acs_width)
    if remaining > 0:
        lines[rng.choice(candidates, size=remaining, replace=False)] = True
    return SamplingMask(lines, acs_width, "m2")


def make_mask_m3(rng: np.random.Generator, num_lines: int, num_frames: int, target_R: float) -> SamplingMask:
    """Interleaved pseudo-random dynamic mask without a per-frame ACS region.

    Each frame samples ``ceil(num_lines / target_R)`` lines, one per bin.
    The bin widths never exceed ``ceil(target_R)``, and within a bin the
    selected offset walks through a random permutation frame by frame, so
    the union over ``num_frames >= target_R`` frames covers every line.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    if num_lines < 1:
        raise ValueError("num_lines must be positive")
    if not 1.0 <= target_R <= num_lines:
        raise ValueError(f"target_R must lie in [1, {num_lines}], got {target_R}")
    count = int(np.ceil(num_lines / target_R - 1e-12))
    edges = (np.arange(count + 1) * num_lines) // count
    lines = np.zeros((num_frames, num_lines), dtype=bool)
    for lo, hi in zip(edges[:-1], edges[1:]):
        width = hi - lo
        perm = rng.permutation(width)
        shift = rng.integers(width)
        frames = np.arange(num_frames)
        lines[frames, lo + perm[(frames + shift) % width]] = True
    return SamplingMask(lines, 0, "m3")


def acceleration_rate(mask: SamplingMask | np.ndarray, num_pixels: int, num_coils: int = 1) -> float:
    """Acceleration ``C * N / M`` with ``M`` the number of measured complex samples."""
    lines = mask.lines if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    if lines.size == 0:
        raise ValueError("empty mask")
    measured = num_coils * num_pixels * lines.mean()
    if measured == 0:
        raise ValueError("mask samples no k-space locations")
    return num_coils * num_pixels / measured
