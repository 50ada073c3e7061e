"""Unitary FFTs, complex Gaussian sampling and seeded random streams.

Complex arrays are plain ``numpy.ndarray`` objects (row-major, shape carried
by the array itself).  Randomness always flows through
:class:`numpy.random.Generator` instances built from a seed plus an optional
tuple of integer keys, so that e.g. patch sampling at iteration ``t`` can be
reproduced without replaying everything that came before it.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "fft",
    "ifft",
    "fftc",
    "ifftc",
    "randn_complex",
    "make_rng",
    "spawn_rng",
]


def _normalize_axes(ndim: int, axes: Iterable[int] | None) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    out = []
    for ax in axes:
        ax = int(ax)
        if not -ndim <= ax < ndim:
            raise ValueError(f"axis {ax} is out of bounds for array of dimension {ndim}")
        out.append(ax % ndim)
    if len(set(out)) != len(out):
        raise ValueError(f"repeated axis in {tuple(axes)}")
    return tuple(out)


def fft(a: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Orthonormal DFT of ``a`` along ``axes`` (all axes when ``None``).

    The ``1/sqrt(N)`` factor is applied in both directions, so :func:`ifft`
    is simultaneously the inverse and the adjoint.
    """
    a = np.asarray(a)
    axes = _normalize_axes(a.ndim, axes)
    if not axes:
        return a.astype(np.result_type(a, np.complex64), copy=True)
    return np.fft.fftn(a, axes=axes, norm="ortho")


def ifft(a: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Orthonormal inverse DFT; exact adjoint of :func:`fft`."""
    a = np.asarray(a)
    axes = _normalize_axes(a.ndim, axes)
    if not axes:
        return a.astype(np.result_type(a, np.complex64), copy=True)
    return np.fft.ifftn(a, axes=axes, norm="ortho")


def fftc(a: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Centered unitary DFT: DC of the output sits at index ``n // 2``."""
    a = np.asarray(a)
    axes = _normalize_axes(a.ndim, axes)
    return np.fft.fftshift(fft(np.fft.ifftshift(a, axes=axes), axes), axes=axes)


def ifftc(a: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Inverse (and adjoint) of :func:`fftc`."""
    a = np.asarray(a)
    axes = _normalize_axes(a.ndim, axes)
    return np.fft.fftshift(ifft(np.fft.ifftshift(a, axes=axes), axes), axes=axes)


def make_rng(seed: int | np.random.Generator | None, *keys: int) -> np.random.Generator:
    """Return a Philox-backed generator for ``(seed, *keys)``.

    Passing an existing generator returns it unchanged (keys are then
    ignored), which lets callers thread either a seed or a stream through
    the same argument.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = 0
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def spawn_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child streams from ``rng``."""
    return list(rng.spawn(n))


def randn_complex(
    rng: np.random.Generator,
    shape: int | Sequence[int],
    variance: float = 1.0,
    dtype=np.complex128,
) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with ``E|z|^2 = variance``.

    Real and imaginary parts are independent ``N(0, variance / 2)``.
    """
    variance = float(variance)
    if not variance >= 0.0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    real_dtype = np.finfo(np.dtype(dtype)).dtype
    parts = rng.standard_normal((2, *shape), dtype=np.float64)
    scale = np.sqrt(variance / 2.0)
    out = np.empty(shape, dtype=dtype)
    out.real = (scale * parts[0]).astype(real_dtype, copy=False)
    out.imag = (scale * parts[1]).astype(real_dtype, copy=False)
    return out
