"""Residual convolutional denoiser with hand-written reverse-mode gradients.

The network acts on complex images split into two real channels (real,
imaginary).  It is a plain stack of ``num_layers`` 'same'-padded
convolutions with ReLU between them and no activation after the last one;
the stack predicts the noise, which is subtracted from the input::

    f(u) = u - net(u)

Works for 2D images (3x3 kernels) and 3D volumes / image series (3x3x3).
Arrays are channels-last: ``(batch, *spatial, channels)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "DenoiserParams",
    "init_params",
    "forward",
    "loss_and_grad",
    "to_channels",
    "from_channels",
]

KERNEL_SIZE = 3


@dataclass
class DenoiserParams:
    """Convolution kernels and biases of one denoiser.

    ``weights[l]`` has shape ``(c_in, 3, 3[, 3], c_out)`` and ``biases[l]``
    shape ``(c_out,)``.  ``iteration`` records which outer iteration
    produced the parameters (0 when untrained).
    """

    weights: list
    biases: list
    ndim: int = 2
    iteration: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def num_kernels(self) -> int:
        return self.weights[0].shape[-1] if self.num_layers > 1 else 0

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def arrays(self) -> list:
        """Parameters in storage order ``W0, b0, W1, b1, ...``."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def architecture(self) -> dict:
        return {
            "ndim": self.ndim,
            "num_layers": self.num_layers,
            "num_kernels": self.num_kernels,
            "kernel_size": KERNEL_SIZE,
            "channels": 2,
            "dtype": np.dtype(self.dtype).name,
        }

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.ndim,
            self.iteration,
            dict(self.meta),
        )

    def astype(self, dtype) -> "DenoiserParams":
        return DenoiserParams(
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.ndim,
            self.iteration,
            dict(self.meta),
        )

    def zeros_like(self) -> "DenoiserParams":
        return DenoiserParams(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
            self.ndim,
            self.iteration,
        )


def init_params(rng, ndim: int = 2, num_layers: int = 5, num_kernels: int = 128,
                dtype=np.float32, final_scale: float = 0.1) -> DenoiserParams:
    """He-initialized parameters; the last layer is shrunk by ``final_scale``
    so that a fresh network starts close to the identity map."""
    if ndim not in (2, 3):
        raise ValueError("only 2D and 3D denoisers are supported")
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    chans = [2] + [num_kernels] * (num_layers - 1) + [2]
    taps = KERNEL_SIZE**ndim
    weights, biases = [], []
    for layer, (cin, cout) in enumerate(zip(chans[:-1], chans[1:])):
        std = np.sqrt(2.0 / (cin * taps))
        if layer == num_layers - 1:
            std *= final_scale
        w = rng.standard_normal((cin, *(KERNEL_SIZE,) * ndim, cout)) * std
        weights.append(w.astype(dtype))
        biases.append(np.zeros(cout, dtype=dtype))
    return DenoiserParams(weights, biases, ndim)


def to_channels(u: np.ndarray, dtype) -> np.ndarray:
    return np.stack([u.real, u.imag], axis=-1).astype(dtype, copy=False)


def from_channels(v: np.ndarray) -> np.ndarray:
    return v[..., 0] + 1j * v[..., 1]


def _im2col(x: np.ndarray) -> np.ndarray:
    """``(B, *S, C)`` -> ``(B * prod(S), C * 3**nd)`` with zero padding."""
    nd = x.ndim - 2
    r = KERNEL_SIZE // 2
    xp = np.pad(x, [(0, 0)] + [(r, r)] * nd + [(0, 0)])
    win = sliding_window_view(xp, (KERNEL_SIZE,) * nd, axis=tuple(range(1, nd + 1)))
    return win.reshape(-1, x.shape[-1] * KERNEL_SIZE**nd)


def _col2im(cols: np.ndarray, x_shape) -> np.ndarray:
    """Adjoint of :func:`_im2col`."""
    nd = len(x_shape) - 2
    r = KERNEL_SIZE // 2
    spatial = x_shape[1:-1]
    cols = cols.reshape(*x_shape, *(KERNEL_SIZE,) * nd)
    padded = np.zeros((x_shape[0], *(s + 2 * r for s in spatial), x_shape[-1]), dtype=cols.dtype)
    for offs in itertools.product(range(KERNEL_SIZE), repeat=nd):
        region = (slice(None),) + tuple(slice(o, o + s) for o, s in zip(offs, spatial)) + (slice(None),)
        padded[region] += cols[(Ellipsis,) + offs]
    inner = (slice(None),) + tuple(slice(r, r + s) for s in spatial) + (slice(None),)
    return padded[inner]


def _run(params: DenoiserParams, v: np.ndarray, keep: bool):
    """Network stack on channels-last input.

    With ``keep`` the per-layer inputs and their im2col matrices are
    returned for the backward pass.
    """
    cache = []
    h = v
    last = params.num_layers - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        cols = _im2col(h)
        if keep:
            cache.append((h, cols))
        out = cols @ w.reshape(-1, w.shape[-1])
        out += b
        h = out.reshape(*h.shape[:-1], w.shape[-1])
        if layer < last:
            np.maximum(h, 0, out=h)
    return h, cache


def _check_input(params: DenoiserParams, u: np.ndarray) -> bool:
    if u.ndim == params.ndim:
        return False
    if u.ndim == params.ndim + 1:
        return True
    raise ValueError(
        f"{params.ndim}D denoiser cannot process array of shape {u.shape}"
    )


def forward(params: DenoiserParams, u: np.ndarray) -> np.ndarray:
    """Denoise a complex image (or a batch of them along axis 0)."""
    u = np.asarray(u)
    batched = _check_input(params, u)
    v = to_channels(u if batched else u[None], params.dtype)
    noise, _ = _run(params, v, keep=False)
    out = from_channels(v - noise)
    return out if batched else out[0]


def loss_and_grad(params: DenoiserParams, noisy: np.ndarray, clean: np.ndarray):
    """Mean squared error of ``forward(params, noisy)`` against ``clean``.

    The mean runs over patches, pixels and both real channels.  Returns
    ``(loss, grads)`` where ``grads`` mirrors ``params``.
    """
    noisy = np.asarray(noisy)
    clean = np.asarray(clean)
    if noisy.shape != clean.shape:
        raise ValueError(f"noisy {noisy.shape} and clean {clean.shape} differ in shape")
    if noisy.ndim != params.ndim + 1:
        raise ValueError(f"expected a batch of {params.ndim}D patches, got shape {noisy.shape}")
    if noisy.shape[0] == 0:
        raise ValueError("empty patch set")
    v = to_channels(noisy, params.dtype)
    target = to_channels(clean, params.dtype)
    net_out, acts = _run(params, v, keep=True)
    err = (v - net_out) - target
    count = err.size
    loss = float(np.sum(err.astype(np.float64) ** 2) / count)

    grads = params.zeros_like()
    # d loss / d net_out; the residual branch enters with a minus sign
    delta = (-2.0 / count) * err
    for layer in range(params.num_layers - 1, -1, -1):
        w = params.weights[layer]
        x, cols = acts[layer]
        d2 = delta.reshape(-1, w.shape[-1])
        grads.weights[layer] = (cols.T @ d2).reshape(w.shape)
        grads.biases[layer] = d2.sum(axis=0)
        if layer == 0:
            break
        dcols = d2 @ w.reshape(-1, w.shape[-1]).T
        delta = _col2im(dcols, x.shape)
        # x is the ReLU output of the previous layer
        delta *= x > 0
    return loss, grads
