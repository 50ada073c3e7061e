"""Plug-and-play reconstruction with primal-dual splitting.

For a forward operator ``A``, data ``y``, noise variance ``sigma2``, step
scale ``nu`` and any denoiser ``f``::

    gamma = (nu / sigma2) * ||A||^2
    x_0 = A^H y,  z_0 = A x_0 - y
    u_t = x_{t-1} - (nu / sigma2) A^H z_{t-1}
    x_t = f(u_t)
    z_t = gamma / (1 + gamma) z_{t-1} + 1 / (1 + gamma) (A (2 x_t - x_{t-1}) - y)

:class:`PDSChains` advances ``K`` such recursions in lock step so that a
single (possibly trained) denoising step can see every intermediate image at
once; this is what the multi-set training mode needs.

The recursion is a primal-dual hybrid gradient method with primal step
``nu`` and dual step ``1 / (nu ||A||^2)``.  Its conditioning is set by
``gamma`` alone, so when ``nu`` is ``None`` it is chosen as
``gamma * sigma2 / ||A||^2`` for a target ``gamma`` (default 10).  A fixed
``nu`` of order one gives ``gamma ~ 1 / sigma2`` and converges very slowly
or not at all at realistic noise levels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..forward_model import operator_norm_sq
from ..metrics import rsnr
from ..numerics import make_rng
from .baseline import baseline_shrink_denoiser

__all__ = ["Trace", "DivergenceError", "PDSChains", "pds_pnp", "make_fixed_denoiser"]

DEFAULT_GAMMA = 10.0
TRACE_COLUMNS = ("t", "residual_sq", "c_t", "s_t_sq", "rsnr_db")


class DivergenceError(RuntimeError):
    """Non-finite or runaway iterates; the trace so far is attached."""

    def __init__(self, message, trace=None, iteration=None):
        super().__init__(message)
        self.trace = trace
        self.iteration = iteration


@dataclass
class Trace:
    """Per-iteration record: data residual, correction term, training noise, rSNR."""

    t: list = field(default_factory=list)
    residual_sq: list = field(default_factory=list)
    c_t: list = field(default_factory=list)
    s_t_sq: list = field(default_factory=list)
    rsnr_db: list = field(default_factory=list)

    def append(self, t, residual_sq, c_t=None, s_t_sq=None, rsnr_db=None):
        self.t.append(int(t))
        self.residual_sq.append(float(residual_sq))
        self.c_t.append(c_t)
        self.s_t_sq.append(s_t_sq)
        self.rsnr_db.append(rsnr_db)

    def __len__(self):
        return len(self.t)

    def rows(self):
        for vals in zip(self.t, self.residual_sq, self.c_t, self.s_t_sq, self.rsnr_db):
            yield ["" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)) for v in vals]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class PDSChains:
    """``K`` coupled PDS recursions sharing step size and ``gamma``.

    ``gamma`` uses the pooled noise variance and the largest operator norm,
    i.e. the norm of the block-diagonal joint operator.
    """

    def __init__(self, ops, ys, sigma2: float, nu: float | None = None, norm_sq: float | None = None,
                 x_true=None, divergence_factor: float = 10.0, norm_rng=0, norm_iters: int = 100,
                 gamma: float = DEFAULT_GAMMA):
        if len(ops) != len(ys) or not ops:
            raise ValueError("need matching, non-empty lists of operators and data")
        if not sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        self.ops = list(ops)
        self.ys = [np.asarray(y, dtype=np.complex128) for y in ys]
        self.sigma2 = float(sigma2)
        if norm_sq is None:
            norm_sq = max(
                operator_norm_sq(op, make_rng(norm_rng, k), iters=norm_iters) for k, op in enumerate(self.ops)
            )
        self.norm_sq = float(norm_sq)
        self.nu = gamma * self.sigma2 / self.norm_sq if nu is None else float(nu)
        if not self.nu > 0:
            raise ValueError("nu must be > 0")
        self.step = self.nu / self.sigma2
        self.gamma = self.step * self.norm_sq
        self.x_true = x_true
        self.divergence_factor = divergence_factor
        self.xs = [op.adjoint(y) for op, y in zip(self.ops, self.ys)]
        self._ax = [op.apply(x) for op, x in zip(self.ops, self.xs)]
        self.zs = [ax - y for ax, y in zip(self._ax, self.ys)]
        self.t = 0
        self.trace = Trace()
        self._min_residual = math.inf

    @property
    def num_measurements(self) -> int:
        return sum(op.num_measurements for op in self.ops)

    def intermediate(self) -> list:
        """``u_{t+1}`` for every chain (does not advance the state)."""
        return [x - self.step * op.adjoint(z) for op, x, z in zip(self.ops, self.xs, self.zs)]

    def advance(self, new_xs) -> float:
        """Accept denoised images ``x_t`` and update the duals; returns the pooled residual."""
        self.t += 1
        g = self.gamma
        residual = 0.0
        for k, (op, y) in enumerate(zip(self.ops, self.ys)):
            x_new = np.asarray(new_xs[k], dtype=np.complex128)
            if not np.all(np.isfinite(x_new)):
                raise DivergenceError(f"non-finite image at iteration {self.t}", self.trace, self.t)
            ax_new = op.apply(x_new)
            self.zs[k] = (g / (1 + g)) * self.zs[k] + (1 / (1 + g)) * (2 * ax_new - self._ax[k] - y)
            self.xs[k] = x_new
            self._ax[k] = ax_new
            residual += float(np.vdot(ax_new - y, ax_new - y).real)
        if not np.isfinite(residual):
            raise DivergenceError(f"non-finite residual at iteration {self.t}", self.trace, self.t)
        self._min_residual = min(self._min_residual, residual)
        return residual

    def check_divergence(self) -> None:
        last = self.trace.residual_sq[-1]
        if last > self.divergence_factor * self._min_residual:
            raise DivergenceError(
                f"residual {last:.3e} exceeds {self.divergence_factor}x its minimum "
                f"{self._min_residual:.3e} at iteration {self.t}",
                self.trace,
                self.t,
            )

    def quality(self):
        """Mean rSNR over chains with a known ground truth, else ``None``.

        ``x_true`` must be on the same intensity scale as the data; rSNR is
        scale invariant so normalized chains need no rescaling here.
        """
        if self.x_true is None:
            return None
        vals = [rsnr(xt, x) for xt, x in zip(self.x_true, self.xs) if xt is not None]
        return float(np.mean(vals)) if vals else None


def make_fixed_denoiser(kind: str, strength: float = 0.0):
    if kind == "identity":
        return lambda u: u
    if kind == "baseline":
        return lambda u: baseline_shrink_denoiser(u, strength)
    raise ValueError(f"no fixed denoiser called {kind!r}")


def pds_pnp(op, y, denoiser, sigma2: float, iterations: int = 80, nu: float | None = None,
            x_true=None, norm_sq: float | None = None, divergence_factor: float = 10.0, seed: int = 0,
            gamma: float = DEFAULT_GAMMA):
    """Run PnP-PDS with a fixed denoiser callable ``denoiser(u) -> x``.

    ``nu=None`` picks ``nu = gamma * sigma2 / ||A||^2``.  Returns
    ``(x_T, trace)``; the trace holds the data residual
    ``||A x_t - y||^2`` (and rSNR when ``x_true`` is given) per iteration.
    """
    chains = PDSChains([op], [y], sigma2, nu, norm_sq, None if x_true is None else [x_true],
                       divergence_factor, norm_rng=seed, gamma=gamma)
    for _ in range(iterations):
        u = chains.intermediate()[0]
        residual = chains.advance([denoiser(u)])
        chains.trace.append(chains.t, residual, rsnr_db=chains.quality())
        chains.check_divergence()
    return chains.xs[0], chains.trace
