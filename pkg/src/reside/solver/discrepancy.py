"""Discrepancy-principle correction of the denoiser training noise level."""

from __future__ import annotations

__all__ = ["DegenerateFitError", "discrepancy_update"]


class DegenerateFitError(ArithmeticError):
    """The data residual is exactly zero, so the correction term is undefined."""


def discrepancy_update(s2_prev: float, residual_sq: float, num_measurements: int,
                       sigma2: float, tau: float, alpha: float) -> tuple[float, float]:
    """Return ``(c_t, s2_new)``.

    ``c_t = (tau * M * sigma2 / residual_sq) ** alpha`` and the new training
    noise variance is ``c_t * s2_prev``.  A residual above its target
    shrinks the noise level (weaker denoising), one below it grows the
    noise level.
    """
    if residual_sq == 0:
        raise DegenerateFitError("zero data residual: exact fit, stop adapting")
    if residual_sq < 0:
        raise ValueError("residual_sq must be non-negative")
    c = (tau * num_measurements * sigma2 / residual_sq) ** alpha
    return c, c * s2_prev
