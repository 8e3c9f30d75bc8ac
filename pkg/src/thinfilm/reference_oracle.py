"""
Unsplit reference integrator for cross-checking the splitting stepper.

Integrates the same semi-discrete system

    dh/dt = zeta + gamma lap h - eps^2 lap^2 h - div J(grad h)

with the classical explicit fourth-order Runge-Kutta method. It shares the
spatial discretization with the stepper, so any disagreement isolates the
time discretization. Slow by design: the step must resolve the stiff
fourth-order operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .es_model import _phi, flux_arrays
from .spectral_grid import GridSpec, RealField, dealias_mask
from .stepper import ModelConfig, steps_between

__all__ = ["OracleConfig", "OracleBlowup", "stability_ceiling", "rhs", "rk4_run"]

SAFETY = 0.5
BLOWUP_LIMIT = 1e6


class OracleBlowup(FloatingPointError):
    pass


def stability_ceiling(model: ModelConfig, safety: float = SAFETY) -> float:
    """Largest explicit step allowed for ``model`` on its grid.

    Uses the worst linear rate ``eps^2 k^4 + (gamma + Phi(0)) k^2`` at the
    largest resolved wavenumber magnitude.
    """
    g = model.grid
    k2 = float(g.k_sq.max())
    rate = model.epsilon_sq * k2 * k2 + (model.gamma + float(_phi(model.es, np.float64(0.0)))) * k2
    return 2.0 * safety / rate


@dataclass(frozen=True)
class OracleConfig:
    model: ModelConfig
    dt_explicit: float

    def __post_init__(self):
        if self.model.grid.N1 > 32 or self.model.grid.N2 > 32:
            raise ValueError("the reference oracle is meant for grids with N <= 32")
        if not (math.isfinite(self.dt_explicit) and self.dt_explicit > 0):
            raise ValueError("dt_explicit must be positive")
        ceiling = stability_ceiling(self.model)
        if self.dt_explicit > ceiling:
            raise ValueError(f"dt_explicit={self.dt_explicit:g} exceeds the stability ceiling {ceiling:.3e}")

    @property
    def grid(self) -> GridSpec:
        return self.model.grid


def _rhs_array(h: np.ndarray, model: ModelConfig, t: float) -> np.ndarray:
    g = model.grid
    kx, ky = g.odd_wavenumbers
    k2 = g.k_sq
    h_hat = np.fft.rfft2(h)
    mx = np.fft.irfft2(1j * kx * h_hat, s=g.shape)
    my = np.fft.irfft2(1j * ky * h_hat, s=g.shape)
    jx, jy = flux_arrays(model.es, mx, my)
    jx_hat, jy_hat = np.fft.rfft2(jx), np.fft.rfft2(jy)
    if model.dealias:
        mask = dealias_mask(g)
        jx_hat, jy_hat = jx_hat * mask, jy_hat * mask
    out_hat = -(model.gamma * k2 + model.epsilon_sq * k2 * k2) * h_hat - 1j * (kx * jx_hat + ky * jy_hat)
    out = np.fft.irfft2(out_hat, s=g.shape)
    zeta = model.zeta_at(t)
    if zeta is not None:
        out += zeta.values
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("right-hand side produced non-finite values")
    return out


def rhs(h: RealField, model: ModelConfig, t: float = 0.0) -> RealField:
    """``zeta + gamma lap h - eps^2 lap^2 h - div J(grad h)`` without splitting."""
    if h.grid != model.grid:
        raise ValueError("field grid does not match model grid")
    return RealField(h.grid, _rhs_array(h.values, model, t))


def rk4_run(
    h0: RealField,
    oracle: OracleConfig,
    t_end: float,
    callback: Callable[[float, RealField], None] | None = None,
    every: int = 1,
) -> RealField:
    """Classical RK4 from ``t = 0`` to ``t_end``; ``callback(t, h)`` every ``every`` steps."""
    model = oracle.model
    if h0.grid != model.grid:
        raise ValueError("initial field grid does not match model grid")
    dt = oracle.dt_explicit
    n = steps_between(0.0, t_end, dt)
    h = h0.values.copy()
    for i in range(n):
        t = i * dt
        k1 = _rhs_array(h, model, t)
        k2 = _rhs_array(h + 0.5 * dt * k1, model, t + 0.5 * dt)
        k3 = _rhs_array(h + 0.5 * dt * k2, model, t + 0.5 * dt)
        k4 = _rhs_array(h + dt * k3, model, t + dt)
        h = h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        peak = float(np.abs(h).max())
        if not peak <= BLOWUP_LIMIT:
            raise OracleBlowup(
                f"oracle blew up at step {i + 1} (t={(i + 1) * dt:g}): max|h|={peak:.3e}; "
                f"dt_explicit={dt:g} vs ceiling {stability_ceiling(model):.3e}"
            )
        if callback is not None and (i + 1) % every == 0:
            callback((i + 1) * dt, RealField(model.grid, h))
    return RealField(model.grid, h)
