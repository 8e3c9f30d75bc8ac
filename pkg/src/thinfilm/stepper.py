"""
Convex-concave splitting semi-implicit time stepper.

One step solves, mode by mode,

    (h_new - h_old) / dt - gamma lap h_new + eps^2 lap^2 h_new - chi lap h_new
        = zeta(t_new) - div[(Phi(|grad h_old|) + chi) grad h_old],

i.e. the convex quadratic part ``chi |m|^2 / 2`` of the slope potential and the
linear dissipation are implicit while the concave remainder is explicit. The
implicit operator is diagonal in Fourier space with denominator

    D(xi) = 1/dt + gamma |kappa|^2 + chi |kappa~|^2 + eps^2 |kappa|^4,

where ``kappa~`` is the Nyquist-zeroed wavenumber used by the spectral
gradient and divergence. Using ``kappa~`` for the ``chi`` term keeps the
implicit and explicit halves of the splitting exactly adjoint on the grid, so
the discrete energy law holds for the collocation scheme, not only for the
Galerkin one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Union

import numpy as np

from .es_model import EsParams, SplittingParams, _phi
from .spectral_grid import GridSpec, RealField, SpectralField, dealias_mask, forward

__all__ = [
    "ModelConfig",
    "ImplicitSymbol",
    "StepperState",
    "ObserverError",
    "build_symbol",
    "build",
    "explicit_term",
    "step",
    "run",
    "steps_between",
]

ZetaProvider = Callable[[float], RealField]
ZetaSource = Union[None, RealField, ZetaProvider]
Observer = Callable[["StepperState", Union["StepperState", None]], None]


class ObserverError(RuntimeError):
    """An observer callback failed; the run was aborted."""


def _mean_free(f: RealField) -> RealField:
    return RealField(f.grid, f.values - f.values.mean())


@dataclass(frozen=True)
class ModelConfig:
    """Full problem definition for one simulation.

    ``zeta`` may be ``None`` (no deposition), a fixed :class:`RealField`, or a
    callable ``t -> RealField``. Deposition is made mean-free on ingestion.
    """

    es: EsParams
    grid: GridSpec
    epsilon_sq: float
    gamma: float = 0.0
    dt: float = 0.01
    split: SplittingParams | None = None
    zeta: ZetaSource = None
    dealias: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.epsilon_sq) and self.epsilon_sq > 0):
            raise ValueError(f"epsilon_sq must be > 0, got {self.epsilon_sq!r}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.split is None:
            object.__setattr__(self, "split", SplittingParams.minimal(self.es))
        else:
            self.split.check(self.es)
        zeta = self.zeta
        if isinstance(zeta, RealField):
            if zeta.grid != self.grid:
                raise ValueError("zeta field is not on the model grid")
            object.__setattr__(self, "zeta", _mean_free(zeta))
        elif zeta is not None and not callable(zeta):
            raise TypeError("zeta must be None, a RealField or a callable t -> RealField")

    @property
    def chi(self) -> float:
        return self.split.chi

    def zeta_at(self, t: float) -> RealField | None:
        if self.zeta is None or isinstance(self.zeta, RealField):
            return self.zeta
        z = self.zeta(t)
        if z.grid != self.grid:
            raise ValueError("zeta provider returned a field on the wrong grid")
        return _mean_free(z)

    def with_(self, **changes) -> "ModelConfig":
        """Copy with some fields replaced; ``split`` is re-derived unless given."""
        if "es" in changes and "split" not in changes:
            changes["split"] = None
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ImplicitSymbol:
    denominator: np.ndarray = field(repr=False)
    dt: float

    @property
    def inverse(self) -> np.ndarray:
        return 1.0 / self.denominator


def build_symbol(config: ModelConfig) -> ImplicitSymbol:
    g = config.grid
    k2 = g.k_sq
    d = 1.0 / config.dt + config.gamma * k2 + config.chi * g.k_sq_odd + config.epsilon_sq * k2 * k2
    return ImplicitSymbol(d, config.dt)


@dataclass(frozen=True, eq=False)
class StepperState:
    h: RealField
    h_hat: SpectralField
    step_index: int
    time: float
    symbol: ImplicitSymbol


def build(config: ModelConfig, h0: RealField) -> StepperState:
    """Initial state: ``h0`` with its mean removed, step 0."""
    if h0.grid != config.grid:
        raise ValueError(f"initial field grid {h0.grid} does not match model grid {config.grid}")
    h_hat = forward(h0).coeffs.copy()
    h_hat[0, 0] = 0.0
    g = config.grid
    h = RealField(g, np.fft.irfft2(h_hat, s=g.shape))
    return StepperState(h, SpectralField(g, h_hat), 0, 0.0, build_symbol(config))


def _explicit_coeffs(h_hat: np.ndarray, config: ModelConfig) -> np.ndarray:
    g = config.grid
    kx, ky = g.odd_wavenumbers
    mx = np.fft.irfft2(1j * kx * h_hat, s=g.shape)
    my = np.fft.irfft2(1j * ky * h_hat, s=g.shape)
    coef = _phi(config.es, np.hypot(mx, my))
    coef += config.chi
    vx_hat = np.fft.rfft2(coef * mx)
    vy_hat = np.fft.rfft2(coef * my)
    if config.dealias:
        mask = dealias_mask(g)
        vx_hat *= mask
        vy_hat *= mask
    out = -1j * (kx * vx_hat + ky * vy_hat)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("explicit term produced non-finite values")
    out[0, 0] = 0.0
    return out


def explicit_term(state: StepperState, config: ModelConfig) -> SpectralField:
    """Spectrum of ``div(grad_m G_-(grad h))``, ``G_- = G - chi |m|^2 / 2``."""
    return SpectralField(config.grid, _explicit_coeffs(state.h_hat.coeffs, config))


def step(state: StepperState, config: ModelConfig) -> StepperState:
    g = config.grid
    i = state.step_index + 1
    t = i * config.dt
    rhs = state.h_hat.coeffs / config.dt + _explicit_coeffs(state.h_hat.coeffs, config)
    zeta = config.zeta_at(t)
    if zeta is not None:
        rhs += np.fft.rfft2(zeta.values)
    h_hat = rhs / state.symbol.denominator
    h = np.fft.irfft2(h_hat, s=g.shape)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError(f"non-finite height field at step {i} (t={t:g})")
    return StepperState(RealField(g, h), SpectralField(g, h_hat), i, t, state.symbol)


def steps_between(t_start: float, t_end: float, dt: float) -> int:
    """Number of steps of size ``dt`` from ``t_start`` to ``t_end`` (must be integral)."""
    span = t_end - t_start
    if span < -1e-12 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end} precedes current time {t_start}")
    n = round(span / dt)
    if abs(n * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"interval {span} is not a whole number of steps of size {dt}")
    return max(n, 0)


def run(
    state: StepperState,
    config: ModelConfig,
    t_end: float,
    observers: Iterable[Observer] = (),
) -> StepperState:
    """Advance to ``t_end``, calling ``obs(new_state, prev_state)`` after every step.

    Observers manage their own cadence. An exception inside an observer aborts
    the run as :class:`ObserverError` carrying the step context.
    """
    observers = list(observers)
    for _ in range(steps_between(state.time, t_end, config.dt)):
        prev, state = state, step(state, config)
        for obs in observers:
            try:
                obs(state, prev)
            except Exception as exc:
                raise ObserverError(
                    f"observer {obs!r} failed at step {state.step_index} (t={state.time:g}): {exc}"
                ) from exc
    return state
