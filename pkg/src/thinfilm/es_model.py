"""
Ehrlich-Schwoebel current models.

Each variant writes the ES current as ``J(m) = Phi(|m|) m`` with ``m = grad h``
and derives from a radial potential, ``grad_m G(m) = -Phi(|m|) m``:

    k = 1:  Phi(s) = a (q - p) / ((p + s)(q + s))
            G(m)   = a [p ln(p + |m|) - q ln(q + |m|)]
    k = 2:  Phi(s) = a / (q + (p + q) s / p)
            G(m)   = a [-p |m| / (p + q) + p^2 q / (p + q)^2 ln(pq / (p + q) + |m|)]
    k = 3:  Phi(s) = a / (s^2 + (q - p) s)
            G(m)   = -a ln(q - p + |m|)

``G - chi |m|^2 / 2`` is concave once ``chi >= chi_min``, which is what makes a
linear-implicit convex-concave splitting possible. The k = 3 mobility is
singular at zero slope and is regularized by flooring ``|m|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spectral_grid import RealField, _same_grid

__all__ = [
    "EsParams",
    "SplittingParams",
    "PhysicalPreset",
    "PresetModel",
    "DEFAULT_PRESET",
    "phi",
    "phi_prime",
    "phi_prime_lower_bound",
    "potential",
    "potential_radial",
    "potential_gradient",
    "potential_hessian",
    "hessian_eigenvalues",
    "chi_min",
    "max_flux_magnitude",
    "lower_bound_constant",
    "flux",
    "flux_arrays",
    "preset_from_physical",
]

DEFAULT_FLOOR = 1e-16


@dataclass(frozen=True)
class EsParams:
    variant: int
    alpha: float
    p: float
    q: float
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.variant not in (1, 2, 3):
            raise ValueError(f"variant must be 1, 2 or 3, got {self.variant!r}")
        for name in ("alpha", "p", "q", "floor"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not 0 < self.p < self.q:
            raise ValueError(f"need 0 < p < q, got p={self.p}, q={self.q}")
        if self.floor < 0:
            raise ValueError(f"floor must be >= 0, got {self.floor}")
        if self.variant == 3 and self.floor <= 0:
            raise ValueError("variant 3 needs a positive slope floor")


@dataclass(frozen=True)
class SplittingParams:
    chi: float

    def __post_init__(self):
        if not (math.isfinite(self.chi) and self.chi >= 0):
            raise ValueError(f"chi must be finite and >= 0, got {self.chi!r}")

    @classmethod
    def minimal(cls, params: EsParams) -> "SplittingParams":
        return cls(chi_min(params))

    def check(self, params: EsParams) -> None:
        threshold = chi_min(params)
        if self.chi < threshold:
            raise ValueError(
                f"chi={self.chi!r} is below the concavity threshold chi_min={threshold!r} "
                f"for variant {params.variant}"
            )


@dataclass(frozen=True)
class PhysicalPreset:
    """Physical growth parameters.

    Attributes
    ----------
    F_f : deposition flux per unit time
    L_ES : adatom attachment length when descending a step
    L_isl : typical island separation length
    b : typical step height
    C_DF : downward-funneling strength
    """

    F_f: float = 2.0
    L_ES: float = 0.05
    L_isl: float = 0.25
    b: float = 0.017
    C_DF: float = 0.0

    def __post_init__(self):
        for name in ("F_f", "L_ES", "L_isl", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not (math.isfinite(self.C_DF) and self.C_DF >= 0):
            raise ValueError(f"C_DF must be >= 0, got {self.C_DF!r}")


class PresetModel(NamedTuple):
    es1: EsParams
    es2: EsParams
    es3: EsParams
    gamma: float
    epsilon_sq: float

    def for_variant(self, k: int) -> EsParams:
        return (self.es1, self.es2, self.es3)[k - 1]


def preset_from_physical(preset: PhysicalPreset, floor: float = DEFAULT_FLOOR) -> PresetModel:
    a1 = preset.F_f * preset.L_ES / 2.0
    p = preset.b / preset.L_isl
    q = preset.b / preset.L_isl + preset.b / preset.L_ES
    a2 = a1 * (q - p) / p
    a3 = a1 * (q - p)
    return PresetModel(
        EsParams(1, a1, p, q, floor),
        EsParams(2, a2, p, q, floor),
        EsParams(3, a3, p, q, floor),
        gamma=preset.C_DF * preset.F_f,
        epsilon_sq=preset.F_f * preset.L_isl**4,
    )


DEFAULT_PRESET = PhysicalPreset()


def _check_slope(s):
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("slope magnitude must be finite")
    if np.any(s < 0):
        raise ValueError("slope magnitude must be >= 0")
    return s


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _phi(params: EsParams, s: np.ndarray) -> np.ndarray:
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        return a * (q - p) / ((p + s) * (q + s))
    if params.variant == 2:
        return a / (q + (p + q) * s / p)
    st = np.maximum(s, params.floor)
    return a / (st * st + (q - p) * st)


def phi(params: EsParams, s):
    """Mobility ``Phi_k(s)`` for slope magnitude ``s >= 0``."""
    return _scalar(_phi(params, _check_slope(s)))


def phi_prime(params: EsParams, s):
    """Derivative of the mobility; for k = 3 evaluated at the floored slope."""
    s = _check_slope(s)
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        out = -a * (q - p) * (p + q + 2 * s) / ((p + s) ** 2 * (q + s) ** 2)
    elif params.variant == 2:
        out = -a * ((p + q) / p) / (q + (p + q) * s / p) ** 2
    else:
        st = np.maximum(s, params.floor)
        out = -a * (2 * st + q - p) / (st * st + (q - p) * st) ** 2
    return _scalar(out)


def phi_prime_lower_bound(params: EsParams) -> float:
    """Explicit ``B`` with ``-B <= Phi'(s)`` for all ``s >= 0`` (k = 1, 2)."""
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        return 2 * a * (q - p) / (p * p * q)
    if params.variant == 2:
        return a * (p + q) / (p * q * q)
    raise ValueError("Phi_3' is unbounded near zero slope")


def potential_radial(params: EsParams, s):
    """``G_k`` as a function of ``s = |m|``."""
    s = np.asarray(s, dtype=np.float64)
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        out = a * (p * np.log(p + s) - q * np.log(q + s))
    elif params.variant == 2:
        r = p + q
        out = a * (-p * s / r + p * p * q / (r * r) * np.log(p * q / r + s))
    else:
        out = -a * np.log(q - p + s)
    return _scalar(out)


def _norm(m):
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1:] != (2,):
        raise ValueError(f"expected slope vectors with trailing dimension 2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("slope vector must be finite")
    return m, np.hypot(m[..., 0], m[..., 1])


def potential(params: EsParams, m):
    m, s = _norm(m)
    return potential_radial(params, s)


def potential_gradient(params: EsParams, m) -> np.ndarray:
    """``grad_m G(m) = -Phi(|m|) m``."""
    m, s = _norm(m)
    return -_phi(params, s)[..., None] * m


def hessian_eigenvalues(params: EsParams, s):
    """Eigenvalues ``(tangential, radial)`` of the Hessian of G at ``|m| = s``.

    The radial eigenvalue is written in simplified closed form, which avoids
    the cancellation between the identity and rank-one terms at small ``s``.
    """
    s = np.asarray(s, dtype=np.float64)
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        lam_t = -a * (q - p) / ((p + s) * (q + s))
        lam_r = a * (q - p) * (s * s - p * q) / ((p + s) ** 2 * (q + s) ** 2)
    elif params.variant == 2:
        lam_t = -a * p / (p * q + (p + q) * s)
        lam_r = -a * p * p * q / (p * q + (p + q) * s) ** 2
    else:
        if np.any(s == 0):
            raise ValueError("Hessian of G_3 is undefined at m = 0")
        lam_t = -a / ((q - p) * s + s * s)
        lam_r = a / (q - p + s) ** 2
    return _scalar(lam_t), _scalar(lam_r)


def potential_hessian(params: EsParams, m) -> np.ndarray:
    """Hessian of G with respect to the slope, shape ``(..., 2, 2)``.

    Assembled as ``lam_t I + (lam_r - lam_t) mhat mhat^T``. At ``m = 0`` the
    k = 1, 2 value is the continuous limit ``-Phi(0) I``; k = 3 is rejected.
    """
    m, s = _norm(m)
    if params.variant == 3 and np.any(s == 0):
        raise ValueError("Hessian of G_3 is undefined at m = 0")
    lam_t, lam_r = (np.asarray(v) for v in hessian_eigenvalues(params, s))
    safe = np.where(s > 0, s, 1.0)
    mhat = m / safe[..., None]
    outer = mhat[..., :, None] * mhat[..., None, :]
    eye = np.eye(2)
    return lam_t[..., None, None] * eye + (lam_r - lam_t)[..., None, None] * outer


def chi_min(params: EsParams) -> float:
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        return 2 * a * (q - p) / (p * q)
    if params.variant == 2:
        return 0.0
    return a / (q - p) ** 2


def max_flux_magnitude(params: EsParams) -> float:
    """``sup_s Phi(s) s``, i.e. the Lipschitz constant of the radial potential.

    k = 3 is evaluated for the unregularized mobility (the supremum is the
    ``s -> 0`` limit).
    """
    a, p, q = params.alpha, params.p, params.q
    if params.variant == 1:
        return a * (q - p) / (math.sqrt(p) + math.sqrt(q)) ** 2
    if params.variant == 2:
        return a * p / (p + q)
    return a / (q - p)


def lower_bound_constant(params: EsParams, beta: float) -> float:
    """``C_beta`` such that ``G(m) >= -beta |m|^2 - C_beta`` for every m.

    From ``G(m) >= G(0) - B |m|`` with ``B = max_flux_magnitude`` and Young's
    inequality ``B s <= beta s^2 + B^2 / (4 beta)``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    b = max_flux_magnitude(params)
    return b * b / (4.0 * beta) - float(potential_radial(params, 0.0))


def flux_arrays(params: EsParams, mx: np.ndarray, my: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ph = _phi(params, np.hypot(mx, my))
    return ph * mx, ph * my


def flux(params: EsParams, mx: RealField, my: RealField) -> tuple[RealField, RealField]:
    """Pointwise ES current ``J = Phi(|m|) m``."""
    _same_grid(mx.grid, my.grid)
    jx, jy = flux_arrays(params, mx.values, my.values)
    return RealField(mx.grid, jx), RealField(mx.grid, jy)
