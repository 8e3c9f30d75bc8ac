"""
Roughness, energy and runtime monitors for provable properties of the model.

Asserted monitors (a failure means a bug):

* discrete energy law ``E^i <= E^{i-1} + (dt/2) ||zeta^i||^2``,
* global roughness growth ``w^2(t) <= w^2(t0) + 2 B (t - t0)`` for k = 1, 3,
* H^2 stability ``||lap h||^2 <= (4 / eps^2) (E^0 + C_beta |Omega|)``.

Report-only quantities (their constants are not explicit): the local
exponential growth rate of ``w^2``, the 4/3-power interpolated rate, the
rough-smooth-rough shape and the time a steady state is reached.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .es_model import EsParams, lower_bound_constant, potential_radial
from .spectral_grid import RealField, SpectralField, _same_grid, forward, seminorms
from .stepper import ModelConfig, StepperState

__all__ = [
    "DiagnosticsRecord",
    "EnergyParts",
    "MonitorResult",
    "DiagnosticsRecorder",
    "roughness",
    "energy",
    "energy_parts",
    "energy_tolerance",
    "steady_residual",
    "record",
    "check_global_roughness_bound",
    "check_energy_law",
    "check_h2_bound",
    "h2_bound",
    "local_growth_rate",
    "interpolated_growth_constant",
    "rough_smooth_rough",
    "steady_state_time",
    "write_series",
    "read_series",
    "SERIES_COLUMNS",
    "global_growth_rate",
    "as_rows",
]

SERIES_COLUMNS = (
    "t",
    "omega",
    "energy",
    "grad_sq",
    "lap_sq",
    "mean",
    "h_min",
    "h_max",
    "increment_rate",
)
MAX_BOUND_SAMPLES = 512


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    omega: float
    energy: float
    grad_sq: float
    lap_sq: float
    mean: float
    h_min: float
    h_max: float
    increment_rate: float


@dataclass(frozen=True)
class EnergyParts:
    potential: float
    gradient: float
    curvature: float

    @property
    def total(self) -> float:
        return self.potential + self.gradient + self.curvature


@dataclass(frozen=True)
class MonitorResult:
    name: str
    passed: bool
    value: float
    detail: str = ""
    asserted: bool = True

    def line(self) -> str:
        tag = ("PASS" if self.passed else "FAIL") if self.asserted else "INFO"
        return f"{tag} {self.name}: {self.detail}"


def roughness(h: RealField) -> float:
    """Root-mean-square deviation of ``h`` from its spatial mean."""
    v = h.values
    return math.sqrt(float(np.mean((v - v.mean()) ** 2)))


def _slope_magnitude(F: SpectralField) -> np.ndarray:
    g = F.grid
    kx, ky = g.odd_wavenumbers
    mx = np.fft.irfft2(1j * kx * F.coeffs, s=g.shape)
    my = np.fft.irfft2(1j * ky * F.coeffs, s=g.shape)
    return np.hypot(mx, my)


def _energy_and_norms(F: SpectralField, config: ModelConfig) -> tuple[EnergyParts, float, float]:
    pot = float(np.sum(potential_radial(config.es, _slope_magnitude(F)))) * F.grid.cell_area
    _, grad_sq, lap_sq = seminorms(F)
    parts = EnergyParts(pot, 0.5 * config.gamma * grad_sq, 0.5 * config.epsilon_sq * lap_sq)
    return parts, grad_sq, lap_sq


def energy_parts(h: RealField | SpectralField, config: ModelConfig) -> EnergyParts:
    """``int G(grad h)``, ``gamma/2 ||grad h||^2`` and ``eps^2/2 ||lap h||^2``."""
    F = h if isinstance(h, SpectralField) else forward(h)
    return _energy_and_norms(F, config)[0]


def energy(h: RealField | SpectralField, config: ModelConfig) -> float:
    return energy_parts(h, config).total


def energy_tolerance(previous: float, dealias: bool = False) -> float:
    return (1e-10 if dealias else 1e-8) * max(1.0, abs(previous))


def steady_residual(prev: RealField, next: RealField, dt: float) -> float:
    """``||next - prev|| / dt`` in L^2(Omega)."""
    _same_grid(prev.grid, next.grid)
    d = next.values - prev.values
    return math.sqrt(float(np.sum(d * d)) * prev.grid.cell_area) / dt


def record(state: StepperState, config: ModelConfig, prev: StepperState | None = None) -> DiagnosticsRecord:
    h = state.h
    v = h.values
    parts, grad_sq, lap_sq = _energy_and_norms(state.h_hat, config)
    if prev is None:
        rate = 0.0
    else:
        rate = steady_residual(prev.h, h, state.time - prev.time)
    return DiagnosticsRecord(
        t=state.time,
        omega=roughness(h),
        energy=parts.total,
        grad_sq=grad_sq,
        lap_sq=lap_sq,
        mean=float(v.mean()),
        h_min=float(v.min()),
        h_max=float(v.max()),
        increment_rate=rate,
    )


class DiagnosticsRecorder:
    """Stepper observer collecting a :class:`DiagnosticsRecord` every ``every`` steps.

    Also keeps ``||zeta^i||^2`` per record so the energy law can be checked
    with forcing.
    """

    def __init__(self, config: ModelConfig, every: int = 1):
        if every < 1:
            raise ValueError("record cadence must be >= 1")
        self.config = config
        self.every = every
        self.records: list[DiagnosticsRecord] = []
        self.zeta_sq: list[float] = []

    def start(self, state: StepperState) -> None:
        self.append(state, None)

    def append(self, state: StepperState, prev: StepperState | None = None) -> None:
        self.records.append(record(state, self.config, prev))
        z = self.config.zeta_at(state.time)
        self.zeta_sq.append(0.0 if z is None else seminorms(z)[0])

    def __call__(self, state: StepperState, prev: StepperState | None) -> None:
        if state.step_index % self.every == 0:
            self.append(state, prev)


def _thin(n: int, cap: int) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).round().astype(int))


def _check_monotone(t: np.ndarray) -> None:
    if np.any(np.diff(t) <= 0):
        raise ValueError("time series must be strictly increasing")


def global_growth_rate(params: EsParams) -> float:
    """Slope ``C`` in ``w^2(t) - w^2(t0) <= C (t - t0)``; k = 1 and 3 only."""
    if params.variant == 1:
        return 2.0 * params.alpha * (params.q - params.p)
    if params.variant == 3:
        return 2.0 * params.alpha
    raise ValueError("the global roughness constant for k = 2 is not explicit")


def check_global_roughness_bound(
    series: Sequence[tuple[float, float]],
    params: EsParams,
    tol: float = 1e-10,
    max_samples: int = MAX_BOUND_SAMPLES,
) -> MonitorResult:
    """Check ``w^2(t) <= w^2(t0) + C (t - t0) + tol`` over sampled pairs ``t0 < t``.

    ``value`` is the worst margin ``C (t - t0) - (w^2(t) - w^2(t0))``.
    """
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    t, w = data[:, 0], data[:, 1]
    _check_monotone(t)
    c = global_growth_rate(params)
    if len(t) < 2:
        return MonitorResult("global_roughness_bound", True, math.inf, "fewer than two samples")
    idx = _thin(len(t), max_samples)
    t, w2 = t[idx], w[idx] ** 2
    margin = c * (t[None, :] - t[:, None]) - (w2[None, :] - w2[:, None])
    upper = np.triu(np.ones_like(margin, dtype=bool), k=1)
    worst_flat = np.argmin(np.where(upper, margin, np.inf))
    i0, i1 = np.unravel_index(worst_flat, margin.shape)
    worst = float(margin[i0, i1])
    passed = worst >= -tol
    detail = f"worst margin {worst:.6e} at t0={t[i0]:g}, t={t[i1]:g} (C={c:.6g})"
    return MonitorResult("global_roughness_bound", passed, worst, detail)


def check_energy_law(
    series: Sequence[tuple[float, float, float]],
    dt: float,
    dealias: bool = False,
) -> MonitorResult:
    """Check ``E^i <= E^{i-1} + (t_i - t_{i-1}) / 2 * ||zeta^i||^2 + tol_E``.

    Rows are ``(t, E, ||zeta||^2)``. For records taken every step the forcing
    budget is exactly ``(dt / 2) ||zeta^i||^2``; sparser records accumulate it
    assuming ``zeta`` is constant in between. ``value`` is the worst excess
    ``E^i - E^{i-1} - budget``.
    """
    data = np.asarray(series, dtype=np.float64).reshape(-1, 3)
    if len(data) < 2:
        return MonitorResult("energy_law", True, -math.inf, "fewer than two records")
    t, e, z = data.T
    _check_monotone(t)
    gaps = np.diff(t)
    if np.any(gaps < dt * (1 - 1e-9)):
        raise ValueError("records closer than one time step")
    excess = np.diff(e) - 0.5 * gaps * z[1:]
    tol = np.array([energy_tolerance(x, dealias) for x in e[:-1]])
    bad = np.nonzero(excess > tol)[0]
    worst = float(excess.max())
    if bad.size:
        i = int(bad[0]) + 1
        detail = f"first violation at record {i} (t={t[i]:g}): increment {excess[i - 1]:.3e} > tol {tol[i - 1]:.1e}"
        return MonitorResult("energy_law", False, worst, detail)
    return MonitorResult("energy_law", True, worst, f"worst increment {worst:.3e} over {len(e) - 1} intervals")


def h2_bound(config: ModelConfig, e0: float) -> float:
    """``(4 / eps^2) (E^0 + C_beta |Omega|)`` with ``beta = eps^2 kappa_min^2 / 4``."""
    g = config.grid
    beta = config.epsilon_sq * g.kappa_min**2 / 4.0
    return 4.0 / config.epsilon_sq * (e0 + lower_bound_constant(config.es, beta) * g.area)


def check_h2_bound(lap_sq: Sequence[float], config: ModelConfig, e0: float) -> MonitorResult:
    bound = h2_bound(config, e0)
    peak = float(np.max(lap_sq))
    return MonitorResult(
        "h2_stability",
        peak <= bound,
        bound - peak,
        f"sup ||lap h||^2 = {peak:.6e} <= bound {bound:.6e}",
    )


def local_growth_rate(series: Sequence[tuple[float, float]]) -> float:
    """Smallest ``C`` with ``w^2(t) <= w^2(t0) exp(C (t - t0))`` along the series."""
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    t, w = data.T
    _check_monotone(t)
    if len(t) < 2 or np.any(w <= 0):
        return math.nan
    return float(np.max(np.diff(np.log(w**2)) / np.diff(t)))


def interpolated_growth_constant(series: Sequence[tuple[float, float]]) -> float:
    """Smallest ``C`` with ``w^{4/3}(t) <= w^{4/3}(t0) + C (t - t0)`` along the series."""
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    t, w = data.T
    _check_monotone(t)
    if len(t) < 2:
        return math.nan
    return float(np.max(np.diff(w ** (4.0 / 3.0)) / np.diff(t)))


def rough_smooth_rough(series: Sequence[tuple[float, float]]) -> bool:
    """True when ``w`` dips below ``w(0)`` at some t > 0 and ends above ``w(0)``."""
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    w = data[:, 1]
    if len(w) < 3:
        return False
    return bool(w[1:].min() < w[0] and w[-1] > w[0])


def steady_state_time(
    records: Sequence[DiagnosticsRecord], threshold: float = 1e-6, window: int = 100
) -> float | None:
    """Start time of the first run of ``window`` records with ``increment_rate < threshold``."""
    run_len = 0
    for i, r in enumerate(records):
        if i > 0 and r.increment_rate < threshold:
            run_len += 1
            if run_len >= window:
                return records[i - window + 1].t
        else:
            run_len = 0
    return None


def write_series(path: str | Path, records: Iterable[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for r in records:
            writer.writerow([format(getattr(r, c), ".17g") for c in SERIES_COLUMNS])


def read_series(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_COLUMNS:
            raise ValueError(f"{path}: unexpected series header {header!r}")
        return [DiagnosticsRecord(*(float(x) for x in row)) for row in reader if row]


def as_rows(records: Sequence[DiagnosticsRecord], *columns: str) -> np.ndarray:
    return np.array([[getattr(r, c) for c in columns] for r in records], dtype=np.float64)

