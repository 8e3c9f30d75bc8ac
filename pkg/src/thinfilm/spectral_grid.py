"""
Periodic rectangular grid and Fourier pseudo-spectral operators.

Conventions
-----------
Nodes are ``x_i = i * L1 / N1`` and ``y_j = j * L2 / N2`` with array axis 0
running along x and axis 1 along y (``indexing="ij"``).

Coefficients use the half-spectrum layout of ``numpy.fft.rfft2``: shape
``(N1, N2 // 2 + 1)``. The forward transform is unnormalized,

    F(xi) = sum_j f(x_j) exp(-i kappa(xi) . x_j),

and the inverse divides by ``N1 * N2``. Hence ``F(0, 0) = N1 * N2 * mean(f)``
and Parseval reads

    int_Omega |f|^2 dx = |Omega| / (N1 N2)^2 * sum_full |F(xi)|^2,

where the sum over the full spectrum is recovered from the half spectrum by
doubling every column except ``0`` and ``N2 / 2``.

Wavenumbers are ``kappa(xi) = (2 pi xi1 / L1, 2 pi xi2 / L2)``. Odd-order
derivative symbols have their Nyquist entries zeroed so that derivatives of
real fields stay real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "SpectralSymmetryError",
    "forward",
    "inverse",
    "gradient",
    "divergence",
    "laplacian",
    "laplacian_symbol",
    "integrate",
    "seminorms",
    "dealias_mask",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = "thinfilm-field"
SNAPSHOT_VERSION = "v1"

# Imaginary residue on inverse: silently dropped below the first, rejected above the second.
IMAG_DISCARD_TOL = 1e-12
IMAG_REJECT_TOL = 1e-8


class SpectralSymmetryError(ValueError):
    """Raised when a spectrum is too far from Hermitian to represent a real field."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on ``(0, L1) x (0, L2)`` with ``N1 x N2`` nodes."""

    N1: int
    N2: int
    L1: float = 2.0 * math.pi
    L2: float = 2.0 * math.pi

    def __post_init__(self):
        for name in ("N1", "N2"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("L1", "L2"):
            length = float(getattr(self, name))
            if not (math.isfinite(length) and length > 0):
                raise ValueError(f"{name} must be a positive finite length, got {length!r}")
            object.__setattr__(self, name, length)

    @classmethod
    def square(cls, N: int, L: float = 2.0 * math.pi) -> "GridSpec":
        return cls(N, N, L, L)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.N1, self.N2 // 2 + 1)

    @property
    def area(self) -> float:
        return self.L1 * self.L2

    @property
    def cell_area(self) -> float:
        return self.area / (self.N1 * self.N2)

    @property
    def kappa_min(self) -> float:
        """Smallest nonzero wavenumber magnitude (the discrete Poincare constant)."""
        return min(2.0 * math.pi / self.L1, 2.0 * math.pi / self.L2)

    # Cached arrays are idempotent to compute, so a race between threads only
    # duplicates work.
    @cached_property
    def mode_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer mode numbers ``(xi1, xi2)`` broadcastable to the spectral shape."""
        xi1 = np.fft.fftfreq(self.N1, d=1.0 / self.N1).round().astype(np.int64)
        xi2 = np.arange(self.N2 // 2 + 1, dtype=np.int64)
        return xi1[:, None], xi2[None, :]

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        xi1, xi2 = self.mode_indices
        return 2.0 * math.pi * xi1 / self.L1, 2.0 * math.pi * xi2 / self.L2

    @cached_property
    def odd_wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist entry of each axis set to zero."""
        kx, ky = (k.copy() for k in self.wavenumbers)
        kx[self.N1 // 2, 0] = 0.0
        ky[0, self.N2 // 2] = 0.0
        return kx, ky

    @cached_property
    def k_sq(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return kx**2 + ky**2

    @cached_property
    def k_sq_odd(self) -> np.ndarray:
        """``|kappa|^2`` seen by a gradient followed by a divergence."""
        kx, ky = self.odd_wavenumbers
        return kx**2 + ky**2

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        w = np.full(self.spectral_shape[1], 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, :]

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.N1) * (self.L1 / self.N1)
        y = np.arange(self.N2) * (self.L2 / self.N2)
        return np.meshgrid(x, y, indexing="ij")

    def scaled_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates mapped onto ``(0, 2 pi)^2``."""
        x, y = self.coordinates()
        return 2.0 * math.pi * x / self.L1, 2.0 * math.pi * y / self.L2


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a periodic field on ``grid``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    def mean(self) -> float:
        return float(self.values.mean())

    def __add__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RealField":
        return RealField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Unnormalized half-spectrum DFT coefficients of a real field."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match {self.grid.spectral_shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("spectrum contains non-finite coefficients")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real) / (self.grid.N1 * self.grid.N2)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__


def _same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def imaginary_residue(grid: GridSpec, coeffs: np.ndarray) -> float:
    """Bound on the imaginary part an inverse of ``coeffs`` would carry.

    Only the self-conjugate columns (``xi2 = 0`` and ``xi2 = N2/2``) can break
    Hermitian symmetry in the half-spectrum layout; their anti-Hermitian part
    is summed and divided by ``N1 * N2``.
    """
    cols = coeffs[:, [0, grid.N2 // 2]]
    mirrored = np.conj(np.roll(cols[::-1], 1, axis=0))
    anti = 0.5 * (cols - mirrored)
    return float(np.abs(anti).sum()) / (grid.N1 * grid.N2)


def forward(f: RealField) -> SpectralField:
    return SpectralField(f.grid, np.fft.rfft2(f.values))


def inverse(F: SpectralField) -> RealField:
    grid = F.grid
    residue = imaginary_residue(grid, F.coeffs)
    scale = max(1.0, float(np.abs(F.coeffs).max(initial=0.0)) / (grid.N1 * grid.N2))
    if residue > IMAG_REJECT_TOL * scale:
        raise SpectralSymmetryError(
            f"spectrum is not Hermitian: imaginary residue {residue:.3e} exceeds "
            f"{IMAG_REJECT_TOL:g} (relative to amplitude {scale:.3e})"
        )
    # Any residue below the reject threshold is discarded by irfft2.
    return RealField(grid, np.fft.irfft2(F.coeffs, s=grid.shape))


def gradient(F: SpectralField) -> tuple[RealField, RealField]:
    grid = F.grid
    kx, ky = grid.odd_wavenumbers
    gx = np.fft.irfft2(1j * kx * F.coeffs, s=grid.shape)
    gy = np.fft.irfft2(1j * ky * F.coeffs, s=grid.shape)
    return RealField(grid, gx), RealField(grid, gy)


def divergence(vx: RealField, vy: RealField) -> SpectralField:
    _same_grid(vx.grid, vy.grid)
    grid = vx.grid
    kx, ky = grid.odd_wavenumbers
    coeffs = 1j * kx * np.fft.rfft2(vx.values) + 1j * ky * np.fft.rfft2(vy.values)
    return SpectralField(grid, coeffs)


def laplacian_symbol(g: GridSpec) -> np.ndarray:
    """Per-mode symbol ``-|kappa|^2`` of the Laplacian (a copy)."""
    return -g.k_sq


def laplacian(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, -F.grid.k_sq * F.coeffs)


def integrate(f: RealField) -> float:
    """Rectangle rule, spectrally accurate for smooth periodic integrands."""
    return float(f.values.sum()) * f.grid.cell_area


def _parseval(grid: GridSpec, coeffs: np.ndarray, symbol: np.ndarray | float = 1.0) -> float:
    power = grid.parseval_weights * (symbol * np.abs(coeffs) ** 2)
    return float(power.sum()) * grid.area / (grid.N1 * grid.N2) ** 2


def seminorms(f: RealField | SpectralField) -> tuple[float, float, float]:
    """Return ``(||f||^2, ||grad f||^2, ||lap f||^2)`` by Parseval."""
    F = f if isinstance(f, SpectralField) else forward(f)
    grid = F.grid
    k2 = grid.k_sq
    return (
        _parseval(grid, F.coeffs),
        _parseval(grid, F.coeffs, k2),
        _parseval(grid, F.coeffs, k2 * k2),
    )


def dealias_mask(g: GridSpec) -> np.ndarray:
    """2/3-rule mask: keep modes with ``|xi_d| < N_d / 3`` on both axes."""
    xi1, xi2 = g.mode_indices
    return (np.abs(xi1) < g.N1 / 3.0) & (np.abs(xi2) < g.N2 / 3.0)


def write_snapshot(path: str | Path, f: RealField, t: float) -> None:
    g = f.grid
    header = f"# {SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {g.N1} {g.N2} {g.L1!r} {g.L2!r} {float(t)!r}"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, f.values, fmt="%.17g")


def read_snapshot(path: str | Path) -> tuple[RealField, float]:
    """Read a field written by :func:`write_snapshot`; returns ``(field, t)``."""
    with open(path) as fh:
        header = fh.readline().split()
        body = fh.read().split()
    if len(header) != 8 or header[0] != "#" or header[1] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a {SNAPSHOT_MAGIC} snapshot (header {' '.join(header)!r})")
    if header[2] != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {header[2]!r}")
    try:
        N1, N2 = int(header[3]), int(header[4])
        L1, L2, t = float(header[5]), float(header[6]), float(header[7])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed snapshot header") from exc
    if len(body) != N1 * N2:
        raise ValueError(f"{path}: expected {N1 * N2} values, found {len(body)}")
    values = np.array(body, dtype=np.float64).reshape(N1, N2)
    return RealField(GridSpec(N1, N2, L1, L2), values), t
