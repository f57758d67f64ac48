"""Periodic box ``[-L, L)**N`` standing in for R^N, plus its Fourier machinery.

Sample ``i`` along an axis sits at ``x_i = -L + i * dx`` so the box centre
(the origin) is sample ``M // 2``.  Fourier coefficients are taken with the
origin as phase reference and normalized by ``1 / M**N``; coefficient ``k = 0``
is then the spatial mean and ``xi_k = pi * k / L``.  Frequencies are stored in
the usual wrap-around order ``0, 1, ..., M/2, -M/2 + 1, ..., -1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "SpectralField",
    "WaveNumbers",
    "field_norm",
    "forward_transform",
    "gaussian_initial",
    "inverse_transform",
    "wavenumbers",
]

IMAG_TOL = 1.0e-9


@dataclass(frozen=True)
class GridSpec:
    ndim: int
    points: int
    half_width: float

    def __post_init__(self) -> None:
        if self.ndim not in (1, 2, 3):
            raise ValueError(f"ndim must be 1, 2 or 3, got {self.ndim!r}")
        m = self.points
        if not isinstance(m, (int, np.integer)) or m < 8 or m & (m - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {m!r}")
        if not (self.half_width > 0.0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.ndim

    @property
    def size(self) -> int:
        return self.points**self.ndim

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def cell_volume(self) -> float:
        return self.dx**self.ndim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.ndim

    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.points)

    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis()] * self.ndim), indexing="ij")

    def displacement(self, center: Sequence[float] | None = None) -> list[np.ndarray]:
        """Minimum-image displacement ``x - center`` per axis."""
        center = _as_center(center, self.ndim)
        period = 2.0 * self.half_width
        out = []
        for xi, ci in zip(self.coordinates(), center):
            d = xi - ci
            out.append(d - period * np.round(d / period))
        return out

    def radius(self, center: Sequence[float] | None = None) -> np.ndarray:
        return np.sqrt(sum(d * d for d in self.displacement(center)))


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise ValueError(f"field has {values.size} samples, grid needs {self.grid.size}")
        self.values = values.reshape(self.grid.shape)

    def mean(self) -> float:
        return float(self.values.mean())

    def copy(self) -> ScalarField:
        return ScalarField(self.grid, self.values.copy())


@dataclass
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {self.grid.shape}")
        self.coeffs = coeffs


@dataclass(frozen=True)
class WaveNumbers:
    grid: GridSpec
    xi_squared: np.ndarray = field(repr=False)
    # same quantity in the half-spectrum layout used by rfftn
    xi_squared_half: np.ndarray = field(repr=False)


@lru_cache(maxsize=32)
def wavenumbers(grid: GridSpec) -> WaveNumbers:
    m = grid.points
    xi = math.pi / grid.half_width * np.fft.fftfreq(m, d=1.0 / m)
    xi_half = math.pi / grid.half_width * np.fft.rfftfreq(m, d=1.0 / m)
    axes = [xi] * grid.ndim
    full = sum(a**2 for a in np.meshgrid(*axes, indexing="ij"))
    half = sum(a**2 for a in np.meshgrid(*(axes[:-1] + [xi_half]), indexing="ij"))
    full.setflags(write=False)
    half.setflags(write=False)
    return WaveNumbers(grid, full, half)


def forward_transform(f: ScalarField) -> SpectralField:
    g = f.grid
    coeffs = np.fft.fftn(np.fft.ifftshift(f.values)) / g.size
    return SpectralField(g, coeffs)


def inverse_transform(spec: SpectralField) -> ScalarField:
    g = spec.grid
    raw = np.fft.fftshift(np.fft.ifftn(spec.coeffs) * g.size)
    residue = np.max(np.abs(raw.imag)) if raw.size else 0.0
    scale = max(1.0, float(np.max(np.abs(raw.real))))
    if residue > IMAG_TOL * scale:
        raise ValueError(f"coefficients are not Hermitian: imaginary residue {residue:.3e}")
    return ScalarField(g, raw.real)


def rfft(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Half-spectrum coefficients with the :func:`forward_transform` normalization."""
    axes = tuple(range(-grid.ndim, 0))
    return np.fft.rfftn(np.fft.ifftshift(values, axes=axes), axes=axes) / grid.size


def irfft(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(-grid.ndim, 0))
    raw = np.fft.irfftn(coeffs * grid.size, s=grid.shape, axes=axes)
    return np.fft.fftshift(raw, axes=axes)


def gaussian_initial(
    grid: GridSpec,
    amplitude: float,
    width: float,
    center: Sequence[float] | None = None,
) -> ScalarField:
    """``amplitude * exp(-|x - c|**2 / (2 width**2))`` wrapped onto the box.

    The width must not exceed ``L / 8`` so the profile is below ``1e-14`` of
    its peak at the box edge.
    """
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    if not width > 0.0:
        raise ValueError("width must be positive")
    if width > grid.half_width / 8.0:
        raise ValueError(f"width {width} exceeds L/8 = {grid.half_width / 8.0}")
    r2 = sum(d * d for d in grid.displacement(center))
    return ScalarField(grid, amplitude * np.exp(-r2 / (2.0 * width**2)))


def field_norm(f: ScalarField, p: float | str) -> float:
    """Discrete L^p norm with cell-volume weight; ``p`` in {1, 2, inf}."""
    if isinstance(p, str):
        try:
            p = float(p)
        except ValueError:
            raise ValueError(f"unsupported norm order {p!r}; use 1, 2 or inf") from None
    if p == 1:
        return float(np.sum(np.abs(f.values)) * f.grid.cell_volume)
    if p == 2:
        return float(math.sqrt(np.sum(f.values**2) * f.grid.cell_volume))
    if p == math.inf:
        return float(np.max(np.abs(f.values)))
    raise ValueError(f"unsupported norm order {p!r}; use 1, 2 or inf")


def _as_center(center: Sequence[float] | None, ndim: int) -> tuple[float, ...]:
    if center is None:
        return (0.0,) * ndim
    if np.isscalar(center):
        return (float(center),) * ndim
    c = tuple(float(v) for v in center)
    if len(c) != ndim:
        raise ValueError(f"center needs {ndim} components, got {len(c)}")
    return c
