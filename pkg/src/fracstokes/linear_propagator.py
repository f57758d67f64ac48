"""Solution operators of the linear equation ``u_t = D^{1-alpha} Lap u + f``.

Every Fourier mode evolves independently by the factor
``E_alpha(-|xi|**2 t**alpha)``; forcing is added through the Duhamel time
convolution with the same factor.  There is no semigroup property for
``alpha < 1`` -- evolving to ``t1`` and then by ``t2`` is *not* evolving to
``t1 + t2`` -- so every evaluation starts from the initial data.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .fractional_oracle import TimeGrid
from .spectral_grid import GridSpec, ScalarField, field_norm, irfft, rfft, wavenumbers
from .special_functions import mittag_leffler_neg

__all__ = [
    "Multiplier",
    "SourceSampler",
    "StabilityReport",
    "duhamel_weights",
    "evolve_duhamel",
    "evolve_homogeneous",
    "green_function",
    "multiplier",
    "multiplier_table",
    "stability_report",
]

log = logging.getLogger(__name__)

CACHE_ENV = "FRACSTOKES_CACHE"


@dataclass(frozen=True)
class Multiplier:
    grid: GridSpec
    alpha: float
    t: float
    m: np.ndarray


@dataclass(frozen=True)
class SourceSampler:
    """Deterministic forcing ``f(x, t)``.

    ``func(coords, t)`` receives the list of coordinate arrays from
    :meth:`GridSpec.coordinates` and returns the samples at time ``t``.
    """

    grid: GridSpec
    func: Callable[[list[np.ndarray], float], np.ndarray]

    def __call__(self, t: float) -> ScalarField:
        values = np.broadcast_to(np.asarray(self.func(self.grid.coordinates(), float(t)), dtype=float), self.grid.shape)
        return ScalarField(self.grid, np.array(values))

    @classmethod
    def zero(cls, grid: GridSpec) -> SourceSampler:
        return cls(grid, lambda coords, t: np.zeros(grid.shape))


class StabilityReport(NamedTuple):
    norm_t: float
    norm_0: float
    ratio: float


def _factor(xi2: np.ndarray, alpha: float, t: float) -> np.ndarray:
    if t == 0.0:
        return np.ones_like(xi2)
    # only distinct |xi|^2 values need an evaluation
    uniq, inverse = np.unique(xi2, return_inverse=True)
    vals = mittag_leffler_neg(alpha, uniq * t**alpha)
    return vals[inverse].reshape(xi2.shape)


def multiplier(grid: GridSpec, alpha: float, t: float) -> Multiplier:
    """``E_alpha(-|xi_k|**2 t**alpha)`` on the full frequency layout."""
    _check_alpha(alpha)
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError(f"t must be finite and nonnegative, got {t!r}")
    m = _factor(wavenumbers(grid).xi_squared, alpha, t)
    m.setflags(write=False)
    return Multiplier(grid, alpha, t, m)


class _TableCache:
    """Multiplier tables keyed by (grid, alpha, dt), grown on demand.

    Readers may run concurrently; inserts take the lock.  An optional on-disk
    copy lives under ``$FRACSTOKES_CACHE``.
    """

    def __init__(self) -> None:
        self._tables: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, grid: GridSpec, alpha: float, dt: float, lags: int) -> np.ndarray:
        key = (grid, float(alpha), float(dt))
        table = self._tables.get(key)
        if table is not None and len(table) > lags:
            return table[: lags + 1]
        table = self._load(key, lags)
        if table is None:
            table = _compute_table(grid, alpha, dt, lags)
            self._store(key, table)
        with self._lock:
            current = self._tables.get(key)
            if current is None or len(current) < len(table):
                self._tables[key] = table
        return table[: lags + 1]

    def clear(self) -> None:
        with self._lock:
            self._tables.clear()

    @staticmethod
    def _path(key: tuple, lags: int) -> Path | None:
        root = os.environ.get(CACHE_ENV)
        if not root:
            return None
        grid, alpha, dt = key
        tag = f"{grid.ndim}:{grid.points}:{grid.half_width!r}:{alpha!r}:{dt!r}:{lags}"
        return Path(root) / f"mult-{hashlib.sha256(tag.encode()).hexdigest()[:24]}.npy"

    def _load(self, key: tuple, lags: int) -> np.ndarray | None:
        path = self._path(key, lags)
        if path is None or not path.exists():
            return None
        try:
            table = np.load(path)
        except (OSError, ValueError):
            return None
        if table.shape != (lags + 1, *wavenumbers(key[0]).xi_squared_half.shape):
            return None
        table.setflags(write=False)
        return table

    def _store(self, key: tuple, table: np.ndarray) -> None:
        path = self._path(key, len(table) - 1)
        if path is None:
            return
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".{os.getpid()}.tmp")
            with open(tmp, "wb") as fh:
                np.save(fh, table)
            os.replace(tmp, path)
        except OSError as exc:
            log.warning("could not write multiplier cache %s: %s", path, exc)


def _compute_table(grid: GridSpec, alpha: float, dt: float, lags: int) -> np.ndarray:
    xi2 = wavenumbers(grid).xi_squared_half
    uniq, inverse = np.unique(xi2, return_inverse=True)
    t_alpha = (dt * np.arange(lags + 1)) ** alpha
    vals = mittag_leffler_neg(alpha, np.outer(t_alpha, uniq))
    table = vals[:, inverse.ravel()].reshape((lags + 1, *xi2.shape))
    table.setflags(write=False)
    return table


_CACHE = _TableCache()


def multiplier_table(grid: GridSpec, alpha: float, dt: float, lags: int) -> np.ndarray:
    """Half-spectrum multipliers at times ``l * dt`` for ``l = 0..lags``."""
    _check_alpha(alpha)
    return _CACHE.get(grid, alpha, dt, lags)


def clear_cache() -> None:
    _CACHE.clear()


def evolve_homogeneous(u0: ScalarField, alpha: float, t: float) -> ScalarField:
    """Solution of the unforced problem at time ``t``."""
    _check_alpha(alpha)
    grid = u0.grid
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError(f"t must be finite and nonnegative, got {t!r}")
    m = _factor(wavenumbers(grid).xi_squared_half, alpha, t)
    return ScalarField(grid, irfft(m * rfft(u0.values, grid), grid))


def green_function(grid: GridSpec, alpha: float, t: float) -> ScalarField:
    """Periodic Green function at ``t > 0``, normalized to unit discrete mass."""
    _check_alpha(alpha)
    if not t > 0.0:
        raise ValueError("the Green function is a delta at t = 0; need t > 0")
    m = _factor(wavenumbers(grid).xi_squared_half, alpha, t)
    return ScalarField(grid, irfft(m, grid) / grid.volume)


def duhamel_weights(j: int, dt: float, sigma: float = 0.0) -> np.ndarray:
    """Quadrature weights for ``int_0^{t_j} tau**sigma g(tau) dtau`` from ``g(t_0..t_j)``.

    Trapezoidal rule on ``tau**sigma g``.  For ``-1 < sigma < 0`` the first
    panel is integrated exactly against the linear interpolant of ``g``.
    """
    if j < 0:
        raise ValueError("node index must be nonnegative")
    w = np.zeros(j + 1)
    if j == 0:
        return w
    t = dt * np.arange(j + 1)
    if sigma >= 0.0:
        tw = t**sigma  # 0**0 == 1
        w[:] = dt * tw
        w[0] *= 0.5
        w[j] *= 0.5
        return w
    if sigma <= -1.0:
        raise ValueError("sigma must exceed -1")
    h1 = dt ** (sigma + 1.0)
    w[0] = h1 * (1.0 / (sigma + 1.0) - 1.0 / (sigma + 2.0))
    w[1] = h1 / (sigma + 2.0)
    if j >= 2:
        tw = t[1:] ** sigma
        w[1:] += dt * tw
        w[1] -= 0.5 * dt * tw[0]
        w[j] -= 0.5 * dt * tw[-1]
    return w


def evolve_duhamel(u0: ScalarField, source: SourceSampler, alpha: float, grid: TimeGrid) -> ScalarField:
    """Forced solution at ``grid.t_end``.

    ``u^(T) = m(T) u0^ + sum_j w_j m(T - tau_j) f^(tau_j)`` with trapezoidal
    weights ``w_j``.
    """
    _check_alpha(alpha)
    space = u0.grid
    if source.grid != space:
        raise ValueError("source and initial data live on different grids")
    n = grid.steps
    if n < 8:
        warnings.warn(f"Duhamel quadrature with only {n} steps is inaccurate", RuntimeWarning, stacklevel=2)
    table = multiplier_table(space, alpha, grid.dt, n)
    # the homogeneous part goes through the same code path as evolve_homogeneous
    m_end = _factor(wavenumbers(space).xi_squared_half, alpha, grid.t_end)
    coeffs = m_end * rfft(u0.values, space)
    weights = duhamel_weights(n, grid.dt)
    nodes = grid.nodes
    forced = np.zeros_like(coeffs)
    for j in range(n + 1):
        fj = source(nodes[j]).values
        if not np.any(fj):
            continue
        forced += weights[j] * table[n - j] * rfft(fj, space)
    return ScalarField(space, irfft(coeffs + forced, space))


def stability_report(u0: ScalarField, alpha: float, t: float, p: float | str) -> StabilityReport:
    """Compare ``||u(t)||_p`` with ``||u0||_p``; purely diagnostic."""
    norm_0 = field_norm(u0, p)
    norm_t = field_norm(evolve_homogeneous(u0, alpha, t), p)
    if norm_0 == 0.0:
        ratio = 1.0 if norm_t == 0.0 else math.inf
    else:
        ratio = norm_t / norm_0
    if ratio > 1.0:
        log.info("L^%s norm grew by a factor %.12g at alpha=%g, t=%g", p, ratio, alpha, t)
    return StabilityReport(norm_t, norm_0, ratio)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
