"""Time-domain discretization of the Riemann-Liouville derivative.

This is deliberately unrelated to the Fourier/Mittag-Leffler route: the
fractional integral ``I^alpha`` is evaluated by product-trapezoidal quadrature
(exact integration of the kernel against the piecewise-linear interpolant),
and ``D^{1-alpha} = d/dt I^alpha`` takes a backward difference on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "InstabilityError",
    "RLWeights",
    "TimeGrid",
    "fractional_integral",
    "rl_derivative_discrete",
    "rl_weights",
    "solve_scalar_mode",
]

INSTABILITY_BOUND = 1.0e3


class InstabilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    steps: int

    def __post_init__(self) -> None:
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def nodes(self) -> np.ndarray:
        t = self.dt * np.arange(self.steps + 1)
        t[-1] = self.t_end
        return t


@dataclass(frozen=True)
class RLWeights:
    """Product-trapezoid coefficients for ``I^alpha`` on a uniform grid.

    ``I^alpha f(t_n) ~ dt**alpha / Gamma(alpha + 2) * sum_j a_{j,n} f_j`` with
    ``a_{n,n} = 1``, ``a_{j,n} = lag[n - j]`` for ``0 < j < n`` and
    ``a_{0,n} = start[n]``.
    """

    alpha: float
    lag: np.ndarray
    start: np.ndarray

    def row(self, n: int) -> np.ndarray:
        w = np.empty(n + 1)
        w[0] = self.start[n]
        if n >= 1:
            w[1:n] = self.lag[n - 1 : 0 : -1]
            w[n] = 1.0
        return w


@lru_cache(maxsize=64)
def rl_weights(alpha: float, steps: int) -> RLWeights:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    a1 = alpha + 1.0
    m = np.arange(steps + 1, dtype=float)
    lag = np.ones(steps + 1)
    mm = m[1:]
    lag[1:] = (mm + 1.0) ** a1 - 2.0 * mm**a1 + (mm - 1.0) ** a1
    start = np.zeros(steps + 1)
    start[1:] = (mm - 1.0) ** a1 - (mm - alpha - 1.0) * mm**alpha
    lag.setflags(write=False)
    start.setflags(write=False)
    return RLWeights(alpha, lag, start)


def fractional_integral(samples: np.ndarray, alpha: float, grid: TimeGrid) -> np.ndarray:
    """``I^alpha f`` at every node (zero at ``t_0``)."""
    f = np.asarray(samples, dtype=float)
    n_nodes = len(f)
    if n_nodes > grid.steps + 1:
        raise ValueError("more samples than grid nodes")
    w = rl_weights(float(alpha), grid.steps)
    c = grid.dt**alpha / math.gamma(alpha + 2.0)
    out = np.zeros(n_nodes)
    for n in range(1, n_nodes):
        out[n] = c * (w.start[n] * f[0] + np.dot(w.lag[n - 1 : 0 : -1], f[1:n]) + f[n])
    return out


def rl_derivative_discrete(samples: np.ndarray, alpha: float, j: int, grid: TimeGrid) -> float:
    """First-order approximation of ``D^{1-alpha} f(t_j)``.

    ``j = 0`` is rejected: for ``f(0) != 0`` the derivative behaves like
    ``t**(alpha - 1)`` there.  ``alpha = 1`` is the identity.
    """
    if j < 1:
        raise IndexError("the Riemann-Liouville derivative is not sampled at t_0")
    f = np.asarray(samples, dtype=float)
    if j >= len(f):
        raise IndexError(f"node {j} beyond the {len(f)} samples supplied")
    if alpha == 1.0:
        return float(f[j])
    integral = fractional_integral(f[: j + 1], alpha, grid)
    return float((integral[j] - integral[j - 1]) / grid.dt)


def solve_scalar_mode(lam: float, alpha: float, grid: TimeGrid) -> np.ndarray:
    """Time-step ``y' = -lam * D^{1-alpha} y`` with ``y(0) = 1``.

    Backward difference in time against the product-trapezoid ``I^alpha``;
    the unknown ``y_n`` enters ``I^alpha y(t_n)`` with weight one and is solved
    for directly.  The exact solution is ``E_alpha(-lam t**alpha)``.
    """
    if not (math.isfinite(lam) and lam >= 0.0):
        raise ValueError(f"lambda must be finite and nonnegative, got {lam!r}")
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    n_steps = grid.steps
    w = rl_weights(float(alpha), n_steps)
    c = grid.dt**alpha / math.gamma(alpha + 2.0)
    y = np.empty(n_steps + 1)
    y[0] = 1.0
    integral_prev = 0.0
    for n in range(1, n_steps + 1):
        history = w.start[n] * y[0] + np.dot(w.lag[n - 1 : 0 : -1], y[1:n])
        # y_n - y_{n-1} = -lam * (J_n - J_{n-1}),  J_n = c * (history + y_n)
        y[n] = (y[n - 1] + lam * integral_prev - lam * c * history) / (1.0 + lam * c)
        integral_prev = c * (history + y[n])
        if abs(y[n]) > INSTABILITY_BOUND:
            raise InstabilityError(f"scalar mode solution left [-{INSTABILITY_BOUND}, {INSTABILITY_BOUND}] at step {n}")
    return y
