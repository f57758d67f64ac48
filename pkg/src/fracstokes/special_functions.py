"""Mittag-Leffler function on the real line and its two-sided bounds.

Branch selection for :func:`mittag_leffler` with ``beta == 1`` and ``z = -x < 0``:

* ``x**(1/alpha) <= SERIES_LIMIT``: Taylor series.  The amount of cancellation
  grows like ``exp(x**(1/alpha))`` so the series is only used where it stays
  below a few hundred.
* ``x**(1/alpha) >= ASYMPTOTIC_LIMIT``: the algebraic asymptotic expansion
  ``sum_k (-1)**(k+1) x**-k / Gamma(1 - alpha k)``, truncated at its smallest
  term.  If that term is not small enough the point is handed to quadrature.
* everything else: adaptive quadrature of the spectral-density representation

  .. math::

      E_{\\alpha}(-x) = \\frac{\\sin \\alpha\\pi}{\\alpha\\pi}
          \\int_0^\\infty \\frac{x\\, e^{-y^{1/\\alpha}}}
          {y^2 + 2 x y \\cos\\alpha\\pi + x^2} \\, dy.

  Above ``PEAK_ALPHA`` the density collapses onto ``y = x`` with width of
  order ``(1 - alpha) x``; each point is then integrated separately with a
  tangent substitution across the peak.  Orders within ``MIN_GAP`` of 1 are
  refused there with :class:`ConvergenceError`.

Positive arguments use the (cancellation free) series, or the exponential
leading term once it dominates every correction by ``exp(EXP_LIMIT)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad, quad_vec
from scipy.special import gammaln, rgamma

__all__ = [
    "BoundPair",
    "ConvergenceError",
    "MLArg",
    "gamma_fn",
    "mittag_leffler",
    "mittag_leffler_neg",
    "simon_bounds",
]

TOL = 1.0e-10
MAX_TERMS = 10_000

SERIES_LIMIT = 3.0
ASYMPTOTIC_LIMIT = 30.0
EXP_LIMIT = 40.0
# e**-50 below the smallest retained magnitude
QUAD_CUTOFF = 50.0
# above this order the density peak gets its own breakpoint
PEAK_ALPHA = 0.98
PEAK_WIDTHS = 50.0
MIN_GAP = 1.0e-10

_LOG_DBL_MAX = math.log(np.finfo(float).max)
_EPS = np.finfo(float).eps


class ConvergenceError(ArithmeticError):
    """Raised when no evaluation branch reaches the requested tolerance."""


@dataclass(frozen=True)
class MLArg:
    alpha: float
    z: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not math.isfinite(self.beta):
            raise ValueError(f"beta must be finite, got {self.beta!r}")
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z!r}")


class BoundPair(NamedTuple):
    lower: float
    upper: float


def gamma_fn(x: float) -> float:
    """Euler gamma function; raises ``ValueError`` at the poles 0, -1, -2, ..."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"gamma_fn needs a finite argument, got {x!r}")
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"gamma_fn has a pole at {x!r}")
    return math.gamma(x)


def simon_bounds(alpha: float, x: float) -> BoundPair:
    """Uniform bounds ``lower <= E_alpha(-x) <= upper`` for ``x >= 0``.

    ``lower = 1/(1 + Gamma(1 - alpha) x)``, ``upper = 1/(1 + x/Gamma(1 + alpha))``.
    At ``x = 0`` both bounds are 1.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    if not (x >= 0.0) or not math.isfinite(x):
        raise ValueError(f"x must be finite and nonnegative, got {x!r}")
    lower = 1.0 / (1.0 + math.gamma(1.0 - alpha) * x)
    upper = 1.0 / (1.0 + x / math.gamma(1.0 + alpha))
    return BoundPair(lower, upper)


def mittag_leffler(alpha: float, z: float, beta: float = 1.0) -> float:
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z``.

    Relative accuracy target is ``1e-10``.  Raises :class:`OverflowError` when
    the value is outside the double range and :class:`ConvergenceError` when no
    branch reaches the tolerance (only possible for ``beta != 1``).
    """
    arg = MLArg(float(alpha), float(z), float(beta))
    alpha, z, beta = arg.alpha, arg.z, arg.beta

    if z == 0.0:
        return float(rgamma(beta))
    if alpha == 1.0 and beta == 1.0:
        return math.exp(z)
    if z > 0.0:
        return _positive(alpha, beta, z)
    if beta == 1.0:
        return float(mittag_leffler_neg(alpha, np.array([-z]))[0])
    return _series_checked(alpha, beta, z)


def mittag_leffler_neg(alpha: float, x: np.ndarray) -> np.ndarray:
    """Vectorized ``E_{alpha,1}(-x)`` for an array of ``x >= 0``."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0):
        raise ValueError("mittag_leffler_neg expects finite x >= 0")
    if alpha == 1.0:
        return np.exp(-x)

    flat = x.ravel()
    out = np.empty_like(flat)
    scale = flat ** (1.0 / alpha)

    small = scale <= SERIES_LIMIT
    if np.any(small):
        out[small] = _neg_series(alpha, flat[small])

    pending = ~small
    big = scale >= ASYMPTOTIC_LIMIT
    if np.any(big):
        idx = np.flatnonzero(big)
        values, ok = _neg_asymptotic(alpha, flat[idx])
        out[idx[ok]] = values[ok]
        pending[idx[ok]] = False

    if np.any(pending):
        out[pending] = _neg_quadrature(alpha, flat[pending])
    return out.reshape(x.shape)


def _neg_series(alpha: float, x: np.ndarray) -> np.ndarray:
    # |term_k| <= 3**(alpha k) / Gamma(alpha k + 1) < 1e-19 once alpha k >= 40
    nterms = int(math.ceil(40.0 / alpha)) + 2
    k = np.arange(nterms, dtype=float)
    coeff = rgamma(alpha * k + 1.0) * np.where(k % 2 == 0, 1.0, -1.0)
    terms = np.power(x[:, None], k[None, :]) * coeff[None, :]
    return terms.sum(axis=1)


def _neg_asymptotic(alpha: float, x: np.ndarray, kmax: int = 120) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, kmax + 1, dtype=float)
    coeff = rgamma(1.0 - alpha * k) * np.where(k % 2 == 1, 1.0, -1.0)
    with np.errstate(under="ignore", over="ignore"):
        logmag = -k[None, :] * np.log(x)[:, None]
        terms = np.exp(logmag) * coeff[None, :]
    mag = np.abs(terms)
    # rgamma vanishes at integer alpha*k; those terms cannot signal stalling
    live = coeff != 0.0
    mag_live = np.where(live[None, :], mag, np.inf)
    stop = np.argmin(mag_live, axis=1)
    cums = np.cumsum(terms, axis=1)
    rows = np.arange(len(x))
    # the smallest term is the error estimate; it is excluded from the sum
    partial = np.where(stop > 0, cums[rows, np.maximum(stop - 1, 0)], 0.0)
    err = mag_live[rows, stop]
    ok = (stop > 0) & (err <= 1.0e-3 * TOL * np.abs(partial))
    return partial, ok


def _neg_quadrature(alpha: float, x: np.ndarray) -> np.ndarray:
    if 1.0 - alpha < MIN_GAP:
        # peak narrower than the digits that locate it; see PEAK_ALPHA path
        raise ConvergenceError(f"alpha={alpha!r} too close to 1 for the integral representation at x={x.max():.6g}")
    c = math.cos(alpha * math.pi)
    # 1 - alpha is exact here; sin(alpha pi) would lose digits as alpha -> 1
    s = math.sin((1.0 - alpha) * math.pi)
    inv_alpha = 1.0 / alpha
    # normalize by the lower bound so every component is O(1)
    lower = 1.0 / (1.0 + math.gamma(1.0 - alpha) * x)
    # the prefactor goes inside so the tolerances apply to the result; as
    # alpha -> 1 the density concentrates near y = x with height ~ 1/s
    pref = s / (alpha * math.pi)

    def integrand(y: float) -> np.ndarray:
        return pref * math.exp(-(y**inv_alpha)) * x / ((y - x) ** 2 + 2.0 * (1.0 + c) * x * y) / lower

    ymax = QUAD_CUTOFF**alpha
    if alpha > PEAK_ALPHA:
        # too narrow for a shared mesh.  The denominator is a shifted square
        # (y - x - d0)**2 + width**2, so y = x + d0 + width*tan(theta)
        # flattens the peak; 1 + cos(alpha pi) is formed without cancellation.
        value = np.empty_like(x)
        err = 0.0  # relative, per component
        one_plus_c = 2.0 * math.sin(0.5 * (1.0 - alpha) * math.pi) ** 2
        for i, xi in enumerate(x):
            k = 2.0 * one_plus_c * xi
            d0 = -0.5 * k
            width = math.sqrt(k * xi - 0.25 * k * k)
            scale = pref * xi / width
            centre = xi + d0

            def flat(theta: float, centre=centre, width=width, scale=scale) -> float:
                y = centre + width * math.tan(theta)
                return scale * math.exp(-(y**inv_alpha))

            def tail(y: float, xi=xi, k=k) -> float:
                return pref * math.exp(-(y**inv_alpha)) * xi / ((y - xi) ** 2 + k * y)

            # tangent map across the peak only; it squeezes the tails into
            # slivers near +-pi/2, so those stay in y
            a = max(0.0, centre - PEAK_WIDTHS * width)
            b = min(ymax, centre + PEAK_WIDTHS * width)
            parts = [(flat, math.atan((a - centre) / width), 0.0), (flat, 0.0, math.atan((b - centre) / width))]
            # the tails fall off like 1/(y - x)**2, so cut them into decades
            reach = PEAK_WIDTHS * width
            while a > 0.0 or b < ymax:
                reach *= 10.0
                a_next = max(0.0, centre - reach)
                b_next = min(ymax, centre + reach)
                parts += [(tail, a_next, a), (tail, b, b_next)]
                a, b = a_next, b_next
            total = total_err = 0.0
            for fn, lo, hi in parts:
                if hi <= lo:
                    continue
                with warnings.catch_warnings():
                    # judged by the accumulated estimate below instead
                    warnings.simplefilter("ignore", IntegrationWarning)
                    v, e = quad(fn, lo, hi, epsabs=0.0, epsrel=1.0e-13, limit=2_000)
                total += v
                total_err += e
            # E itself is O(1) here, unlike E / lower
            err = max(err, total_err / total)
            value[i] = total / lower[i]
    else:
        value, err = quad_vec(integrand, 0.0, ymax, epsabs=1.0e-14, epsrel=1.0e-13, norm="max", limit=20_000)
    # summed per-piece estimates in the peak path are already conservative
    limit = TOL if alpha > PEAK_ALPHA else 0.1 * TOL
    if not err <= limit:
        raise ConvergenceError(f"quadrature error estimate {err:.3e} above tolerance (alpha={alpha})")
    return value * lower


def _log_abs_rgamma(a: np.ndarray | float) -> tuple[float, float]:
    """Return (log|1/Gamma(a)|, sign) with sign 0 at the poles of Gamma."""
    r = float(rgamma(a))
    if r == 0.0:
        if a <= 0.0 and a == math.floor(a):
            return -math.inf, 0.0
        return -float(gammaln(a)), 1.0
    return math.log(abs(r)), math.copysign(1.0, r)


def _series_terms(alpha: float, beta: float, z: float):
    """Yield successive series terms ``z**k / Gamma(alpha k + beta)``."""
    logz = math.log(abs(z))
    neg = z < 0.0
    for k in range(MAX_TERMS):
        log_rg, sign = _log_abs_rgamma(alpha * k + beta)
        if sign == 0.0:
            yield k, 0.0, -math.inf
            continue
        logmag = k * logz + log_rg
        if neg and k % 2 == 1:
            sign = -sign
        yield k, sign * math.exp(min(logmag, _LOG_DBL_MAX)), logmag


def _series_sum(alpha: float, beta: float, z: float) -> tuple[float, float]:
    """Compensated partial sum and the sum of absolute terms."""
    terms: list[float] = []
    abs_sum = 0.0
    peak_passed = False
    prev = -math.inf
    for k, term, logmag in _series_terms(alpha, beta, z):
        if logmag > _LOG_DBL_MAX - 1.0:
            raise OverflowError("Mittag-Leffler series terms exceed the double range")
        terms.append(term)
        abs_sum += abs(term)
        # terms grow until alpha k ~ |z|**(1/alpha); only stop once decaying
        if logmag < prev:
            peak_passed = True
        if logmag != -math.inf:
            prev = logmag
        if peak_passed and k > 2 and abs(term) <= 1.0e-17 * max(abs_sum, 1e-300):
            return math.fsum(terms), abs_sum
    raise ConvergenceError(f"series did not converge in {MAX_TERMS} terms (alpha={alpha}, z={z})")


def _positive(alpha: float, beta: float, z: float) -> float:
    scale = z ** (1.0 / alpha)
    if scale >= EXP_LIMIT:
        # leading term (1/alpha) z**((1-beta)/alpha) exp(z**(1/alpha)); the
        # algebraic corrections are O(z**-1) against exp(40)
        logval = scale + (1.0 - beta) / alpha * math.log(z) - math.log(alpha)
        if logval > _LOG_DBL_MAX:
            raise OverflowError(f"E_{alpha},{beta}({z}) exceeds the double range")
        return math.exp(logval)
    value, _ = _series_sum(alpha, beta, z)
    return value


def _series_checked(alpha: float, beta: float, z: float) -> float:
    try:
        value, abs_sum = _series_sum(alpha, beta, z)
    except OverflowError as exc:
        # intermediate terms overflow although the value itself is O(1)
        raise ConvergenceError(f"series terms overflow at z={z} (alpha={alpha}, beta={beta})") from exc
    # every term carries a few ulps of error; cancellation amplifies them
    err = 8.0 * _EPS * abs_sum
    if not err <= TOL * abs(value):
        raise ConvergenceError(
            f"series cancellation too severe at z={z} (alpha={alpha}, beta={beta}); "
            "the asymptotic branch only covers beta == 1"
        )
    return value
