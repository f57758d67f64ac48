"""Mild solutions of ``u_t = D^{1-alpha} Lap u + c t**sigma |x|**rho u**p``.

The mild formulation

    u(t) = G(t) * u0 + int_0^t G(t - s) * F(u(s), s) ds

is solved by Picard iteration on a uniform time grid.  The memory term always
runs from ``s = 0``: the grid is processed in windows, earlier windows are
frozen once converged (the map is causal), and each new window iterates with
the full history folded into a precomputed part.  A window that fails to
converge is halved; a single node that still diverges marks blow-up.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fractional_oracle import TimeGrid
from .linear_propagator import duhamel_weights, multiplier_table
from .spectral_grid import GridSpec, ScalarField, irfft, rfft

__all__ = [
    "NegativeBaseError",
    "RunOutcome",
    "SolveConfig",
    "SourceSpec",
    "Status",
    "contraction_estimate",
    "evolve_semilinear",
    "evolve_system",
    "nonlinearity_field",
    "picard_step",
]

log = logging.getLogger(__name__)

DIVERGENCE_FLOOR = 1.0e3
DIVERGENCE_PATIENCE = 5


class NegativeBaseError(ValueError):
    """A negative sample met a non-integer power with clamping disabled."""


class Status(str, enum.Enum):
    GLOBAL = "Global"
    BLOWUP = "BlowUp"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SourceSpec:
    coefficient: float = 1.0
    sigma: float = 0.0
    rho: float = 0.0
    p: float = 2.0

    def __post_init__(self) -> None:
        if not (self.coefficient >= 0.0 and math.isfinite(self.coefficient)):
            raise ValueError(f"coefficient must be finite and >= 0, got {self.coefficient!r}")
        if not self.sigma > -1.0:
            raise ValueError(f"sigma must exceed -1, got {self.sigma!r}")
        if not self.rho >= 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho!r}")
        # p = 1 (linear reaction) is admitted as a verification case
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p!r}")


@dataclass(frozen=True)
class SolveConfig:
    time: TimeGrid
    picard_tol: float = 1.0e-10
    picard_max_iters: int = 60
    blowup_threshold: float = 1.0e6
    nonneg_clamp: bool = False
    # nodes per Picard window; None iterates on the whole horizon at once
    window: int | None = 32
    keep_trajectory: bool = True
    # fault injection for tests: drop history older than this many steps
    memory_steps: int | None = None

    def __post_init__(self) -> None:
        if not self.picard_tol > 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be >= 1")
        if not self.blowup_threshold > 0.0:
            raise ValueError("blowup_threshold must be positive")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass
class RunOutcome:
    status: Status
    t_star: float | None
    sup_norm_history: list[tuple[float, float]]
    picard_iters_history: list[int]
    picard_distances: list[list[float]] = field(default_factory=list)
    # last node index of each converged Picard window
    window_ends: list[int] = field(default_factory=list)
    times: np.ndarray | None = None
    trajectory: np.ndarray | None = None
    final: ScalarField | None = None
    clamped_samples: int = 0
    reason: str = ""
    # node time at which a step failed to contract from a moderate state
    failure_time: float | None = None

    @property
    def max_sup_norm(self) -> float:
        return max((s for _, s in self.sup_norm_history), default=0.0)

    @property
    def picard_iters(self) -> int:
        return int(sum(self.picard_iters_history))


def _power(u: np.ndarray, p: float, clamp: bool) -> tuple[np.ndarray, int]:
    if clamp:
        neg = u < 0.0
        count = int(np.count_nonzero(neg))
        return np.power(np.where(neg, 0.0, u), p), count
    if float(p).is_integer():
        return u ** int(p), 0
    if np.any(u < 0.0):
        raise NegativeBaseError(f"negative sample {float(u.min()):.3e} raised to non-integer power {p}")
    return np.power(u, p), 0


class _Spatial:
    """``coefficient * r**rho * w**p`` -- the time-independent part of F."""

    def __init__(self, grid: GridSpec, spec: SourceSpec, clamp: bool) -> None:
        self.spec = spec
        self.clamp = clamp
        weight = np.full(grid.shape, spec.coefficient)
        if spec.rho != 0.0:
            weight = weight * grid.radius() ** spec.rho
        self.weight = weight
        self.clamped = 0

    def __call__(self, w: np.ndarray) -> np.ndarray:
        if self.spec.coefficient == 0.0:
            return np.zeros_like(w)
        powered, count = _power(w, self.spec.p, self.clamp)
        self.clamped += count
        return self.weight * powered


def nonlinearity_field(u: ScalarField, spec: SourceSpec, t: float, nonneg_clamp: bool = False) -> ScalarField:
    """Pointwise ``coefficient * t**sigma * r(x)**rho * u**p``.

    ``r`` is the minimum-image distance to the box centre.  ``t**sigma`` is
    singular at ``t = 0`` for ``sigma < 0``; the solvers only use it inside
    the time quadrature, and asking for it here raises ``ValueError``.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0 and spec.sigma < 0.0:
        raise ValueError("t**sigma is singular at t = 0 for sigma < 0")
    factor = t**spec.sigma if spec.sigma != 0.0 else 1.0
    spatial = _Spatial(u.grid, spec, nonneg_clamp)
    return ScalarField(u.grid, factor * spatial(u.values))


@dataclass
class _Component:
    """One unknown of the (possibly coupled) mild-solution system."""

    u0: ScalarField
    alpha: float
    spec: SourceSpec
    driver: int
    spatial: _Spatial
    table: np.ndarray = field(init=False, repr=False)
    u0_hat: np.ndarray = field(init=False, repr=False)


class _Marcher:
    def __init__(self, comps: list[_Component], config: SolveConfig) -> None:
        self.comps = comps
        self.cfg = config
        self.grid = comps[0].u0.grid
        tg = config.time
        self.n = tg.steps
        self.dt = tg.dt
        self.times = tg.nodes
        half = rfft(comps[0].u0.values, self.grid).shape
        for c in comps:
            c.table = multiplier_table(self.grid, c.alpha, self.dt, self.n)
            c.u0_hat = rfft(c.u0.values, self.grid)
        self.s_hat = [np.zeros((self.n + 1, *half), dtype=complex) for _ in comps]
        self.fields = [np.zeros((self.n + 1, *self.grid.shape)) for _ in comps]
        for k, c in enumerate(comps):
            self.fields[k][0] = c.u0.values
        self._weights: dict[tuple[int, float], np.ndarray] = {}
        self.failure_time: float | None = None

    def weights(self, j: int, sigma: float) -> np.ndarray:
        key = (j, sigma)
        w = self._weights.get(key)
        if w is None:
            w = duhamel_weights(j, self.dt, sigma)
            mem = self.cfg.memory_steps
            if mem is not None and j - mem > 0:
                w = w.copy()
                w[: j - mem] = 0.0
            self._weights[key] = w
        return w

    def _source_hat(self, c: _Component, values: np.ndarray) -> np.ndarray:
        return rfft(c.spatial(values), self.grid)

    def history(self, k: int, j: int, j0: int) -> np.ndarray:
        """Homogeneous part plus memory from nodes ``0..j0-1`` at node ``j``."""
        c = self.comps[k]
        out = c.table[j] * c.u0_hat
        w = self.weights(j, c.spec.sigma)[:j0]
        if c.spec.coefficient != 0.0 and np.any(w):
            lagged = c.table[j - j0 + 1 : j + 1][::-1]
            out = out + np.tensordot(w, lagged * self.s_hat[k][:j0], axes=(0, 0))
        return out

    def apply(self, j0: int, j1: int, hist: list[np.ndarray], cand: list[np.ndarray]) -> list[np.ndarray]:
        """One Picard sweep over nodes ``j0..j1`` given candidates there."""
        width = j1 - j0 + 1
        src = []
        for c in self.comps:
            drv = cand[c.driver]
            src.append(np.stack([self._source_hat(c, drv[i]) for i in range(width)]))
        out = []
        for k, c in enumerate(self.comps):
            new_hat = hist[k].copy()
            if c.spec.coefficient != 0.0:
                for jj in range(width):
                    j = j0 + jj
                    w = self.weights(j, c.spec.sigma)[j0 : j + 1]
                    lagged = c.table[jj::-1]
                    new_hat[jj] += np.tensordot(w, lagged * src[k][: jj + 1], axes=(0, 0))
            out.append(irfft(new_hat, self.grid))
        return out

    def run(self) -> tuple[Status, float | None, int, str, list]:
        cfg = self.cfg
        max_window = self.n if cfg.window is None else cfg.window
        window = max_window
        j0 = 1
        self.sup_history: list[tuple[float, float]] = [(0.0, self._sup(0))]
        self.iters: list[int] = []
        self.window_ends: list[int] = []
        self.dists: list[list[float]] = []
        self.last_node = 0
        threshold = cfg.blowup_threshold
        try:
            for k, c in enumerate(self.comps):
                self.s_hat[k][0] = self._source_hat(c, self.fields[c.driver][0])
        except NegativeBaseError as exc:
            return Status.INCONCLUSIVE, None, 0, str(exc), []
        while j0 <= self.n:
            j1 = min(j0 + window - 1, self.n)
            width = j1 - j0 + 1
            hist = [np.stack([self.history(k, j, j0) for j in range(j0, j1 + 1)]) for k in range(len(self.comps))]
            cand = [irfft(h, self.grid) for h in hist]
            try:
                verdict, cand, dists = self._iterate(j0, j1, hist, cand)
            except NegativeBaseError as exc:
                return Status.INCONCLUSIVE, None, j0 - 1, str(exc), []
            if verdict != "converged":
                if width > 1:
                    window = max(1, width // 2)
                    continue
                t_last = float(self.times[j0 - 1])
                # a single step that cannot contract is an escape only once the
                # converged solution is already large; below that the step is
                # simply too coarse for the nonlinearity
                escaped = self.sup_history[-1][1] > DIVERGENCE_FLOOR
                if escaped:
                    return Status.BLOWUP, t_last, j0 - 1, f"Picard iteration lost contraction at t={self.times[j0]:.6g}", dists
                self.failure_time = float(self.times[j0])
                if verdict == "diverged":
                    return Status.INCONCLUSIVE, None, j0 - 1, f"Picard iteration diverged at t={self.times[j0]:.6g} from a moderate state; time step too coarse", dists
                return Status.INCONCLUSIVE, None, j0 - 1, "Picard iteration cap reached", dists
            self.iters.append(len(dists))
            self.dists.append(dists)
            self.window_ends.append(j1)
            for k, c in enumerate(self.comps):
                self.fields[k][j0 : j1 + 1] = cand[k]
            for k, c in enumerate(self.comps):
                drv = self.fields[c.driver]
                for j in range(j0, j1 + 1):
                    self.s_hat[k][j] = self._source_hat(c, drv[j])
            for j in range(j0, j1 + 1):
                sup = self._sup(j)
                t_prev, sup_prev = self.sup_history[-1]
                self.sup_history.append((float(self.times[j]), sup))
                self.last_node = j
                if sup > threshold:
                    frac = (threshold - sup_prev) / (sup - sup_prev) if sup != sup_prev else 1.0
                    t_star = t_prev + frac * (float(self.times[j]) - t_prev)
                    return Status.BLOWUP, t_star, j, f"sup-norm crossed {threshold:g}", []
            j0 = j1 + 1
            window = min(2 * window, max_window)
        return Status.GLOBAL, None, self.n, "", []

    def _sup(self, j: int) -> float:
        return max(float(np.max(np.abs(f[j]))) for f in self.fields)

    def _iterate(self, j0, j1, hist, cand):
        cfg = self.cfg
        dists: list[float] = []
        rising = 0
        guard = cfg.blowup_threshold * 1.0e6
        for _ in range(cfg.picard_max_iters):
            new = self.apply(j0, j1, hist, cand)
            if not all(np.all(np.isfinite(f)) for f in new):
                return "diverged", cand, dists
            sup = max(float(np.max(np.abs(f))) for f in new)
            dist = max(float(np.max(np.abs(a - b))) for a, b in zip(new, cand)) / max(1.0, sup)
            dists.append(dist)
            cand = new
            if dist < cfg.picard_tol:
                return "converged", cand, dists
            rising = rising + 1 if len(dists) > 1 and dist > dists[-2] else 0
            if (rising >= DIVERGENCE_PATIENCE and sup > DIVERGENCE_FLOOR) or sup > guard:
                return "diverged", cand, dists
        return "cap", cand, dists


def _outcome(m: _Marcher, k: int, status: Status, t_star, last: int, reason: str, tail) -> RunOutcome:
    dists = list(m.dists)
    if tail:
        dists.append(list(tail))
    traj = m.fields[k][: last + 1] if m.cfg.keep_trajectory else None
    return RunOutcome(
        status=status,
        t_star=t_star,
        sup_norm_history=[(t, s) for t, s in _component_sup(m, k, last)],
        picard_iters_history=list(m.iters),
        picard_distances=dists,
        window_ends=list(m.window_ends),
        times=m.times[: last + 1].copy(),
        trajectory=traj,
        final=ScalarField(m.grid, m.fields[k][last].copy()),
        clamped_samples=sum(c.spatial.clamped for c in m.comps),
        reason=reason,
        failure_time=m.failure_time,
    )


def _component_sup(m: _Marcher, k: int, last: int):
    f = m.fields[k]
    for j in range(last + 1):
        yield float(m.times[j]), float(np.max(np.abs(f[j])))


def evolve_semilinear(u0: ScalarField, spec: SourceSpec, alpha: float, config: SolveConfig) -> RunOutcome:
    """Picard iteration for the scalar mild solution; failures become a status."""
    _check_alpha(alpha)
    comp = _Component(u0, alpha, spec, 0, _Spatial(u0.grid, spec, config.nonneg_clamp))
    m = _Marcher([comp], config)
    status, t_star, last, reason, tail = m.run()
    out = _outcome(m, 0, status, t_star, last, reason, tail)
    log.debug("semilinear run: %s t_star=%s iters=%d", status, t_star, out.picard_iters)
    return out


def evolve_system(
    u0: ScalarField,
    v0: ScalarField,
    spec_uv: SourceSpec,
    spec_vu: SourceSpec,
    alpha: float,
    beta: float,
    config: SolveConfig,
) -> tuple[RunOutcome, RunOutcome]:
    """Joint Picard iteration for the coupled pair.

    ``u`` has memory order ``alpha`` and is forced by ``spec_uv`` applied to
    ``v`` (exponent ``p``); ``v`` has order ``beta`` and is forced by
    ``spec_vu`` applied to ``u`` (exponent ``q``).  Both outcomes share one
    status and ``t_star``.
    """
    _check_alpha(alpha)
    _check_alpha(beta)
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 live on different grids")
    comps = [
        _Component(u0, alpha, spec_uv, 1, _Spatial(u0.grid, spec_uv, config.nonneg_clamp)),
        _Component(v0, beta, spec_vu, 0, _Spatial(v0.grid, spec_vu, config.nonneg_clamp)),
    ]
    m = _Marcher(comps, config)
    status, t_star, last, reason, tail = m.run()
    return (
        _outcome(m, 0, status, t_star, last, reason, tail),
        _outcome(m, 1, status, t_star, last, reason, tail),
    )


def picard_step(
    candidate: np.ndarray,
    u0: ScalarField,
    spec: SourceSpec,
    alpha: float,
    time: TimeGrid,
    nonneg_clamp: bool = False,
) -> np.ndarray:
    """Apply the mild-solution map once to a whole trajectory.

    ``candidate`` has shape ``(steps + 1, *grid.shape)``; the result has the
    same shape.  Non-finite output is returned as is (callers treat it as
    divergence).
    """
    grid = u0.grid
    n = time.steps
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != (n + 1, *grid.shape):
        raise ValueError(f"candidate shape {candidate.shape} does not match {(n + 1, *grid.shape)}")
    table = multiplier_table(grid, alpha, time.dt, n)
    u0_hat = rfft(u0.values, grid)
    spatial = _Spatial(grid, spec, nonneg_clamp)
    with np.errstate(over="ignore", invalid="ignore"):
        s_hat = np.stack([rfft(spatial(candidate[i]), grid) for i in range(n + 1)])
        out = np.empty_like(candidate)
        for j in range(n + 1):
            coeffs = table[j] * u0_hat
            if spec.coefficient != 0.0 and j > 0:
                w = duhamel_weights(j, time.dt, spec.sigma)
                coeffs = coeffs + np.tensordot(w, table[j::-1] * s_hat[: j + 1], axes=(0, 0))
            out[j] = irfft(coeffs, grid)
    return out


def contraction_estimate(distances: list[float] | np.ndarray) -> float:
    """Largest observed ratio ``d_{k+1} / d_k`` of successive Picard distances.

    A zero distance means the map reached its fixed point exactly; the ratio
    is then reported as 0.
    """
    d = np.asarray(distances, dtype=float)
    if d.size and np.any(d == 0.0):
        return 0.0
    if d.size < 3:
        raise ValueError("need at least three Picard distances")
    return float(np.max(d[1:] / d[:-1]))


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
