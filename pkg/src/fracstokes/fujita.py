"""Critical exponents of the scalar equation and the coupled system, plus an
empirical sweep that classifies small-data runs on either side of ``p_c``.

The sweep is a finite-box surrogate: a run counts as ``Global`` when its
sup-norm at the horizon has fallen below the initial one without ever crossing
the blow-up threshold.  Nothing here proves anything; it is a heuristic whose
protocol (horizon, box, width) is fixed up front.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .fractional_oracle import TimeGrid
from .frdf import atomic_write_bytes
from .semilinear_solver import SolveConfig, SourceSpec, Status, evolve_semilinear
from .spectral_grid import GridSpec, ScalarField, gaussian_initial

__all__ = [
    "Boundary",
    "BudgetError",
    "CSV_HEADER",
    "ExponentInputs",
    "SweepConfig",
    "SweepRecord",
    "SystemBounds",
    "SystemExponentInputs",
    "classify",
    "critical_exponent_scalar",
    "l_exponents",
    "lambda_exponent",
    "monotonicity_violations",
    "records_to_csv",
    "run_sweep",
    "system_dimension_bounds",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("p", "amplitude", "alpha", "sigma", "rho", "N", "status", "t_star", "max_sup_norm", "picard_iters", "runtime_s")

# seconds per complex multiply-add of the Duhamel sums (measured on one core,
# rounded up); every cell is projected as if it ran to the horizon
_COST_PER_OP = 5.0e-9

MAX_REFINEMENTS = 12
MAX_BISECTIONS = 16
REFINE_REACH = 4.0


class BudgetError(RuntimeError):
    """The projected sweep runtime exceeds the configured cap."""


def _conj(p: float) -> float:
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentInputs:
    N: int
    alpha: float
    sigma: float = 0.0
    rho: float = 0.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.sigma > -1.0:
            raise ValueError(f"sigma must exceed -1, got {self.sigma!r}")
        if not self.rho >= 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho!r}")


@dataclass(frozen=True)
class SystemExponentInputs:
    N: int
    alpha: float
    beta: float
    p: float
    q: float
    sigma1: float = 0.0
    sigma2: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v > 1.0:
                raise ValueError(f"{name} must exceed 1, got {v!r}")
        for name in ("sigma1", "sigma2"):
            v = getattr(self, name)
            if not v > -1.0:
                raise ValueError(f"{name} must exceed -1, got {v!r}")
        for name in ("rho1", "rho2"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")

    @property
    def p_conj(self) -> float:
        return _conj(self.p)

    @property
    def q_conj(self) -> float:
        return _conj(self.q)


def critical_exponent_scalar(inp: ExponentInputs) -> float:
    """``p_c = 1 + (2 (sigma + 1) + rho alpha) / (N alpha)``."""
    return 1.0 + (2.0 * (inp.sigma + 1.0) + inp.rho * inp.alpha) / (inp.N * inp.alpha)


def lambda_exponent(p: float, inp: ExponentInputs) -> float:
    """Exponent of the test-function scaling; negative exactly when ``p < p_c``.

    ``lambda = (2/a)(a-1)p' - 2p' - (2 sigma/a + rho) p'/p + 2/a + N``.
    """
    if not p > 1.0:
        raise ValueError(f"p must exceed 1, got {p!r}")
    a = inp.alpha
    pc = _conj(p)
    return (2.0 / a) * (a - 1.0) * pc - 2.0 * pc - (2.0 * inp.sigma / a + inp.rho) * pc / p + 2.0 / a + inp.N


def l_exponents(inp: SystemExponentInputs) -> tuple[float, float]:
    """The pair ``(l1, l2)`` of the system blow-up criterion."""
    a, b, N = inp.alpha, inp.beta, inp.N
    l1 = 2.0 / b + (2.0 * inp.sigma1 / b + inp.rho1) / inp.p - (2.0 / b + N) / inp.p_conj
    l2 = 2.0 / a + (2.0 * inp.sigma2 / a + inp.rho2) / inp.q - (2.0 / a + N) / inp.q_conj
    return l1, l2


class SystemBounds(NamedTuple):
    bound1: float
    bound2: float
    blowup_predicted: bool
    sign1: float
    sign2: float


def system_dimension_bounds(inp: SystemExponentInputs) -> SystemBounds:
    """Dimension bounds below which every nontrivial solution blows up.

    ``sign1 = l1/q + l2`` and ``sign2 = l1 + l2/p`` are reported raw so the
    equivalence ``sign1 >= 0  <=>  N <= bound1`` can be cross-checked.
    ``bound2`` follows the published resolved form; it pairs ``rho1`` with
    ``p`` where the algebra from ``sign2`` gives ``q``, so its equivalence
    with ``sign2`` only holds when ``rho1 = 0`` or ``p = q``.
    """
    a, b = inp.alpha, inp.beta
    p, q = inp.p, inp.q
    s1, s2, r1, r2 = inp.sigma1, inp.sigma2, inp.rho1, inp.rho2
    denom = a * b * (p * q - 1.0)
    if denom == 0.0:
        raise ValueError("degenerate exponents: pq = 1")
    bound1 = (2.0 * (a * (1.0 + s1) + p * b * (1.0 + s2)) + a * b * (r1 + p * r2)) / denom
    bound2 = (2.0 * (b * (1.0 + s2) + q * a * (1.0 + s1)) + a * b * (p * r1 + r2)) / denom
    l1, l2 = l_exponents(inp)
    return SystemBounds(bound1, bound2, inp.N <= max(bound1, bound2), l1 / q + l2, l1 + l2 / p)


# ---------------------------------------------------------------------------
# sweep harness


@dataclass(frozen=True)
class SweepConfig:
    p_values: tuple[float, ...]
    amplitudes: tuple[float, ...]
    grid: GridSpec
    alpha: float = 1.0
    sigma: float = 0.0
    rho: float = 0.0
    coefficient: float = 1.0
    horizon: float = 1.0
    steps: int = 256
    width: float = 1.0
    blowup_threshold: float = 1.0e6
    # when set, the threshold of each cell is this multiple of its amplitude
    blowup_factor: float | None = None
    picard_tol: float = 1.0e-10
    picard_max_iters: int = 60
    seed: int = 0
    # relative amplitude of nonnegative uniform noise added to the data
    noise: float = 0.0
    budget_s: float = 900.0
    refine_width: float = 0.1
    timing: bool = False

    def __post_init__(self) -> None:
        ps = tuple(float(p) for p in self.p_values)
        object.__setattr__(self, "p_values", ps)
        object.__setattr__(self, "amplitudes", tuple(sorted(float(a) for a in self.amplitudes)))
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p grid must be strictly increasing")
        if any(p <= 1.0 for p in ps):
            raise ValueError("every p must exceed 1")
        if any(not a > 0.0 for a in self.amplitudes):
            raise ValueError("amplitudes must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if not self.noise >= 0.0:
            raise ValueError("noise must be nonnegative")
        if self.blowup_factor is not None and not self.blowup_factor > 1.0:
            raise ValueError("blowup_factor must exceed 1")
        if not self.refine_width > 0.0:
            raise ValueError("refine_width must be positive")
        L = self.grid.half_width
        if self.width > L / 8.0:
            raise ValueError(f"width {self.width} exceeds L/8 = {L / 8.0}")
        spread = math.sqrt(2.0 * self.horizon**self.alpha)
        if spread > L / 4.0:
            raise ValueError(f"diffusion length {spread:.4g} exceeds L/4 = {L / 4.0:.4g}; enlarge the box or shorten the horizon")

    @property
    def exponent_inputs(self) -> ExponentInputs:
        return ExponentInputs(self.grid.ndim, self.alpha, self.sigma, self.rho)

    def projected_seconds(self, cells: int) -> float:
        half = self.grid.size // self.grid.points * (self.grid.points // 2 + 1)
        per_run = self.steps**2 * half * _COST_PER_OP
        return cells * per_run


@dataclass(frozen=True)
class SweepRecord:
    p: float
    amplitude: float
    alpha: float
    sigma: float
    rho: float
    N: int
    status: str
    t_star: float | None
    max_sup_norm: float
    picard_iters: int
    runtime_s: float | None = None

    def row(self) -> list[str]:
        return [
            _fmt(self.p),
            _fmt(self.amplitude),
            _fmt(self.alpha),
            _fmt(self.sigma),
            _fmt(self.rho),
            str(self.N),
            self.status,
            "" if self.t_star is None else _fmt(self.t_star),
            _fmt(self.max_sup_norm),
            str(self.picard_iters),
            "" if self.runtime_s is None else _fmt(self.runtime_s),
        ]


@dataclass(frozen=True)
class Boundary:
    p_c_theory: float
    p_c_empirical: float
    half_width: float
    p_low: float = field(default=math.nan, compare=False)
    p_high: float = field(default=math.nan, compare=False)

    def to_json(self) -> str:
        payload = {
            "p_c_theory": float(_fmt(self.p_c_theory)),
            "p_c_empirical": float(_fmt(self.p_c_empirical)),
            "half_width": float(_fmt(self.half_width)),
        }
        return json.dumps(payload, indent=2) + "\n"


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def classify(status: Status, sup0: float, sup_end: float) -> str:
    """Map a solver outcome to the sweep's three-way classification."""
    if status is Status.BLOWUP:
        return Status.BLOWUP.value
    if status is Status.GLOBAL and sup_end < sup0:
        return Status.GLOBAL.value
    return Status.INCONCLUSIVE.value


def _initial(cfg: SweepConfig, p: float, amplitude: float) -> ScalarField:
    u0 = gaussian_initial(cfg.grid, amplitude, cfg.width, [0.0] * cfg.grid.ndim)
    if cfg.noise == 0.0:
        return u0
    # one stream per cell, independent of execution order
    seq = np.random.SeedSequence([cfg.seed, int(round(p * 1e6)), int(round(amplitude * 1e6))])
    rng = np.random.default_rng(seq)
    return ScalarField(cfg.grid, u0.values + cfg.noise * amplitude * rng.random(cfg.grid.shape))


def _threshold(cfg: SweepConfig, amplitude: float) -> float:
    if cfg.blowup_factor is not None:
        return cfg.blowup_factor * amplitude
    return cfg.blowup_threshold


def _run_cell(cfg: SweepConfig, p: float, amplitude: float) -> SweepRecord:
    start = time.perf_counter()
    u0 = _initial(cfg, p, amplitude)
    spec = SourceSpec(cfg.coefficient, cfg.sigma, cfg.rho, p)
    horizon = cfg.horizon
    iters = 0
    # A step that cannot contract before the threshold is reached means the
    # reaction time is shorter than dt.  The run is repeated on a shorter
    # horizon ending past the failure point, which refines dt by the same
    # factor; the horizon has to shrink every time.
    for _ in range(MAX_REFINEMENTS + 1):
        solve = SolveConfig(
            TimeGrid(horizon, cfg.steps),
            picard_tol=cfg.picard_tol,
            picard_max_iters=cfg.picard_max_iters,
            blowup_threshold=_threshold(cfg, amplitude),
            nonneg_clamp=True,
            keep_trajectory=False,
        )
        out = evolve_semilinear(u0, spec, cfg.alpha, solve)
        iters += out.picard_iters
        if out.failure_time is None:
            break
        shorter = REFINE_REACH * out.failure_time
        if not shorter < horizon:
            break
        log.debug("cell p=%.4g a=%.4g: step too coarse at t=%.4g, retrying on [0, %.4g]", p, amplitude, out.failure_time, shorter)
        horizon = shorter
    sup0 = out.sup_norm_history[0][1]
    sup_end = out.sup_norm_history[-1][1]
    status = classify(out.status, sup0, sup_end)
    if status == Status.GLOBAL.value and horizon < cfg.horizon:
        status = Status.INCONCLUSIVE.value
    elapsed = time.perf_counter() - start
    log.info("cell p=%.4g a=%.4g -> %s (t_star=%s, %.2fs)", p, amplitude, status, out.t_star, elapsed)
    return SweepRecord(
        p=p,
        amplitude=amplitude,
        alpha=cfg.alpha,
        sigma=cfg.sigma,
        rho=cfg.rho,
        N=cfg.grid.ndim,
        status=status,
        t_star=out.t_star,
        max_sup_norm=out.max_sup_norm,
        picard_iters=iters,
        runtime_s=elapsed if cfg.timing else None,
    )


def _run_cells(cfg: SweepConfig, cells: list[tuple[float, float]], jobs: int) -> list[SweepRecord]:
    if jobs <= 1 or len(cells) <= 1:
        return [_run_cell(cfg, p, a) for p, a in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_cell, cfg, p, a) for p, a in cells]
        return [f.result() for f in futures]


def run_sweep(cfg: SweepConfig, jobs: int | None = None) -> tuple[list[SweepRecord], Boundary | None]:
    """Run every ``(p, amplitude)`` cell and estimate the smallest-amplitude boundary.

    The boundary brackets the largest ``p`` that still blew up and the next
    ``p`` that stayed ``Global``.  Each edge of that bracket is then bisected
    until it is within ``refine_width`` of its neighbour; inconclusive cells
    inside the bracket are kept out of both edges and simply widen the
    reported half-width.
    """
    if jobs is None:
        jobs = os.cpu_count() or 1
    cells = [(p, a) for p in cfg.p_values for a in cfg.amplitudes]
    if not cells:
        return [], None
    refinements = 2 * max(0, math.ceil(math.log2(max(_max_gap(cfg.p_values) / cfg.refine_width, 1.0))))
    projected = cfg.projected_seconds(len(cells) + refinements)
    if projected > cfg.budget_s:
        raise BudgetError(f"projected runtime {projected:.0f}s exceeds budget {cfg.budget_s:.0f}s")
    records = _run_cells(cfg, cells, jobs)

    smallest = cfg.amplitudes[0]
    base = {r.p: r.status for r in records if r.amplitude == smallest}
    for _ in range(MAX_BISECTIONS):
        bracket = _bracket(base)
        if bracket is None:
            return _sorted(records), None
        p_low, p_high, inside = bracket
        # the inconclusive band (if any) stays inside the bracket; each edge
        # of it is refined separately
        left = min(inside, default=p_high)
        right = max(inside, default=p_low)
        if left - p_low > cfg.refine_width:
            mid = 0.5 * (p_low + left)
        elif p_high - right > cfg.refine_width:
            mid = 0.5 * (right + p_high)
        else:
            break
        rec = _run_cell(cfg, mid, smallest)
        records.append(rec)
        base[mid] = rec.status
    bracket = _bracket(base)
    if bracket is None:
        return _sorted(records), None
    p_low, p_high, inside = bracket
    if inside:
        log.warning("inconclusive cells inside the bracket at p=%s", sorted(inside))
    theory = critical_exponent_scalar(cfg.exponent_inputs)
    boundary = Boundary(theory, 0.5 * (p_low + p_high), 0.5 * (p_high - p_low), p_low, p_high)
    return _sorted(records), boundary


def _bracket(base: dict[float, str]) -> tuple[float, float, list[float]] | None:
    """Largest blown-up ``p``, the next global ``p`` above it, and the inconclusive ones between."""
    blown = [p for p, s in base.items() if s == Status.BLOWUP.value]
    if not blown:
        return None
    p_low = max(blown)
    above = [p for p, s in base.items() if p > p_low and s == Status.GLOBAL.value]
    if not above:
        return None
    p_high = min(above)
    inside = [p for p, s in base.items() if p_low < p < p_high]
    return p_low, p_high, inside


def _max_gap(ps: tuple[float, ...]) -> float:
    return max((b - a for a, b in zip(ps, ps[1:])), default=0.0)


def _sorted(records: list[SweepRecord]) -> list[SweepRecord]:
    return sorted(records, key=lambda r: (r.p, r.amplitude))


def monotonicity_violations(records: list[SweepRecord]) -> list[tuple[float, float, float]]:
    """Cells ``(p, a1, a2)`` with ``a1 < a2`` where ``a1`` blew up but ``a2`` did not.

    Such pairs contradict the comparison-principle heuristic; they are flagged,
    never treated as errors.
    """
    by_p: dict[float, list[SweepRecord]] = {}
    for r in records:
        by_p.setdefault(r.p, []).append(r)
    out = []
    for p, rows in sorted(by_p.items()):
        rows = sorted(rows, key=lambda r: r.amplitude)
        for i, lo in enumerate(rows):
            if lo.status != Status.BLOWUP.value:
                continue
            for hi in rows[i + 1 :]:
                if hi.status == Status.GLOBAL.value:
                    out.append((p, lo.amplitude, hi.amplitude))
    for v in out:
        log.warning("monotonicity violation at p=%g: a=%g blew up, a=%g stayed global", *v)
    return out


def records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def write_sweep_outputs(records: list[SweepRecord], boundary: Boundary | None, csv_path, json_path=None) -> None:
    atomic_write_bytes(csv_path, records_to_csv(records).encode("ascii"))
    if json_path is not None and boundary is not None:
        atomic_write_bytes(json_path, boundary.to_json().encode("ascii"))
