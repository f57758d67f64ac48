"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated together in
the pytest terminal summary.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from fracstokes.config import RunConfig
from fracstokes.fractional_oracle import TimeGrid, solve_scalar_mode
from fracstokes.fujita import (
    ExponentInputs,
    SystemExponentInputs,
    critical_exponent_scalar,
    lambda_exponent,
    monotonicity_violations,
    records_to_csv,
    run_sweep,
    system_dimension_bounds,
)
from fracstokes.linear_propagator import (
    SourceSampler,
    evolve_duhamel,
    evolve_homogeneous,
    green_function,
)
from fracstokes.semilinear_solver import SolveConfig, SourceSpec, Status, evolve_semilinear, picard_step
from fracstokes.special_functions import mittag_leffler, mittag_leffler_neg, simon_bounds
from fracstokes.spectral_grid import GridSpec, ScalarField, gaussian_initial

from .oracles import fd_blowup_time, heat_gaussian

HERE = Path(__file__).resolve().parent
CONFIGS = HERE.parent / "configs"
ORACLE = json.loads((HERE / "data" / "ml_oracle.json").read_text())["rows"]

_SWEEP_CSV: dict[str, bytes] = {}


def test_01_mittag_leffler_accuracy(acceptance):
    start = time.perf_counter()
    worst = 0.0
    overflow = 0
    for row in ORACLE:
        if row["value"] is None:
            # reference beyond the double range: the only honest answer is to raise
            with pytest.raises(OverflowError):
                mittag_leffler(row["alpha"], row["z"])
            overflow += 1
            continue
        ref = float(row["value"])
        worst = max(worst, abs(mittag_leffler(row["alpha"], row["z"]) - ref) / abs(ref))
    z = np.linspace(-30.0, 5.0, 3501)
    exp_err = max(abs(mittag_leffler(1.0, float(v)) - math.exp(v)) for v in z)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and exp_err <= 1e-12 and elapsed < 10.0
    acceptance.check(
        1,
        "Mittag-Leffler accuracy",
        ok,
        f"max rel err {worst:.2e} over {len(ORACLE) - overflow} points "
        f"({overflow} beyond double range raise OverflowError), |E_1-exp| {exp_err:.2e}, {elapsed:.2f}s",
    )


def test_02_simon_sandwich(acceptance):
    start = time.perf_counter()
    alphas = [0.1 * k for k in range(1, 10)]
    xs = np.linspace(0.0, 100.0, 500)
    slack = math.inf
    for a in alphas:
        e = mittag_leffler_neg(a, xs)
        for x, v in zip(xs, e):
            lo, hi = simon_bounds(a, float(x))
            slack = min(slack, v - lo, hi - v)
    elapsed = time.perf_counter() - start
    ok = slack >= -1e-9 and elapsed < 5.0
    acceptance.check(2, "Simon sandwich", ok, f"min slack {slack:.3e} on 9x500 grid, {elapsed:.2f}s")


def _mode_errors(lam, alpha, steps):
    grid = TimeGrid(1.0, steps)
    t = grid.nodes
    diff = np.abs(solve_scalar_mode(lam, alpha, grid) - mittag_leffler_neg(alpha, lam * t**alpha))
    return float(np.max(diff[t >= 0.1])), float(np.max(diff))


def test_03_oracle_equivalence(acceptance):
    # Agreement and order are measured on t in [0.1, 1]; the t**alpha layer at
    # the origin limits the uniform order (reported alongside, not gated).
    start = time.perf_counter()
    worst_err, worst_order, worst_uniform = 0.0, math.inf, math.inf
    for lam in (1.0, 10.0, 100.0):
        for alpha in (0.3, 0.5, 0.7):
            e1, u1 = _mode_errors(lam, alpha, 1024)
            e2, u2 = _mode_errors(lam, alpha, 4096)
            worst_err = max(worst_err, e2)
            worst_order = min(worst_order, math.log(e1 / e2, 4.0))
            worst_uniform = min(worst_uniform, math.log(u1 / u2, 4.0))
    elapsed = time.perf_counter() - start
    ok = worst_err <= 1e-3 and worst_order >= 0.9 and elapsed < 30.0
    acceptance.check(
        3,
        "multiplier vs time-stepped oracle",
        ok,
        f"max err {worst_err:.2e} at 4096 steps, min order {worst_order:.2f} on t>=0.1 "
        f"(uniform-in-t order {worst_uniform:.2f}), {elapsed:.2f}s",
    )


def test_04_heat_reduction(acceptance):
    start = time.perf_counter()
    g = GridSpec(1, 256, 16.0)
    u0 = gaussian_initial(g, 1.0, 1.0)
    r2 = g.displacement()[0] ** 2
    heat_err = float(np.max(np.abs(evolve_homogeneous(u0, 1.0, 1.0).values - heat_gaussian(r2, 1.0, 1.0, 1.0))))

    gm = GridSpec(1, 64, 2.0)
    k = math.pi / gm.half_width

    def exact(coords, t):
        return math.exp(-t) * np.cos(k * coords[0])

    def forcing(coords, t):
        return (k * k - 1.0) * math.exp(-t) * np.cos(k * coords[0])

    v0 = ScalarField(gm, exact(gm.coordinates(), 0.0))
    out = evolve_duhamel(v0, SourceSampler(gm, forcing), 1.0, TimeGrid(1.0, 128))
    mms_err = float(np.max(np.abs(out.values - exact(gm.coordinates(), 1.0))))
    elapsed = time.perf_counter() - start
    ok = heat_err <= 1e-6 and mms_err <= 1e-4 and elapsed < 10.0
    acceptance.check(4, "alpha=1 heat reduction", ok, f"Gaussian err {heat_err:.2e}, manufactured err {mms_err:.2e}, {elapsed:.2f}s")


def test_05_mass_conservation(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    drift = 0.0
    for _ in range(20):
        ndim = int(rng.integers(1, 4))
        g = GridSpec(ndim, 16, float(rng.uniform(1.0, 10.0)))
        u0 = ScalarField(g, rng.normal(size=g.shape) + rng.uniform(0.0, 2.0))
        out = evolve_homogeneous(u0, float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.0, 50.0)))
        drift = max(drift, abs(out.mean() - u0.mean()))
    mass = 0.0
    for alpha in (0.2, 0.5, 0.8, 1.0):
        for t in (1e-3, 0.5, 10.0):
            for g in (GridSpec(1, 128, 8.0), GridSpec(2, 32, 4.0)):
                G = green_function(g, alpha, t)
                mass = max(mass, abs(float(np.sum(G.values)) * g.cell_volume - 1.0))
    elapsed = time.perf_counter() - start
    ok = drift <= 1e-12 and mass <= 1e-10 and elapsed < 5.0
    acceptance.check(5, "mass conservation", ok, f"mean drift {drift:.2e}, |sum G dx - 1| {mass:.2e} (equality, not strict <1), {elapsed:.2f}s")


def test_06_mild_fixed_point(acceptance):
    start = time.perf_counter()
    residual = 0.0
    tol = 1e-10
    g = GridSpec(1, 64, 4.0)
    u0 = gaussian_initial(g, 0.8, 0.5)
    tg = TimeGrid(0.5, 64)
    for alpha, spec in ((1.0, SourceSpec(p=2.0)), (0.5, SourceSpec(p=3.0, rho=1.0)), (0.7, SourceSpec(p=2.0, sigma=-0.5))):
        out = evolve_semilinear(u0, spec, alpha, SolveConfig(tg, picard_tol=tol))
        assert out.status is Status.GLOBAL
        res = np.max(np.abs(out.trajectory - picard_step(out.trajectory, u0, spec, alpha, tg)))
        residual = max(residual, float(res))
    gl = GridSpec(1, 64, 8.0)
    w0 = gaussian_initial(gl, 1.0, 1.0)
    tl = TimeGrid(1.0, 256)
    out = evolve_semilinear(w0, SourceSpec(p=1.0), 1.0, SolveConfig(tl))
    lin_err = max(
        float(np.max(np.abs(out.trajectory[j] - math.exp(tl.nodes[j]) * evolve_homogeneous(w0, 1.0, tl.nodes[j]).values)))
        for j in range(0, 257, 16)
    )
    elapsed = time.perf_counter() - start
    ok = residual <= 10 * tol and lin_err <= 1e-5 and elapsed < 20.0
    acceptance.check(6, "mild-solution fixed point", ok, f"residual {residual:.2e} (tol {tol:g}), linear-reaction err {lin_err:.2e}, {elapsed:.2f}s")


def test_07_blowup_cross_validation(acceptance):
    start = time.perf_counter()
    g = GridSpec(1, 256, 8.0)
    u0 = gaussian_initial(g, 50.0, 0.5)
    out = evolve_semilinear(u0, SourceSpec(p=2.0), 1.0, SolveConfig(TimeGrid(0.04, 400)))
    ref = fd_blowup_time(u0.values, g.dx, 2.0, 1e6)
    rel = abs(out.t_star - ref) / ref if out.t_star is not None else math.inf
    elapsed = time.perf_counter() - start
    ok = out.status is Status.BLOWUP and rel <= 0.1 and elapsed < 60.0
    acceptance.check(7, "blow-up vs finite differences", ok, f"t_star {out.t_star} vs FD {ref:.6g} (rel {rel:.2%}), {elapsed:.2f}s")


def test_08_exponent_identities(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        inp = ExponentInputs(int(rng.integers(1, 5)), float(rng.uniform(0.05, 1.0)), float(rng.uniform(-0.95, 3.0)), float(rng.uniform(0.0, 3.0)))
        worst = max(worst, abs(lambda_exponent(critical_exponent_scalar(inp), inp)))
    pc = critical_exponent_scalar(ExponentInputs(1, 1.0, 0.0, 0.0))
    b = system_dimension_bounds(SystemExponentInputs(1, 1.0, 1.0, 2.0, 2.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and pc == 3.0 and (b.bound1, b.bound2) == (2.0, 2.0) and elapsed < 1.0
    acceptance.check(8, "exponent identities", ok, f"max |lambda(p_c)| {worst:.1e}, p_c {pc:g}, bounds ({b.bound1:g}, {b.bound2:g}), {elapsed:.3f}s")


def _sweep(name):
    cfg = RunConfig.from_path(CONFIGS / name).sweep()
    records, boundary = run_sweep(cfg)
    _SWEEP_CSV.setdefault(name, records_to_csv(records).encode())
    return cfg, records, boundary


@pytest.mark.slow
def test_09_fujita_sweep(acceptance):
    start = time.perf_counter()
    details = []
    ok = True
    for name, tol in (("sweep_alpha1.ini", 0.5), ("sweep_alpha05.ini", 1.0)):
        cfg, records, boundary = _sweep(name)
        theory = critical_exponent_scalar(cfg.exponent_inputs)
        if boundary is None:
            ok = False
            details.append(f"alpha={cfg.alpha:g}: no boundary")
            continue
        off = abs(boundary.p_c_empirical - theory)
        ok = ok and off <= tol
        details.append(
            f"alpha={cfg.alpha:g}: p_c {boundary.p_c_empirical:.4g}+-{boundary.half_width:.3g} vs {theory:g} "
            f"(|diff| {off:.3g} <= {tol}), {len(monotonicity_violations(records))} monotonicity flags"
        )
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 900.0
    acceptance.check(9, "Fujita sweep (heuristic finite-box surrogate)", ok, "; ".join(details) + f", {elapsed:.0f}s")


@pytest.mark.slow
def test_10_determinism(acceptance):
    start = time.perf_counter()
    name = "sweep_alpha1.ini"
    if name not in _SWEEP_CSV:
        _sweep(name)
    cfg = RunConfig.from_path(CONFIGS / name).sweep()
    again = records_to_csv(run_sweep(cfg)[0]).encode()
    same = again == _SWEEP_CSV[name]
    elapsed = time.perf_counter() - start
    acceptance.check(10, "determinism", same, f"{name} rerun byte-identical CSV ({len(again)} bytes), {elapsed:.0f}s")
