from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from fracstokes.fujita import (
    CSV_HEADER,
    Boundary,
    BudgetError,
    ExponentInputs,
    SweepConfig,
    SweepRecord,
    SystemExponentInputs,
    classify,
    critical_exponent_scalar,
    l_exponents,
    lambda_exponent,
    monotonicity_violations,
    records_to_csv,
    run_sweep,
    system_dimension_bounds,
    write_sweep_outputs,
)
from fracstokes.semilinear_solver import Status
from fracstokes.spectral_grid import GridSpec


def _random_inputs(rng, n):
    for _ in range(n):
        yield ExponentInputs(
            int(rng.integers(1, 4)),
            float(rng.uniform(0.05, 1.0)),
            float(rng.uniform(-0.95, 3.0)),
            float(rng.uniform(0.0, 3.0)),
        )


def _random_system(rng, rho1_zero=False, p_eq_q=False):
    p = float(rng.uniform(1.05, 6.0))
    q = p if p_eq_q else float(rng.uniform(1.05, 6.0))
    return SystemExponentInputs(
        N=int(rng.integers(1, 6)),
        alpha=float(rng.uniform(0.05, 1.0)),
        beta=float(rng.uniform(0.05, 1.0)),
        p=p,
        q=q,
        sigma1=float(rng.uniform(-0.9, 2.0)),
        sigma2=float(rng.uniform(-0.9, 2.0)),
        rho1=0.0 if rho1_zero else float(rng.uniform(0.0, 2.0)),
        rho2=float(rng.uniform(0.0, 2.0)),
    )


@pytest.mark.parametrize(
    "inp, expected",
    [
        (ExponentInputs(1, 1.0), 3.0),
        (ExponentInputs(2, 0.5), 3.0),
        (ExponentInputs(1, 0.5, 1.0, 1.0), 10.0),
        (ExponentInputs(1, 0.5), 5.0),
    ],
)
def test_critical_exponent_examples(inp, expected):
    assert critical_exponent_scalar(inp) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("args", [(0, 1.0), (1, 0.0), (1, 1.2), (1, 0.5, -1.0), (1, 0.5, 0.0, -0.1), (1.5, 0.5)])
def test_exponent_inputs_validation(args):
    with pytest.raises(ValueError):
        ExponentInputs(*args)


def test_lambda_examples():
    inp = ExponentInputs(1, 1.0)
    assert lambda_exponent(3.0, inp) == pytest.approx(0.0, abs=1e-15)
    assert lambda_exponent(2.0, inp) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(ValueError):
        lambda_exponent(1.0, inp)


def test_lambda_vanishes_at_critical_exponent():
    rng = np.random.default_rng(11)
    for inp in _random_inputs(rng, 50):
        pc = critical_exponent_scalar(inp)
        assert abs(lambda_exponent(pc, inp)) <= 1e-12
        # and the sign flips across p_c
        assert lambda_exponent(0.5 * (1.0 + pc), inp) < 0.0 < lambda_exponent(pc + 1.0, inp)


def test_critical_exponent_monotone():
    for alpha in (0.3, 0.7, 1.0):
        for sigma in (-0.5, 0.0, 1.0):
            for rho in (0.0, 0.5, 2.0):
                vals = [critical_exponent_scalar(ExponentInputs(n, alpha, sigma, rho)) for n in (1, 2, 3, 4)]
                assert all(a > b for a, b in zip(vals, vals[1:]))
                base = critical_exponent_scalar(ExponentInputs(2, alpha, sigma, rho))
                assert critical_exponent_scalar(ExponentInputs(2, alpha, sigma + 0.1, rho)) > base
                assert critical_exponent_scalar(ExponentInputs(2, alpha, sigma, rho + 0.1)) > base


def test_l_exponent_examples():
    l1, l2 = l_exponents(SystemExponentInputs(1, 1.0, 1.0, 2.0, 2.0))
    assert (l1, l2) == pytest.approx((0.5, 0.5), abs=1e-15)
    l1, l2 = l_exponents(SystemExponentInputs(2, 1.0, 1.0, 2.0, 2.0))
    assert (l1, l2) == pytest.approx((0.0, 0.0), abs=1e-15)
    sym = SystemExponentInputs(3, 0.4, 0.4, 2.5, 2.5, 0.3, 0.3, 1.1, 1.1)
    l1, l2 = l_exponents(sym)
    assert l1 == l2
    assert sym.p_conj == pytest.approx(2.5 / 1.5)


def test_system_inputs_validation():
    with pytest.raises(ValueError):
        SystemExponentInputs(1, 1.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        SystemExponentInputs(1, 1.0, 0.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        SystemExponentInputs(1, 1.0, 1.0, 2.0, 2.0, rho2=-1.0)


def test_classical_system_bounds():
    b = system_dimension_bounds(SystemExponentInputs(1, 1.0, 1.0, 2.0, 2.0))
    assert (b.bound1, b.bound2) == pytest.approx((2.0, 2.0), rel=1e-15)
    assert b.blowup_predicted
    assert not system_dimension_bounds(SystemExponentInputs(3, 1.0, 1.0, 2.0, 2.0)).blowup_predicted


def test_symmetric_bounds_agree():
    rng = np.random.default_rng(5)
    for _ in range(20):
        s = _random_system(rng, p_eq_q=True)
        s = SystemExponentInputs(s.N, s.alpha, s.alpha, s.p, s.p, s.sigma1, s.sigma1, s.rho1, s.rho1)
        b = system_dimension_bounds(s)
        assert b.bound1 == pytest.approx(b.bound2, rel=1e-13)


def test_first_bound_matches_sign():
    rng = np.random.default_rng(7)
    for _ in range(100):
        s = _random_system(rng)
        b = system_dimension_bounds(s)
        if abs(s.N - b.bound1) < 1e-9:
            continue
        assert (b.sign1 >= 0.0) == (s.N <= b.bound1)


@pytest.mark.parametrize("kind", ["rho1_zero", "p_eq_q"])
def test_second_bound_matches_sign_where_forms_agree(kind):
    rng = np.random.default_rng(8)
    for _ in range(100):
        s = _random_system(rng, **{kind: True})
        b = system_dimension_bounds(s)
        if abs(s.N - b.bound2) < 1e-9:
            continue
        assert (b.sign2 >= 0.0) == (s.N <= b.bound2)


def test_second_bound_differs_in_general():
    # the printed bound pairs rho1 with p; the l-sign pairs it with q
    s = SystemExponentInputs(2, 1.0, 1.0, 1.5, 4.0, rho1=2.0)
    b = system_dimension_bounds(s)
    resolved = (2.0 * (1.0 + 4.0) + (4.0 * 2.0)) / (1.5 * 4.0 - 1.0)
    assert b.bound2 != pytest.approx(resolved)


def test_classify():
    assert classify(Status.BLOWUP, 1.0, 9.0) == "BlowUp"
    assert classify(Status.GLOBAL, 1.0, 0.5) == "Global"
    assert classify(Status.GLOBAL, 1.0, 1.5) == "Inconclusive"
    assert classify(Status.INCONCLUSIVE, 1.0, 0.5) == "Inconclusive"


def _small_cfg(**kw):
    base = dict(
        p_values=(2.0, 4.0),
        amplitudes=(0.5,),
        grid=GridSpec(1, 64, 160.0),
        horizon=200.0,
        steps=128,
        width=4.0,
        blowup_factor=4.0,
        refine_width=1.0,
        seed=3,
    )
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        _small_cfg(p_values=(3.0, 2.0))
    with pytest.raises(ValueError):
        _small_cfg(p_values=(1.0, 2.0))
    with pytest.raises(ValueError):
        _small_cfg(amplitudes=(0.0,))
    with pytest.raises(ValueError):
        _small_cfg(width=30.0)
    with pytest.raises(ValueError):
        _small_cfg(horizon=1e4)
    assert _small_cfg(amplitudes=(5.0, 0.5)).amplitudes == (0.5, 5.0)


def test_empty_sweep():
    records, boundary = run_sweep(_small_cfg(p_values=()))
    assert records == [] and boundary is None


def test_budget_error():
    with pytest.raises(BudgetError):
        run_sweep(_small_cfg(steps=4096, budget_s=0.01))


def test_small_sweep_is_deterministic():
    cfg = _small_cfg(noise=0.01, amplitudes=(0.5, 5.0))
    first, b1 = run_sweep(cfg, jobs=1)
    second, b2 = run_sweep(cfg, jobs=2)
    assert records_to_csv(first) == records_to_csv(second)
    assert b1 == b2
    assert [(r.p, r.amplitude) for r in first] == sorted((r.p, r.amplitude) for r in first)
    assert {r.status for r in first} <= {"BlowUp", "Global", "Inconclusive"}


def test_csv_and_json(tmp_path):
    rec = SweepRecord(2.5, 0.05, 1.0, 0.0, 0.0, 1, "BlowUp", 12.25, 0.2000000001, 431)
    text = records_to_csv([rec])
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[0] == "p,amplitude,alpha,sigma,rho,N,status,t_star,max_sup_norm,picard_iters,runtime_s".split(",")
    assert rows[1] == ["2.5", "0.05", "1", "0", "0", "1", "BlowUp", "12.25", "0.2000000001", "431", ""]
    b = Boundary(3.0, 3.28125, 0.03125, 3.25, 3.3125)
    write_sweep_outputs([rec], b, tmp_path / "s.csv", tmp_path / "b.json")
    assert (tmp_path / "s.csv").read_text() == text
    assert json.loads((tmp_path / "b.json").read_text()) == {"p_c_theory": 3.0, "p_c_empirical": 3.28125, "half_width": 0.03125}


def test_monotonicity_flags():
    def rec(p, a, status):
        return SweepRecord(p, a, 1.0, 0.0, 0.0, 1, status, None, 1.0, 1)

    ok = [rec(2.0, 0.1, "BlowUp"), rec(2.0, 1.0, "BlowUp"), rec(4.0, 0.1, "Global"), rec(4.0, 1.0, "BlowUp")]
    assert monotonicity_violations(ok) == []
    bad = ok + [rec(2.0, 5.0, "Global")]
    assert monotonicity_violations(bad) == [(2.0, 0.1, 5.0), (2.0, 1.0, 5.0)]
