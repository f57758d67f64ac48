from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fracstokes.fractional_oracle import (
    InstabilityError,
    TimeGrid,
    fractional_integral,
    rl_derivative_discrete,
    rl_weights,
    solve_scalar_mode,
)
from fracstokes.special_functions import mittag_leffler_neg


def _ml_on(grid: TimeGrid, lam: float, alpha: float) -> np.ndarray:
    return mittag_leffler_neg(alpha, lam * grid.nodes**alpha)


def test_time_grid():
    g = TimeGrid(2.0, 8)
    assert g.dt == 0.25
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.0
    assert np.allclose(np.diff(g.nodes), 0.25)
    for bad in ((0.0, 4), (1.0, 0), (1.0, 2.5), (math.inf, 3)):
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_weights_reject_alpha():
    with pytest.raises(ValueError):
        rl_weights(0.0, 4)
    with pytest.raises(ValueError):
        rl_weights(1.5, 4)


@pytest.mark.parametrize("alpha, mu", [(0.5, 1.0), (0.3, 2.0), (0.8, 1.0)])
def test_integral_of_monomials(alpha, mu):
    # I^a t^mu = Gamma(mu+1)/Gamma(mu+a+1) t^{mu+a}
    grid = TimeGrid(1.0, 400)
    t = grid.nodes
    got = fractional_integral(t**mu, alpha, grid)
    exact = math.gamma(mu + 1) / math.gamma(mu + alpha + 1) * t ** (mu + alpha)
    assert np.max(np.abs(got - exact)) < 1e-4


def test_zero_samples_give_zero():
    grid = TimeGrid(1.0, 32)
    f = np.zeros(33)
    assert all(rl_derivative_discrete(f, 0.4, j, grid) == 0.0 for j in range(1, 33))


def test_alpha_one_is_identity():
    grid = TimeGrid(1.0, 64)
    f = np.sin(3.0 * grid.nodes) + 2.0
    for j in (1, 17, 64):
        assert rl_derivative_discrete(f, 1.0, j, grid) == pytest.approx(f[j], abs=1e-8)


def test_rl_derivative_of_t_refines():
    target = math.gamma(2.0) / math.gamma(1.5)
    assert target == pytest.approx(1.1283792, abs=1e-7)
    errs = []
    for steps in (256, 1024, 4096):
        grid = TimeGrid(1.0, steps)
        errs.append(abs(rl_derivative_discrete(grid.nodes, 0.5, steps, grid) - target))
    assert errs[-1] < 1e-4
    orders = [math.log(a / b, 4.0) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 0.9


def test_index_errors():
    grid = TimeGrid(1.0, 4)
    f = np.ones(5)
    with pytest.raises(IndexError):
        rl_derivative_discrete(f, 0.5, 0, grid)
    with pytest.raises(IndexError):
        rl_derivative_discrete(f, 0.5, 5, grid)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.integers(1, 40),
    st.floats(-3.0, 3.0),
    st.integers(0, 2**31 - 1),
)
def test_linearity(alpha, j, c, seed):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(1.0, 40)
    f, g = rng.normal(size=(2, 41))
    lhs = rl_derivative_discrete(f + c * g, alpha, j, grid)
    rhs = rl_derivative_discrete(f, alpha, j, grid) + c * rl_derivative_discrete(g, alpha, j, grid)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1.0 + abs(lhs)))


def test_zero_lambda_is_constant():
    y = solve_scalar_mode(0.0, 0.4, TimeGrid(3.0, 50))
    assert np.all(y == 1.0)


def test_classical_ode():
    y = solve_scalar_mode(1.0, 1.0, TimeGrid(1.0, 1000))
    assert y[-1] == pytest.approx(math.exp(-1.0), abs=1e-3)


def test_half_order_example():
    grid = TimeGrid(1.0, 2048)
    y = solve_scalar_mode(1.0, 0.5, grid)
    assert y[-1] == pytest.approx(0.4275836, abs=1e-4)


def test_rejects_bad_lambda():
    with pytest.raises(ValueError):
        solve_scalar_mode(-1.0, 0.5, TimeGrid(1.0, 4))
    with pytest.raises(ValueError):
        solve_scalar_mode(math.nan, 0.5, TimeGrid(1.0, 4))


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.01, 100.0),
    st.one_of(st.floats(0.3, 0.99), st.just(1.0)),
    st.floats(0.1, 3.0),
)
def test_bounded_in_unit_interval(lam, alpha, t_end):
    # a converged grid resolves the initial layer: lam * dt**alpha <= 1
    steps = max(16, math.ceil(t_end * lam ** (1.0 / alpha)))
    assume(steps <= 3000)
    grid = TimeGrid(t_end, steps)
    y = solve_scalar_mode(lam, alpha, grid)
    visible = _ml_on(grid, lam, alpha) > 1e-10
    assert np.all(y[visible] > 0.0) and np.all(y <= 1.0)
    assert np.all(y > -1e-13)


def test_unresolved_grid_can_undershoot():
    # documents why the bound above needs resolution
    y = solve_scalar_mode(100.0, 0.3, TimeGrid(1.0, 1024))
    assert y[1] < 0.0 and np.all(np.abs(y) <= 1.0)


def _errors(lam, alpha, steps, t_min=0.0):
    grid = TimeGrid(1.0, steps)
    diff = np.abs(solve_scalar_mode(lam, alpha, grid) - _ml_on(grid, lam, alpha))
    return float(np.max(diff[grid.nodes >= t_min]))


@pytest.mark.parametrize("lam, alpha", [(1.0, 0.3), (10.0, 0.5), (100.0, 0.7)])
def test_errors_shrink_under_refinement(lam, alpha):
    errs = [_errors(lam, alpha, s) for s in (256, 1024, 4096)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("lam, alpha", [(1.0, 0.5), (10.0, 0.3), (100.0, 0.7)])
def test_order_away_from_origin(lam, alpha):
    e1, e2 = _errors(lam, alpha, 1024, 0.1), _errors(lam, alpha, 4096, 0.1)
    assert math.log(e1 / e2, 4.0) >= 0.9


@pytest.mark.xfail(strict=True, reason="t**alpha startup layer caps the uniform order")
def test_uniform_order_including_origin():
    e1, e2 = _errors(100.0, 0.3, 1024), _errors(100.0, 0.3, 4096)
    assert math.log(e1 / e2, 4.0) >= 0.9
