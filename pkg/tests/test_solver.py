"""Backward sweeps against exhaustive enumeration, chains, surfaces."""

import math
import types

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dualgap import (
    ChainSpec,
    Discretization,
    NumericalFailure,
    ResourceLimit,
    SpaceGrid,
    TimeGrid,
    ValueSurface,
    conjugate_spec,
    cuoco_liu_model,
    gauss_hermite_rule,
    lipschitz_truncate,
    merton_model,
    power_utility,
    solve,
)
from dualgap.solver import (
    MAX_BRANCHES,
    enumerate_chain,
    enumerate_coupled,
    step_factors,
    write_surface_csv,
)


@pytest.fixture(scope="module")
def rule2():
    return gauss_hermite_rule(2)


@pytest.fixture(scope="module")
def merton():
    return merton_model()


def test_step_factors_primal(merton, rule2):
    got = step_factors(merton, 0.0, 0.5, rule2, 0.1, "primal")
    noise = math.sqrt(0.1) * 0.5
    assert np.allclose(got, [1.1 - noise, 1.1 + noise], atol=1.0e-14)


def test_step_factors_dual(merton, rule2):
    # drift 1 - h r, noise (r - b) / sigma per unit node
    got = step_factors(merton, 0.0, 0.0, rule2, 0.1, "dual")
    noise = math.sqrt(0.1) * 0.4
    assert np.allclose(got, [0.92 + noise, 0.92 - noise], atol=1.0e-14)


def test_step_factors_rejects_unknown_direction(merton, rule2):
    with pytest.raises(ValueError):
        step_factors(merton, 0.0, 0.0, rule2, 0.1, "sideways")


def test_sweep_is_exact_on_linear_data():
    """With a riskless degenerate control the sweep is a known scalar map.

    Every step multiplies wealth by 1 + h r, and linear interpolation
    reproduces linear data exactly.  The constant closure past the right
    edge perturbs the last cell, and each sweep carries that influence
    one interpolation stencil inward, so exactness is asserted on the
    nodes whose reads stay inside the still-clean range.
    """
    model = merton_model(r=0.4, b=0.7, sigma=1.0, horizon=0.5, a_interval=(0.0, 0.0))
    terminal = types.SimpleNamespace(
        evaluate=lambda x: 0.25 * np.asarray(x, dtype=float)
    )
    disc = Discretization(
        steps=4,
        cells=10,
        dual_cells=10,
        order=4,
        primal_controls=3,
        dual_controls=1,
        x_max=2.0,
        y_max=2.0,
    )
    surface = solve(model, terminal, disc, "primal")
    factor = 1.0 + 0.125 * 0.4
    xs = np.asarray(surface.grid.nodes)
    clean = disc.cells
    for _ in range(disc.steps):
        clean = max(m for m in range(clean + 1) if math.ceil(m * factor) <= clean)
    assert clean == 6
    want = 0.25 * xs * factor**4
    assert np.max(np.abs(surface.data[0][: clean + 1] - want[: clean + 1])) < 1.0e-12
    # one step before maturity, one factor only
    keep1 = xs * factor <= 2.0
    assert np.max(np.abs(surface.data[3][keep1] - 0.25 * xs[keep1] * factor)) < 1.0e-12
    assert np.all(surface.controls == 0.0)


def test_origin_is_absorbing(merton):
    reward = lipschitz_truncate(power_utility(0.5), 1.6, 0.768)
    disc = Discretization(
        steps=3,
        cells=8,
        dual_cells=8,
        order=3,
        primal_controls=3,
        dual_controls=1,
        x_max=2.0,
        y_max=2.0,
    )
    surface = solve(merton, reward, disc, "primal")
    assert np.all(surface.data[:, 0] == reward.evaluate(0.0))


def test_solve_validation(merton):
    reward = lipschitz_truncate(power_utility(0.5), 1.6, 0.768)
    disc = Discretization(
        steps=2,
        cells=4,
        dual_cells=4,
        order=2,
        primal_controls=3,
        dual_controls=1,
        x_max=2.0,
        y_max=2.0,
    )
    with pytest.raises(ValueError):
        solve(merton, reward, disc, "sideways")
    bad = types.SimpleNamespace(
        evaluate=lambda x: np.full(np.shape(x), np.nan)
    )
    with pytest.raises(ValueError):
        solve(merton, bad, disc, "primal")


def test_solved_surface_is_frozen(merton):
    reward = lipschitz_truncate(power_utility(0.5), 1.6, 0.768)
    disc = Discretization(
        steps=2,
        cells=4,
        dual_cells=4,
        order=2,
        primal_controls=3,
        dual_controls=1,
        x_max=2.0,
        y_max=2.0,
    )
    surface = solve(merton, reward, disc, "primal")
    with pytest.raises(ValueError):
        surface.data[0, 0] = 1.0
    with pytest.raises(ValueError):
        surface.controls[0, 0] = 1.0


def _surface(data, direction):
    rows = np.asarray(data, dtype=float)
    return ValueSurface(
        grid=SpaceGrid(1.0, rows.shape[1] - 1),
        time=TimeGrid(1.0, rows.shape[0] - 1),
        data=rows,
        direction=direction,
        plateau=float(rows[-1, -1]),
    )


def test_validate_rejects_nonfinite():
    with pytest.raises(NumericalFailure):
        _surface([[0.0, np.nan, 2.0], [0.0, 1.0, 2.0]], "primal").validate()


def test_validate_rejects_decreasing_primal_row():
    with pytest.raises(NumericalFailure):
        _surface([[0.0, 2.0, 1.0], [0.0, 1.0, 2.0]], "primal").validate()


def test_validate_rejects_terminal_range_escape():
    with pytest.raises(NumericalFailure):
        _surface([[0.0, 1.0, 5.0], [0.0, 1.0, 2.0]], "primal").validate()


def test_validate_accepts_decreasing_dual_row():
    _surface([[3.0, 2.0, 1.0], [3.0, 2.0, 0.0]], "dual").validate()


def test_validate_tolerates_interpolation_slack():
    _surface([[0.0, 1.0, 1.0 - 5.0e-9], [0.0, 1.0, 2.0]], "primal").validate()


def test_enumerate_chain_shapes(merton):
    rule = gauss_hermite_rule(3)
    spec = ChainSpec(
        model=merton,
        rule=rule,
        start_time=0.0,
        start_state=1.5,
        step=0.125,
        policy=(0.5, -0.25),
    )
    states, probs = enumerate_chain(spec, 2)
    assert states.shape == (9,)
    assert abs(float(probs.sum()) - 1.0) < 1.0e-12
    # depth-first order: children of branch i sit at positions 3 i + j
    f1 = step_factors(merton, 0.0, 0.5, rule, 0.125, "primal")
    f2 = step_factors(merton, 0.125, -0.25, rule, 0.125, "primal")
    want = np.repeat(1.5 * f1, 3) * np.tile(f2, 3)
    assert np.allclose(states, want, atol=1.0e-13)


def test_enumerate_chain_zero_steps(merton, rule2):
    spec = ChainSpec(
        model=merton, rule=rule2, start_time=0.0, start_state=2.0, step=0.1, policy=()
    )
    states, probs = enumerate_chain(spec, 0)
    assert np.array_equal(states, [2.0])
    assert np.array_equal(probs, [1.0])


def test_enumerate_chain_policy_too_short(merton, rule2):
    spec = ChainSpec(
        model=merton, rule=rule2, start_time=0.0, start_state=1.0, step=0.1, policy=(0.0,)
    )
    with pytest.raises(ValueError):
        enumerate_chain(spec, 2)
    with pytest.raises(ValueError):
        enumerate_chain(spec, -1)


def test_enumeration_cap(merton):
    rule = gauss_hermite_rule(4)
    spec = ChainSpec(
        model=merton,
        rule=rule,
        start_time=0.0,
        start_state=1.0,
        step=0.01,
        policy=(0.0,) * 13,
    )
    assert 4**13 > MAX_BRANCHES
    with pytest.raises(ResourceLimit):
        enumerate_chain(spec, 13)


def test_enumerate_coupled_consistency(merton):
    rule = gauss_hermite_rule(3)
    primal = ChainSpec(
        model=merton, rule=rule, start_time=0.0, start_state=1.0, step=0.125,
        policy=(0.8, 0.8),
    )
    dual = ChainSpec(
        model=merton, rule=rule, start_time=0.0, start_state=1.0, step=0.125,
        policy=(0.0, 0.0), direction="dual",
    )
    xs, ys, probs = enumerate_coupled(primal, dual, 2)
    assert xs.shape == ys.shape == probs.shape == (9,)
    states, single_probs = enumerate_chain(primal, 2)
    assert np.allclose(np.sort(xs), np.sort(states), atol=1.0e-13)
    assert abs(float(np.sum(probs * xs)) - float(np.sum(single_probs * states))) < 1.0e-13


def test_enumerate_coupled_validation(merton, rule2):
    primal = ChainSpec(
        model=merton, rule=rule2, start_time=0.0, start_state=1.0, step=0.1,
        policy=(0.0,),
    )
    mismatched_rule = ChainSpec(
        model=merton, rule=gauss_hermite_rule(3), start_time=0.0, start_state=1.0,
        step=0.1, policy=(0.0,), direction="dual",
    )
    with pytest.raises(ValueError):
        enumerate_coupled(primal, mismatched_rule, 1)
    mismatched_step = ChainSpec(
        model=merton, rule=rule2, start_time=0.0, start_state=1.0, step=0.2,
        policy=(0.0,), direction="dual",
    )
    with pytest.raises(ValueError):
        enumerate_coupled(primal, mismatched_step, 1)
    short = ChainSpec(
        model=merton, rule=rule2, start_time=0.0, start_state=1.0, step=0.1,
        policy=(), direction="dual",
    )
    with pytest.raises(ValueError):
        enumerate_coupled(primal, short, 1)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(seed=st.integers(min_value=0, max_value=10**9))
def test_sweep_matches_exhaustive_enumeration(seed):
    """Random tiny problems, checked node by node against the naive sweep."""
    rng = np.random.default_rng(seed)
    model, terminal, disc, direction = oracles.random_setup(rng)
    surface = solve(model, terminal, disc, direction)
    nodes, want = oracles.naive_solve(
        model, terminal, disc, direction, gauss_hermite_rule(disc.order)
    )
    assert np.array_equal(np.asarray(surface.grid.nodes), nodes)
    assert float(np.max(np.abs(surface.data - want))) < 1.0e-9


def test_sweep_matches_enumeration_constrained_market():
    """One fixed constrained-market case, both directions."""
    model = cuoco_liu_model()
    reward = lipschitz_truncate(power_utility(0.5), 1.6, 0.768)
    disc = Discretization(
        steps=3,
        cells=9,
        dual_cells=9,
        order=3,
        primal_controls=3,
        dual_controls=3,
        x_max=2.0,
        y_max=2.0,
    )
    rule = gauss_hermite_rule(3)
    for direction, terminal in (("primal", reward), ("dual", conjugate_spec(reward))):
        surface = solve(model, terminal, disc, direction)
        _, want = oracles.naive_solve(model, terminal, disc, direction, rule)
        assert float(np.max(np.abs(surface.data - want))) < 1.0e-9


def test_surface_csv_schema(tmp_path, merton):
    reward = lipschitz_truncate(power_utility(0.5), 1.6, 0.768)
    disc = Discretization(
        steps=2,
        cells=4,
        dual_cells=4,
        order=2,
        primal_controls=3,
        dual_controls=1,
        x_max=2.0,
        y_max=2.0,
    )
    surface = solve(merton, reward, disc, "primal")
    path = tmp_path / "surface.csv"
    write_surface_csv(surface, path, header="unit test")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# unit test"
    assert lines[1] == "t,x,value"
    assert len(lines) == 2 + 3 * 5
    first = lines[2].split(",")
    assert first[0] == "0.000000000000000e+00"
    assert len(first) == 3
