"""Duality gaps, two-sided bounds, and the coupled product chain."""

import math

import numpy as np
import pytest

from dualgap import (
    BoundReport,
    GapReport,
    SpaceGrid,
    TimeGrid,
    ValueSurface,
    aposteriori_bounds,
    duality_gap,
    gauss_hermite_rule,
    merton_model,
    polar_defect,
    write_gap_csv,
)


def _flat_surface(direction, length, cells, rows, steps=2):
    data = np.tile(np.asarray(rows, dtype=float), (steps + 1, 1))
    return ValueSurface(
        grid=SpaceGrid(length, cells),
        time=TimeGrid(0.5, steps),
        data=data,
        direction=direction,
        plateau=float(data[-1, -1]),
    )


def test_gap_against_zero_dual_surface():
    """With a vanishing dual surface the conjugate readout is x y_1."""
    primal = _flat_surface("primal", 2.0, 4, [0.0] * 5)
    dual = _flat_surface("dual", 1.0, 4, [0.0] * 5)
    report = duality_gap(primal, dual, 0)
    assert np.array_equal(report.x, [0.5, 1.0, 1.5, 2.0])
    assert np.allclose(report.gap, 0.25 * report.x, atol=1.0e-14)
    assert np.all(report.argmin_y == 0.25)
    assert np.all(report.argmin_index == 1)
    assert np.all(report.boundary_hit)


def test_gap_tie_keeps_smallest_index():
    """A dual row with slope -1 makes every y tie at x = 1."""
    primal = _flat_surface("primal", 2.0, 2, [0.0, 0.0, 0.0])
    ys = np.linspace(0.0, 1.0, 5)
    dual = _flat_surface("dual", 1.0, 4, list(1.0 - ys))
    report = duality_gap(primal, dual, 0)
    at_one = int(np.argwhere(np.isclose(report.x, 1.0))[0][0])
    assert report.argmin_index[at_one] == 1
    assert report.argmin_y[at_one] == 0.25
    assert report.gap[at_one] == pytest.approx(1.0, abs=1.0e-14)


def test_gap_validation():
    primal = _flat_surface("primal", 2.0, 4, [0.0] * 5)
    dual = _flat_surface("dual", 1.0, 4, [0.0] * 5)
    with pytest.raises(ValueError):
        duality_gap(dual, primal, 0)
    other = _flat_surface("dual", 1.0, 4, [0.0] * 5, steps=3)
    with pytest.raises(ValueError):
        duality_gap(primal, other, 0)
    with pytest.raises(ValueError):
        duality_gap(primal, dual, 3)
    with pytest.raises(ValueError):
        duality_gap(primal, dual, -1)


def test_gap_on_solved_surfaces_is_positive(merton_gap_levels):
    _, _, _, report = merton_gap_levels[0]
    assert np.all(report.gap > 0.0)
    assert np.all(report.argmin_y >= 0.0)


def _toy_report():
    return GapReport(
        time_index=0,
        x=np.array([1.0]),
        gap=np.array([0.5]),
        argmin_y=np.array([1.0]),
        argmin_index=np.array([3]),
        boundary_hit=np.array([False]),
    )


def test_bounds_collapse_without_constants():
    bounds = aposteriori_bounds(
        _toy_report(),
        order=4,
        step=0.015625,
        spacing=0.015625,
        lip_primal=3.0,
        lip_dual=18.0,
        c_primal=0.0,
        c_dual=0.0,
    )
    assert bounds.lower[0] == 0.0
    assert bounds.upper[0] == 0.5
    assert bounds.constants["rate"] == pytest.approx(0.015625**0.375 + 1.0, abs=1.0e-14)


def test_bounds_rate_arithmetic():
    """Both sides carry (1 + s^8) times the mixed rate, by hand."""
    step = 1.0 / 64.0
    bounds = aposteriori_bounds(
        _toy_report(),
        order=4,
        step=step,
        spacing=step,
        lip_primal=3.0,
        lip_dual=3.0,
        c_primal=1.0,
        c_dual=1.0,
    )
    rate = step**0.375 + 1.0
    assert bounds.lower[0] == pytest.approx(-3.0 * 2.0 * rate, abs=1.0e-12)
    assert bounds.upper[0] == pytest.approx(0.5 + 3.0 * 2.0 * rate, abs=1.0e-12)
    assert bounds.upper[0] > bounds.lower[0]


def test_bounds_allowance_forms():
    base = aposteriori_bounds(
        _toy_report(),
        order=4,
        step=0.25,
        spacing=0.25,
        lip_primal=1.0,
        lip_dual=1.0,
        c_primal=0.0,
        c_dual=0.0,
    )
    shifted = aposteriori_bounds(
        _toy_report(),
        order=4,
        step=0.25,
        spacing=0.25,
        lip_primal=1.0,
        lip_dual=1.0,
        c_primal=0.0,
        c_dual=0.0,
        allowance=np.array([0.25]),
    )
    assert shifted.upper[0] == pytest.approx(base.upper[0] + 0.25, abs=1.0e-14)
    called = aposteriori_bounds(
        _toy_report(),
        order=4,
        step=0.25,
        spacing=0.25,
        lip_primal=1.0,
        lip_dual=1.0,
        c_primal=0.0,
        c_dual=0.0,
        allowance=lambda x: 2.0 * x,
    )
    assert called.upper[0] == pytest.approx(base.upper[0] + 2.0, abs=1.0e-14)


def test_bounds_validation():
    with pytest.raises(ValueError):
        aposteriori_bounds(
            _toy_report(),
            order=4,
            step=0.0,
            spacing=0.25,
            lip_primal=1.0,
            lip_dual=1.0,
            c_primal=1.0,
            c_dual=1.0,
        )
    with pytest.raises(ValueError):
        aposteriori_bounds(
            _toy_report(),
            order=0,
            step=0.25,
            spacing=0.25,
            lip_primal=1.0,
            lip_dual=1.0,
            c_primal=1.0,
            c_dual=1.0,
        )
    with pytest.raises(ValueError):
        aposteriori_bounds(
            _toy_report(),
            order=4,
            step=0.25,
            spacing=0.25,
            lip_primal=1.0,
            lip_dual=1.0,
            c_primal=1.0,
            c_dual=1.0,
            allowance=np.array([0.1, 0.2]),
        )


def test_polar_closed_form_merton():
    """Constant-policy product chains decay by 1 - h^2 r mu per step.

    The quadrature matches the first three normal moments exactly, so
    the per-step expectation of the coupled product is exact and the
    enumerated value must agree with the closed form to roundoff.
    """
    model = merton_model()
    x0, y0 = 1.5, 0.7
    for order in (2, 3):
        rule = gauss_hermite_rule(order)
        for a, steps, step in ((0.8, 3, 0.1), (-0.5, 2, 0.2), (0.0, 1, 0.5)):
            mu = 0.8 + a * 0.4
            expect, defect = polar_defect(
                model,
                rule,
                steps,
                step,
                (x0, y0),
                (a,) * steps,
                (0.0,) * steps,
            )
            want = x0 * y0 * (1.0 - step * step * 0.8 * mu) ** steps
            assert expect == pytest.approx(want, abs=1.0e-12)
            assert defect == pytest.approx(want - x0 * y0, abs=1.0e-12)


def test_polar_zero_policy_single_step():
    model = merton_model()
    _, defect = polar_defect(
        model, gauss_hermite_rule(2), 1, 0.5, (1.0, 1.0), (0.0,), (0.0,)
    )
    assert defect == pytest.approx(-0.16, abs=1.0e-14)


def test_polar_zero_start():
    model = merton_model()
    expect, defect = polar_defect(
        model, gauss_hermite_rule(3), 2, 0.1, (0.0, 1.0), (0.5, 0.5), (0.0, 0.0)
    )
    assert expect == 0.0
    assert defect == 0.0


def test_polar_merton_is_supermartingale():
    """Zero penalty kills the first-order term, so the product never grows.

    Each step multiplies the expectation by 1 - h^2 r mu with mu >= 0.4
    on the admissible controls, which is strictly below one.
    """
    model = merton_model()
    rng = np.random.default_rng(7)
    for steps in (1, 2, 4):
        step = 0.5 / steps
        for _ in range(6):
            policy = tuple(rng.uniform(-1.0, 1.0, steps))
            _, defect = polar_defect(
                model,
                gauss_hermite_rule(3),
                steps,
                step,
                (1.0, 1.0),
                policy,
                (0.0,) * steps,
            )
            assert defect <= 1.0e-12
            assert abs(defect) <= 1.0


def test_polar_constrained_violation_vanishes_with_step():
    """Constrained conjugacy makes the first-order term nonpositive.

    What survives upward is the second-order drift cross term, of size
    h^2 per step, so over horizon 0.5 any upward defect is O(h).
    """
    from dualgap import cuoco_liu_model

    model = cuoco_liu_model()
    rng = np.random.default_rng(7)
    a_mesh = np.linspace(-1.0, 1.0, 201)
    for steps in (1, 2, 4):
        step = 0.5 / steps
        for _ in range(6):
            primal_policy = tuple(rng.uniform(-1.0, 1.0, steps))
            dual_policy = tuple(rng.uniform(-1.0, 1.0, steps))
            _, defect = polar_defect(
                model,
                gauss_hermite_rule(3),
                steps,
                step,
                (1.0, 1.0),
                primal_policy,
                dual_policy,
                a_mesh=a_mesh,
            )
            assert defect <= 1.5 * step + 1.0e-12
            assert abs(defect) <= 1.0


def test_gap_csv_without_bounds(tmp_path):
    path = tmp_path / "gap.csv"
    write_gap_csv(_toy_report(), path, header="toy")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# toy"
    assert lines[1] == "x,gap,argmin_y,lower,upper"
    cells = lines[2].split(",")
    assert len(cells) == 5
    assert cells[3] == "nan" and cells[4] == "nan"


def test_gap_csv_with_bounds(tmp_path):
    report = _toy_report()
    bounds = aposteriori_bounds(
        report,
        order=4,
        step=0.25,
        spacing=0.25,
        lip_primal=1.0,
        lip_dual=1.0,
        c_primal=1.0,
        c_dual=1.0,
    )
    path = tmp_path / "gap.csv"
    write_gap_csv(report, path, bounds=bounds)
    cells = path.read_text(encoding="utf-8").splitlines()[1].split(",")
    assert float(cells[3]) == pytest.approx(bounds.lower[0], rel=1.0e-12)
    assert float(cells[4]) == pytest.approx(bounds.upper[0], rel=1.0e-12)


def test_gap_csv_mismatch(tmp_path):
    report = _toy_report()
    bad = BoundReport(
        x=np.array([1.0, 2.0]),
        gap=np.array([0.5, 0.5]),
        lower=np.array([-1.0, -1.0]),
        upper=np.array([1.0, 1.0]),
        constants={},
    )
    with pytest.raises(ValueError):
        write_gap_csv(report, tmp_path / "gap.csv", bounds=bad)
