"""Numerical duality gap and the two-sided error bounds built on it.

The dual surface approximates the conjugate problem, so conjugating it
back,

    min over grid points y_j > 0 of  dual(t, y_j) + x y_j,

should land just above the primal surface; the difference is the
numerical duality gap.  It is nonnegative up to discretisation error,
shrinks with the meshes, and sandwiches the unknown true error: the gap
plus a priori envelopes gives a computable upper bound on how far the
primal surface sits below the true value, and an envelope alone bounds
the overshoot.

The polar check validates the mechanism the gap rests on: along any
pair of policies the product of the two chains, driven by the same
branch noise, must stay an expectation supermartingale up to O(h).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .solver import ChainSpec, enumerate_coupled


@dataclass(frozen=True)
class GapReport:
    """Gap values at one time index, per interior space node.

    ``argmin_y`` records where the conjugate minimum was attained
    (smallest index on ties) and ``boundary_hit`` flags nodes whose
    minimiser sat at an end of the dual grid, where the reported gap is
    a boundary artefact rather than a conjugacy statement.
    """

    time_index: int
    x: np.ndarray
    gap: np.ndarray
    argmin_y: np.ndarray
    argmin_index: np.ndarray
    boundary_hit: np.ndarray


@dataclass(frozen=True)
class BoundReport:
    """Two-sided a posteriori bounds around the primal surface.

    At each node: lower <= true value - primal value <= upper, with
    ``upper`` combining the observed gap, the dual envelope at the
    attained conjugate argument, and the truncation allowance.
    """

    x: np.ndarray
    gap: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constants: dict


def duality_gap(primal, dual, time_index=0):
    """Conjugate the dual surface back and subtract the primal one.

    Both surfaces must share the time lattice.  The dual node y = 0 is
    excluded from the minimisation: the conjugate reading there would
    claim an infinite-slope certificate that the chain cannot represent.
    """
    if primal.direction != "primal" or dual.direction != "dual":
        raise ValueError("duality_gap expects a primal and a dual surface, in that order")
    if primal.time.steps != dual.time.steps or primal.time.horizon != dual.time.horizon:
        raise ValueError("surfaces live on different time lattices")
    n = int(time_index)
    if not 0 <= n <= primal.time.steps:
        raise ValueError(f"time index {n} outside [0, {primal.time.steps}]")
    xs = primal.grid.nodes[1:]
    ys = dual.grid.nodes[1:]
    minimand = dual.data[n, 1:][None, :] + xs[:, None] * ys[None, :]
    pick = np.argmin(minimand, axis=1)
    rows = np.arange(xs.size)
    gap = minimand[rows, pick] - primal.data[n, 1:]
    return GapReport(
        time_index=n,
        x=xs.copy(),
        gap=gap,
        argmin_y=ys[pick],
        argmin_index=pick + 1,
        boundary_hit=(pick == 0) | (pick == ys.size - 1),
    )


def aposteriori_bounds(
    report,
    *,
    order,
    step,
    spacing,
    lip_primal,
    lip_dual,
    c_primal,
    c_dual,
    allowance=None,
):
    """Wrap a gap report into the computable two-sided error bounds.

    Both sides carry the scheme rate step^((M-1)/2M) + spacing/step with
    polynomial growth 1 + s^{2M}, where s is the space node for the
    lower side and the attained conjugate argument for the upper side.
    ``allowance`` is what the domain truncation may cost, as a callable
    of x or a precomputed array; it enters the upper side only.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be positive, got {order}")
    if step <= 0.0 or spacing <= 0.0:
        raise ValueError("step and spacing must be positive")
    rate = step ** ((order - 1.0) / (2.0 * order)) + spacing / step
    two_m = 2 * order
    if allowance is None:
        slack = np.zeros(report.x.shape)
    elif callable(allowance):
        slack = np.array([float(allowance(x)) for x in report.x])
    else:
        slack = np.asarray(allowance, dtype=float)
        if slack.shape != report.x.shape:
            raise ValueError("allowance array must match the report nodes")
    lower = -lip_primal * c_primal * (1.0 + report.x**two_m) * rate
    upper = report.gap + lip_dual * c_dual * (1.0 + report.argmin_y**two_m) * rate + slack
    return BoundReport(
        x=report.x,
        gap=report.gap,
        lower=lower,
        upper=upper,
        constants={
            "order": order,
            "step": step,
            "spacing": spacing,
            "rate": rate,
            "lip_primal": lip_primal,
            "lip_dual": lip_dual,
            "c_primal": c_primal,
            "c_dual": c_dual,
        },
    )


def polar_defect(model, rule, steps, step, start, primal_policy, dual_policy, a_mesh=None):
    """Expectation of the coupled product chain and its defect from x y.

    Enumerates every branch pair of the two chains under shared noise
    and returns (E[X Y], E[X Y] - x y).  The defect must be O(step)
    uniformly in the policies: each step multiplies the expectation by
    1 + h (g - conj(g) - a gamma) - h^2 mu (r + conj(g)) whose middle
    term is nonpositive by conjugacy.
    """
    x0, y0 = float(start[0]), float(start[1])
    primal = ChainSpec(
        model=model,
        rule=rule,
        start_time=0.0,
        start_state=x0,
        step=step,
        policy=tuple(primal_policy),
        direction="primal",
    )
    dual = ChainSpec(
        model=model,
        rule=rule,
        start_time=0.0,
        start_state=y0,
        step=step,
        policy=tuple(dual_policy),
        direction="dual",
        a_mesh=a_mesh,
    )
    xs, ys, probs = enumerate_coupled(primal, dual, steps)
    expectation = float(np.sum(probs * xs * ys))
    return expectation, expectation - x0 * y0


def write_gap_csv(report, path, header=None, bounds: Optional[BoundReport] = None):
    """Dump a gap report as ``x,gap,argmin_y,lower,upper`` rows.

    Without a bound report the last two columns are written as nan so
    the schema stays fixed.
    """
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append("x,gap,argmin_y,lower,upper")
    if bounds is not None and not np.array_equal(bounds.x, report.x):
        raise ValueError("bound report does not match the gap report nodes")
    for i in range(report.x.size):
        lower = bounds.lower[i] if bounds is not None else float("nan")
        upper = bounds.upper[i] if bounds is not None else float("nan")
        lines.append(
            f"{report.x[i]:.15e},{report.gap[i]:.15e},{report.argmin_y[i]:.15e},"
            f"{lower:.15e},{upper:.15e}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
