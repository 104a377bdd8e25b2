"""Backward semi-Lagrangian sweeps for the primal and dual value functions.

One step freezes the control over [t_n, t_n + h], advances the state by
the Euler displacement with the Gaussian increment collapsed onto the
quadrature nodes, reads the next value row by linear interpolation, and
optimises over a finite control mesh.  Both state processes are
geometric, so the displaced states are the current node times a factor
shared by the whole row:

    primal, maximising:  1 + h (r + a (b - r) + g) + sqrt(h) a sigma xi
    dual,   minimising:  1 - h (r + sup_a {g - a gamma}) + sqrt(h) (r - b - gamma) / sigma xi

with xi running over the quadrature nodes.  The state at the origin is
absorbing in both cases, so row entry 0 is copied through time.

The same factors drive ``enumerate_chain``, which expands every branch
of the discrete chain explicitly for small step counts; it is the
ground truth the expectation-level tests and the polar check run on.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import NumericalFailure, ResourceLimit
from .lattice import SpaceGrid, TimeGrid, control_mesh, interpolate
from .market import penalty_conjugate
from .quadrature import QuadratureRule, gauss_hermite_rule

#: hard cap on explicitly enumerated chain branches
MAX_BRANCHES = 10_000_000

_SURFACE_SLACK = 1.0e-8


@dataclass(frozen=True)
class ValueSurface:
    """A solved value function on the full time-space lattice.

    ``data[n, m]`` approximates the value at time node n and space node
    m; row ``steps`` is the terminal condition.  ``controls[n, m]`` is
    the control the sweep selected there (first mesh point on ties),
    kept for diagnostics.
    """

    grid: SpaceGrid
    time: TimeGrid
    data: np.ndarray
    direction: str
    plateau: float
    controls: Optional[np.ndarray] = None

    def validate(self):
        """Check the discrete structure the sweep is supposed to preserve.

        The terminal row must be stored exactly.  For the maximising
        direction the sweep is a composition of convex combinations and
        a pointwise maximum, so every value must stay inside the
        terminal range and rows must be nondecreasing in space, both up
        to interpolation slack.
        """
        if not np.all(np.isfinite(self.data)):
            raise NumericalFailure("value surface contains non-finite entries")
        if self.direction != "primal":
            return
        lo = float(self.data[-1].min()) - _SURFACE_SLACK
        hi = float(self.data[-1].max()) + _SURFACE_SLACK
        if self.data.min() < lo or self.data.max() > hi:
            raise NumericalFailure(
                f"primal surface leaves the terminal range [{lo}, {hi}]"
            )
        steps = np.diff(self.data, axis=1)
        if steps.min() < -_SURFACE_SLACK:
            n, m = divmod(int(steps.argmin()), steps.shape[1])
            raise NumericalFailure(
                f"primal surface decreasing in space at time index {n}, node {m}"
            )


@dataclass(frozen=True)
class ChainSpec:
    """One explicit Markov chain: start point, step, and per-step controls."""

    model: object
    rule: QuadratureRule
    start_time: float
    start_state: float
    step: float
    policy: Tuple[float, ...]
    direction: str = "primal"
    a_mesh: Optional[np.ndarray] = None


def step_factors(model, t, control, rule, step, direction, a_mesh=None):
    """Branch multipliers for one step of the chosen chain.

    Returns an array over quadrature branches; the displaced state is
    the current state times the factor.  The dual chain needs a mesh
    over the primal control interval to evaluate the conjugate penalty.
    """
    r = model.rate(t)
    b = model.appreciation(t)
    sig = model.vol(t)
    root = math.sqrt(step)
    if direction == "primal":
        mu = r + control * (b - r) + float(model.penalty(t, control))
        return 1.0 + step * mu + root * control * sig * rule.nodes
    if direction == "dual":
        mesh = a_mesh if a_mesh is not None else control_mesh(model.a_interval, 2)
        conj = penalty_conjugate(model, t, control, mesh)
        return 1.0 - step * (r + conj) + root * ((r - b - control) / sig) * rule.nodes
    raise ValueError(f"unknown direction {direction!r}")


def primal_step(next_row, t, model, rule, controls, grid, step, plateau):
    """One backward step of the maximising sweep.

    Returns the new row and the selected control per node.  Branches are
    accumulated in ascending node order and ties between controls keep
    the earliest mesh point, so the sweep is bit-reproducible.
    """
    nodes = grid.nodes
    best = np.full(nodes.shape, -np.inf)
    chosen = np.empty(nodes.shape)
    for a in controls:
        factors = step_factors(model, t, a, rule, step, "primal")
        value = np.zeros(nodes.shape)
        for weight, factor in zip(rule.weights, factors):
            value += weight * interpolate(grid, next_row, nodes * factor, plateau)
        better = value > best
        best = np.where(better, value, best)
        chosen = np.where(better, a, chosen)
    best[0] = next_row[0]
    chosen[0] = controls[0]
    return best, chosen


def dual_step(next_row, t, model, rule, gammas, a_mesh, grid, step, plateau):
    """One backward step of the minimising sweep, mirror image of the primal."""
    nodes = grid.nodes
    best = np.full(nodes.shape, np.inf)
    chosen = np.empty(nodes.shape)
    for gamma in gammas:
        factors = step_factors(model, t, gamma, rule, step, "dual", a_mesh)
        value = np.zeros(nodes.shape)
        for weight, factor in zip(rule.weights, factors):
            value += weight * interpolate(grid, next_row, nodes * factor, plateau)
        better = value < best
        best = np.where(better, value, best)
        chosen = np.where(better, gamma, chosen)
    best[0] = next_row[0]
    chosen[0] = gammas[0]
    return best, chosen


def solve(model, terminal, disc, direction="primal"):
    """Run the full backward sweep for one discretisation level.

    Parameters
    ----------
    model : MarketModel
    terminal : object with an ``evaluate`` callable
        Terminal reward (a truncated utility for the primal direction,
        its conjugate for the dual one).
    disc : Discretization
    direction : "primal" or "dual"

    Returns
    -------
    ValueSurface, already validated.
    """
    if direction not in ("primal", "dual"):
        raise ValueError(f"unknown direction {direction!r}")
    rule = gauss_hermite_rule(disc.order)
    time = TimeGrid(model.horizon, disc.steps)
    if direction == "primal":
        grid = SpaceGrid(disc.x_max, disc.cells)
        mesh = control_mesh(model.a_interval, disc.primal_controls)
        a_mesh = None
    else:
        grid = SpaceGrid(disc.y_max, disc.dual_cells)
        mesh = control_mesh(model.gamma_interval, disc.dual_controls)
        a_mesh = control_mesh(model.a_interval, disc.primal_controls)
    bottom = np.asarray(terminal.evaluate(grid.nodes), dtype=float)
    if bottom.shape != grid.nodes.shape or not np.all(np.isfinite(bottom)):
        raise ValueError("terminal reward must be finite on the grid")
    plateau = float(bottom[-1])
    data = np.empty((disc.steps + 1, grid.cells + 1))
    data[disc.steps] = bottom
    controls = np.empty((disc.steps, grid.cells + 1))
    for n in range(disc.steps - 1, -1, -1):
        t = time.times[n]
        if direction == "primal":
            row, arg = primal_step(data[n + 1], t, model, rule, mesh, grid, time.step, plateau)
        else:
            row, arg = dual_step(
                data[n + 1], t, model, rule, mesh, a_mesh, grid, time.step, plateau
            )
        if not np.all(np.isfinite(row)):
            raise NumericalFailure(f"non-finite value row at time index {n}")
        data[n] = row
        controls[n] = arg
    data.setflags(write=False)
    controls.setflags(write=False)
    surface = ValueSurface(
        grid=grid,
        time=time,
        data=data,
        direction=direction,
        plateau=plateau,
        controls=controls,
    )
    surface.validate()
    return surface


def _checked_branch_count(order, steps):
    total = order**steps
    if total > MAX_BRANCHES:
        raise ResourceLimit(
            f"{order}^{steps} = {total} chain branches exceed the cap of {MAX_BRANCHES}"
        )
    return total


def enumerate_chain(spec, steps):
    """All endpoint states of the chain after ``steps`` steps, with probabilities.

    Branches multiply by the rule order each step, so this is only for
    small step counts; the cap guards against runaway requests.  States
    and probabilities come back in a fixed depth-first order.
    """
    if steps < 0:
        raise ValueError(f"step count must be nonnegative, got {steps}")
    if len(spec.policy) < steps:
        raise ValueError(f"policy provides {len(spec.policy)} controls for {steps} steps")
    _checked_branch_count(spec.rule.order, steps)
    states = np.array([float(spec.start_state)])
    probs = np.array([1.0])
    for i in range(steps):
        t = spec.start_time + i * spec.step
        factors = step_factors(
            spec.model, t, spec.policy[i], spec.rule, spec.step, spec.direction, spec.a_mesh
        )
        states = (states[:, None] * factors[None, :]).reshape(-1)
        probs = (probs[:, None] * spec.rule.weights[None, :]).reshape(-1)
    return states, probs


def enumerate_coupled(primal_spec, dual_spec, steps):
    """Joint enumeration of both chains driven by the same branch noise.

    Per step the two states multiply by their own factors at the same
    quadrature branch, with that branch's weight; this is the coupling
    under which the product of the chains is a near-supermartingale.
    """
    if primal_spec.rule is not dual_spec.rule and primal_spec.rule.order != dual_spec.rule.order:
        raise ValueError("coupled chains must share one quadrature rule")
    if primal_spec.step != dual_spec.step or primal_spec.start_time != dual_spec.start_time:
        raise ValueError("coupled chains must share the time lattice")
    if len(primal_spec.policy) < steps or len(dual_spec.policy) < steps:
        raise ValueError(f"both policies must cover {steps} steps")
    _checked_branch_count(primal_spec.rule.order, steps)
    xs = np.array([float(primal_spec.start_state)])
    ys = np.array([float(dual_spec.start_state)])
    probs = np.array([1.0])
    rule = primal_spec.rule
    for i in range(steps):
        t = primal_spec.start_time + i * primal_spec.step
        fx = step_factors(
            primal_spec.model, t, primal_spec.policy[i], rule, primal_spec.step, "primal"
        )
        fy = step_factors(
            dual_spec.model,
            t,
            dual_spec.policy[i],
            rule,
            dual_spec.step,
            "dual",
            dual_spec.a_mesh,
        )
        xs = (xs[:, None] * fx[None, :]).reshape(-1)
        ys = (ys[:, None] * fy[None, :]).reshape(-1)
        probs = (probs[:, None] * rule.weights[None, :]).reshape(-1)
    return xs, ys, probs


def write_surface_csv(surface, path, header=None):
    """Dump a surface as ``t,x,value`` rows, time-major, 16 significant digits."""
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append("t,x,value")
    for n, t in enumerate(surface.time.times):
        for x, v in zip(surface.grid.nodes, surface.data[n]):
            lines.append(f"{t:.15e},{x:.15e},{v:.15e}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
