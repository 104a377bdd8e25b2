"""Refinement ladders, windowed error norms, and convergence tables.

One ladder level couples all meshes to the time step: N = 4 * 2^k time
steps, J = ceil(N^{11/8}) space cells, and 2^k + 1 control points per
interval.  The space/time coupling keeps the interpolation term
spacing/step of the same order as the rest of the scheme error, so the
observed orders are attributable to the step.

Norms are taken over a window of space nodes at the initial time: the
truncation and boundary closures pollute the far ends of the grid, the
window is where the scheme is supposed to be accurate.
"""

import math
import time as _time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .duality import duality_gap
from .lattice import Discretization
from .solver import solve

_NORM_KEYS = ("l1", "l2", "linf")


def dual_cell_count(steps):
    """Dual-grid cells for a solve with the given number of time steps.

    The conjugate readout of the dual surface carries an O(x dy) term, so
    dy has to shrink like the time step for the gap to decay at first
    order.  Tying dy to the primal spacing instead lets that term dominate
    every coarse level.  Three dual cells per two time steps balances the
    readout against the interpolation error accumulated over the steps.
    """
    return math.ceil(3 * steps / 2)


@dataclass(frozen=True)
class LadderLevel:
    """Mesh sizes of one refinement level."""

    index: int
    steps: int
    cells: int
    primal_controls: int
    dual_controls: int
    order: int

    def discretization(self, x_max, y_max):
        # Dual spacing tracks the time step; see Discretization.
        return Discretization(
            steps=self.steps,
            cells=self.cells,
            dual_cells=dual_cell_count(self.steps),
            order=self.order,
            primal_controls=self.primal_controls,
            dual_controls=self.dual_controls,
            x_max=float(x_max),
            y_max=float(y_max),
        )


@dataclass(frozen=True)
class ConvergenceTable:
    """Norms per ladder level with observed orders between levels.

    ``orders[key][i]`` is log2 of the norm drop from level i-1 to i and
    nan at i = 0.  ``seconds`` holds wall-clock solve times; they are
    reported on stdout but kept out of the CSV so reruns stay
    byte-identical.
    """

    mode: str
    levels: Tuple[LadderLevel, ...]
    norms: Tuple[dict, ...]
    orders: dict
    seconds: Tuple[float, ...]


def refinement_ladder(k_min=1, k_max=5, order=4):
    """Levels k_min..k_max of the coupled mesh family."""
    if k_min < 0:
        raise ValueError(f"level indices start at 0, got k_min = {k_min}")
    if k_max < k_min:
        raise ValueError(f"empty ladder: k_min = {k_min}, k_max = {k_max}")
    levels = []
    for k in range(k_min, k_max + 1):
        steps = 4 * 2**k
        cells = math.ceil(steps**1.375)
        controls = 2**k + 1
        levels.append(
            LadderLevel(
                index=k,
                steps=steps,
                cells=cells,
                primal_controls=controls,
                dual_controls=controls,
                order=order,
            )
        )
    return tuple(levels)


def window_norms(xs, values, reference, window, spacing):
    """Discrete l1, l2, max norms of values - reference over a node window.

    ``reference`` may be a callable of x or an array aligned with xs.
    The l1 and l2 norms carry the node spacing, so they approximate the
    continuous norms over the window.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.shape != values.shape:
        raise ValueError("nodes and values must align")
    lo, hi = window
    mask = (xs >= lo - 1.0e-12) & (xs <= hi + 1.0e-12)
    if not np.any(mask):
        raise ValueError(f"window [{lo}, {hi}] contains no grid nodes")
    if callable(reference):
        ref = np.asarray(reference(xs[mask]), dtype=float)
    else:
        ref = np.asarray(reference, dtype=float)[mask]
    err = np.abs(values[mask] - ref)
    return {
        "l1": float(spacing * err.sum()),
        "l2": float(math.sqrt(spacing * float(np.sum(err * err)))),
        "linf": float(err.max()),
    }


def convergence_orders(series):
    """log2 drop between consecutive values; nan first, nan on bad ratios."""
    series = [float(v) for v in series]
    orders = [float("nan")]
    for prev, cur in zip(series[:-1], series[1:]):
        if prev > 0.0 and cur > 0.0:
            orders.append(math.log2(prev / cur))
        else:
            orders.append(float("nan"))
    return orders


def run_ladder(
    model,
    terminal,
    ladder,
    mode,
    *,
    x_max,
    y_max=None,
    conjugate=None,
    reference: Optional[Union[Callable, np.ndarray]] = None,
    window=None,
    time_index=0,
):
    """Solve every ladder level and collect windowed norms.

    mode "error" compares the primal surface at the initial time
    against ``reference`` (the closed-form value as a callable of x)
    over the window, default [1, 2].  mode "gap" solves both surfaces,
    takes the duality gap at ``time_index``, and measures it against
    zero over the window, default the whole positive axis of the grid.
    """
    if mode not in ("error", "gap"):
        raise ValueError(f"unknown ladder mode {mode!r}")
    if mode == "error" and reference is None:
        raise ValueError("error mode needs a reference value function")
    if mode == "gap" and conjugate is None:
        raise ValueError("gap mode needs the conjugate terminal reward")
    norms = []
    seconds = []
    for level in ladder:
        disc = level.discretization(x_max, y_max if y_max is not None else x_max)
        begin = _time.perf_counter()
        primal = solve(model, terminal, disc, "primal")
        if mode == "error":
            xs = primal.grid.nodes
            values = primal.data[time_index]
            norms.append(
                window_norms(
                    xs,
                    values,
                    reference,
                    window if window is not None else (1.0, 2.0),
                    primal.grid.spacing,
                )
            )
        else:
            dual = solve(model, conjugate, disc, "dual")
            report = duality_gap(primal, dual, time_index)
            norms.append(
                window_norms(
                    report.x,
                    report.gap,
                    lambda x: np.zeros_like(x),
                    window if window is not None else (0.0, float(x_max)),
                    primal.grid.spacing,
                )
            )
        seconds.append(_time.perf_counter() - begin)
    orders = {key: tuple(convergence_orders([n[key] for n in norms])) for key in _NORM_KEYS}
    return ConvergenceTable(
        mode=mode,
        levels=tuple(ladder),
        norms=tuple(norms),
        orders=orders,
        seconds=tuple(seconds),
    )


def write_convergence_csv(table, path, header=None):
    """Dump ``J,N,l1,order_l1,l2,order_l2,linf,order_linf`` rows.

    The first level has no predecessor, its order cells hold nan.
    """
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append("J,N,l1,order_l1,l2,order_l2,linf,order_linf")
    for i, level in enumerate(table.levels):
        cells = [str(level.cells), str(level.steps)]
        for key in _NORM_KEYS:
            cells.append(f"{table.norms[i][key]:.15e}")
            cells.append(f"{table.orders[key][i]:.15e}")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
