"""Metrics: contribution surfaces, grid MSE, concordance, composed reports.

The contribution surface f(x)*w(l) is the interpretable output of the
model: it is invariant to the joint rescaling (k*f, w/k), so grid MSE
between surfaces is well defined even though the factors are only
identified up to that rescaling and a joint sign flip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SurvivalOutcomes, as_panel_array
from .errors import DataError
from .loss import build_masks, efron_loss
from .model import cumulative_effect, exposure_forward
from .params import EvalMode, ParamSet
from .simulate import Scenario

DEFAULT_X_POINTS = 101


def default_x_grid(n_points: int = DEFAULT_X_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_points)


@dataclass(frozen=True)
class ContributionGrid:
    """Outer-product surface values[x, l] = f(x_grid[x]) * w(l_grid[l])."""

    x_grid: np.ndarray
    l_grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class Metrics:
    loss: float
    c_index: float
    gmse: float | None = None


def orient_sign(f_values: np.ndarray, kernel: np.ndarray) -> float:
    """Canonical sign for reporting (f, w) curves.

    (f, w) and (-f, -w) produce identical hazards and an identical
    contribution surface; reported curves flip both factors so the kernel
    mass is nonnegative (tie broken by the dominant f value).
    """
    total = float(np.sum(kernel))
    if total != 0.0:
        return 1.0 if total > 0 else -1.0
    if f_values.size:
        lead = f_values[np.argmax(np.abs(f_values))]
        if lead != 0.0:
            return 1.0 if lead > 0 else -1.0
    return 1.0


def fitted_curves(params: ParamSet, x_grid=None, l_grid=None, oriented: bool = True):
    """(f on x_grid, w on l_grid), canonically sign-oriented by default."""
    if x_grid is None:
        x_grid = default_x_grid()
    if l_grid is None:
        l_grid = np.arange(params.config.lag + 1)
    l_grid = np.asarray(l_grid, dtype=int)
    f_vals = exposure_forward(params, np.asarray(x_grid, dtype=float), mode=EvalMode.INFERENCE)
    w_vals = params.kernel[l_grid]
    if oriented:
        sign = orient_sign(f_vals, params.kernel)
        f_vals = sign * f_vals
        w_vals = sign * w_vals
    return f_vals, w_vals


def contribution_grid(source, x_grid=None, l_grid=None) -> ContributionGrid:
    """Surface from a fitted ParamSet or a Scenario's true functions."""
    if x_grid is None:
        x_grid = default_x_grid()
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.size == 0:
        raise DataError("x grid must be nonempty")
    if isinstance(source, ParamSet):
        if l_grid is None:
            l_grid = np.arange(source.config.lag + 1)
        l_grid = np.asarray(l_grid, dtype=int)
        f_vals, w_vals = fitted_curves(source, x_grid, l_grid, oriented=False)
    elif isinstance(source, Scenario):
        if l_grid is None:
            l_grid = np.arange(source.lag + 1)
        l_grid = np.asarray(l_grid, dtype=int)
        f_vals = source.f(x_grid)
        w_vals = source.kernel_values(l_grid)
    else:
        raise DataError(f"cannot build a contribution grid from {type(source).__name__}")
    if l_grid.size == 0:
        raise DataError("lag grid must be nonempty")
    return ContributionGrid(x_grid=x_grid, l_grid=l_grid, values=np.outer(f_vals, w_vals))


def gmse(truth: ContributionGrid, pred: ContributionGrid) -> float:
    """Mean squared difference over all grid cells; grids must match."""
    if not (np.array_equal(truth.x_grid, pred.x_grid) and np.array_equal(truth.l_grid, pred.l_grid)):
        raise DataError("contribution grids are defined on different (x, l) grids")
    return float(np.mean((pred.values - truth.values) ** 2))


def c_index(field: np.ndarray, outcomes: SurvivalOutcomes) -> float:
    """Risk-set concordance at event times using the current log-hazard.

    At each event time t, each event subject is compared against subjects
    still at risk whose time exceeds t (or equals t with censoring); tied
    hazards count one half. Same-time event pairs are not comparable.
    """
    field = np.asarray(field, dtype=float)
    times, events = outcomes.time, outcomes.event
    if events.sum() < 1:
        raise DataError("concordance undefined: no events")
    concordant = 0.0
    comparable = 0
    for t in np.unique(times[events == 1]):
        ev = (times == t) & (events == 1)
        cmp_set = (times > t) | ((times == t) & (events == 0))
        h_ev = field[ev, t - 1]
        h_cmp = field[cmp_set, t - 1]
        if h_ev.size == 0 or h_cmp.size == 0:
            continue
        diff = h_ev[:, None] - h_cmp[None, :]
        concordant += float((diff > 0).sum()) + 0.5 * float((diff == 0).sum())
        comparable += diff.size
    if comparable == 0:
        raise DataError("concordance undefined: no comparable pairs")
    return concordant / comparable


def evaluate(params: ParamSet, panel, outcomes: SurvivalOutcomes, truth: ContributionGrid | None = None) -> Metrics:
    """Penalty-free loss, concordance, and grid MSE when truth is supplied."""
    values = as_panel_array(panel)
    field = cumulative_effect(params, values, mode=EvalMode.INFERENCE)
    masks = build_masks(outcomes, values.shape[1])
    loss = efron_loss(field, masks)
    cidx = c_index(field, outcomes)
    g = None
    if truth is not None:
        pred = contribution_grid(params, truth.x_grid, truth.l_grid)
        g = gmse(truth, pred)
    return Metrics(loss=loss, c_index=cidx, gmse=g)
