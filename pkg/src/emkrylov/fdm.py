"""Reference transient solver: implicit backward Euler with sparse LU reuse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import LtiSystem
from .errors import NumericalError, ParameterError

#: Relative step-size change that triggers a refactorization.
REFACTOR_REL_TOL = 1e-12


@dataclass
class StressTrajectory:
    """Stress states on a time grid.

    times are strictly increasing; states[k] is the full-space stress vector
    (Pa) at times[k]. residual_rel is only populated by the exponential
    integration engine.
    """

    times: np.ndarray
    states: np.ndarray                      # shape (len(times), n)
    solver_tag: str
    residual_rel: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or self.states.ndim != 2:
            raise ParameterError("trajectory needs 1-D times and 2-D states")
        if len(self.times) != len(self.states):
            raise ParameterError("times and states lengths differ")
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise NumericalError("trajectory contains non-finite states")
        if self.residual_rel is not None:
            self.residual_rel = np.asarray(self.residual_rel, dtype=float)
            if self.residual_rel.shape != self.times.shape:
                raise ParameterError("residual_rel must match times")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def shifted(self, offset: float) -> "StressTrajectory":
        """Same trajectory with times translated by offset (phase stitching)."""
        return StressTrajectory(self.times + offset, self.states, self.solver_tag,
                                self.residual_rel)


def _validate_grid(time_grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ParameterError("time grid must be 1-D with at least two points")
    if grid[0] != 0.0:
        raise ParameterError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("time grid must be strictly increasing")
    return grid


def backward_euler(sys: LtiSystem, time_grid) -> StressTrajectory:
    """Integrate x' = A x + B u by backward Euler on the given grid.

    Each step solves (I - h A) x_{k+1} = x_k + h B u with a sparse LU that is
    refactorized only when h changes by more than REFACTOR_REL_TOL relative.
    """
    grid = _validate_grid(time_grid)
    n = sys.n
    b = sys.forcing()
    identity = sp.identity(n, format="csr")

    states = np.empty((len(grid), n))
    states[0] = sys.x0

    lu = None
    h_current = None
    hb = None
    x = sys.x0.copy()
    for k in range(1, len(grid)):
        h = grid[k] - grid[k - 1]
        if lu is None or abs(h - h_current) > REFACTOR_REL_TOL * h_current:
            try:
                lu = spla.splu((identity - h * sys.A).tocsc())
            except RuntimeError as exc:  # cannot occur for h > 0, nonpositive spectrum
                raise NumericalError(f"(I - h A) singular at h={h:g}: {exc}") from exc
            h_current = h
            hb = h * b
        x = lu.solve(x + hb)
        states[k] = x

    return StressTrajectory(times=grid, states=states, solver_tag="fdm")


def backward_euler_scan(sys: LtiSystem, time_grid, sigma_crit: float | None = None):
    """Backward Euler without storing the trajectory (fine reference runs).

    Steps the system over the grid keeping O(n) memory. When ``sigma_crit``
    is given, stops at the first step whose peak stress reaches it and
    returns ``(event_time, node, state_at_event, None)`` with the crossing
    time and state linearly interpolated inside the bracketing step. With no
    threshold (or if never crossed) returns ``(None, None, None, final_state)``.
    """
    grid = _validate_grid(time_grid)
    b = sys.forcing()
    identity = sp.identity(sys.n, format="csr")

    lu = None
    h_current = None
    hb = None
    x = sys.x0.copy()
    if sigma_crit is not None and x.max() >= sigma_crit:
        node = int(np.argmax(x))
        return float(grid[0]), node, x.copy(), None
    for k in range(1, len(grid)):
        h = grid[k] - grid[k - 1]
        if lu is None or abs(h - h_current) > REFACTOR_REL_TOL * h_current:
            lu = spla.splu((identity - h * sys.A).tocsc())
            h_current = h
            hb = h * b
        x_new = lu.solve(x + hb)
        if sigma_crit is not None and x_new.max() >= sigma_crit:
            node = int(np.argmax(x_new))
            s0, s1 = x[node], x_new[node]
            frac = (sigma_crit - s0) / (s1 - s0) if s1 > s0 else 1.0
            t_nuc = grid[k - 1] + frac * h
            state = (1.0 - frac) * x + frac * x_new
            return float(t_nuc), node, state, None
        x = x_new
    if not np.all(np.isfinite(x)):
        raise NumericalError("backward Euler produced non-finite states")
    return None, None, None, x


class FdmSolution:
    """Backward-Euler phase result with interpolation-based state evaluation."""

    solver_tag = "fdm"

    def __init__(self, trajectory: StressTrajectory):
        self.trajectory = trajectory

    def state_at(self, t: float) -> np.ndarray:
        """Linear interpolation between the bracketing grid states."""
        times = self.trajectory.times
        if not times[0] <= t <= times[-1]:
            raise ParameterError(f"t={t:g} outside the solved interval")
        k = int(np.searchsorted(times, t))
        if k == 0 or times[k] == t:
            return self.trajectory.states[k].copy()
        t0, t1 = times[k - 1], times[k]
        frac = (t - t0) / (t1 - t0)
        return (1.0 - frac) * self.trajectory.states[k - 1] + frac * self.trajectory.states[k]


def solve_fdm_phase(sys: LtiSystem, time_grid) -> FdmSolution:
    return FdmSolution(backward_euler(sys, time_grid))
