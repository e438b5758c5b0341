"""Frequency-domain engine: extended rational Arnoldi reduction.

Builds an orthonormal basis of the shifted subspace
span{b_s, (A - sigma I)^{-1}(v1 - x0), (A - sigma I)^{-1} v2, ...} with
b_s = -(A - sigma I)^{-1} B u, projects the system by congruence, integrates
the reduced system with backward Euler, and recovers full-space stress as
x(t) = V xhat(t).

sigma = 0 degenerates to the standard extended Krylov expansion (the FastEM
comparison mode); the singular nucleation operator is then handled by a
deflated solve restricted to range(A).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._basis import mgs_orthogonalize
from .discretize import LtiSystem
from .errors import DegenerateInputError, NumericalError, ParameterError
from .fdm import StressTrajectory, _validate_grid
from .linsolve import DeflatedSolver, PlainSolver, ShiftedSolver


@dataclass(frozen=True)
class ReducedModel:
    """Congruence-projected system (A_h = V^T A V, B_h = V^T B)."""

    V: np.ndarray            # n x k, orthonormal
    A_h: np.ndarray          # k x k
    B_h: np.ndarray          # k x m
    x0_h: np.ndarray         # k
    shift: float             # sigma (1/s)
    order_requested: int
    order_achieved: int
    H: np.ndarray            # Gram-Schmidt coefficients, diagnostics only

    @property
    def k(self) -> int:
        return self.order_achieved


def _shift_solver(sys: LtiSystem, sigma: float):
    if sigma != 0.0:
        return ShiftedSolver(sys.A, sigma)
    if sys.needs_deflation:
        return DeflatedSolver(sys.A, sys.cv_weights)
    return PlainSolver(sys.A)


def extended_rational_arnoldi(
    sys: LtiSystem,
    sigma: float,
    q: int,
    x0: np.ndarray | None = None,
) -> ReducedModel:
    """Extended rational Arnoldi reduction of order q around shift sigma.

    One LU of (A - sigma I) is reused for every subspace solve. Terminates
    early on happy breakdown; ``order_achieved`` reports the realized size.
    """
    if q < 2:
        raise ParameterError("reduction order q must be >= 2")
    if sigma < 0:
        raise ParameterError("shift sigma must be >= 0 (positive for rational mode)")
    x0 = sys.x0 if x0 is None else np.asarray(x0, dtype=float)

    solver = _shift_solver(sys, sigma)
    b = sys.forcing()
    r1 = -solver.solve(b)
    norm_r1 = np.linalg.norm(r1)
    if norm_r1 == 0.0:
        raise DegenerateInputError("all inputs are zero: seed vector b_sigma vanishes")

    basis = [r1 / norm_r1]
    h_coeffs = []  # per added vector: (coeffs against previous, beta)

    if sigma != 0.0:
        r2 = solver.solve(basis[0] - x0)
    else:
        r2 = solver.solve(basis[0])
    coeffs, beta, r2, happy = mgs_orthogonalize(basis, r2)
    if not happy:
        basis.append(r2 / beta)
        h_coeffs.append((coeffs, beta))

    if not happy:
        for _ in range(3, q + 1):
            w = solver.solve(basis[-1])
            coeffs, beta, w, happy = mgs_orthogonalize(basis, w)
            if happy:
                break
            basis.append(w / beta)
            h_coeffs.append((coeffs, beta))

    k = len(basis)
    V = np.column_stack(basis)

    H = np.zeros((k, k))
    for j, (coeffs, beta) in enumerate(h_coeffs):
        H[: len(coeffs), j] = coeffs
        if j + 1 < k:
            H[j + 1, j] = beta

    A_h = V.T @ (sys.A @ V)
    B_h = V.T @ sys.B.toarray() if hasattr(sys.B, "toarray") else V.T @ sys.B
    x0_h = V.T @ x0
    return ReducedModel(V=V, A_h=A_h, B_h=B_h, x0_h=x0_h, shift=sigma,
                        order_requested=q, order_achieved=k, H=H)


class ExtSolution:
    """Reduced-space transient with optional uniform substepping.

    When substeps > 1 the backward-Euler recursion runs on the internal step
    h/substeps; output samples are advanced one output interval at a time via
    the precomputed substep propagator, which is algebraically identical to
    stepping every internal point. ``substep_window`` replays the internal
    states inside one output interval for detection refinement.
    """

    solver_tag = "ext-rakrylov"

    def __init__(self, model, trajectory, xhat, h_int, substeps, prop, affine):
        self.model = model
        self.trajectory = trajectory
        self.xhat = xhat              # k x T reduced states on the output grid
        self._h_int = h_int
        self._substeps = substeps
        self._prop = prop             # single-substep propagator (I - h_int A_h)^{-1}
        self._affine = affine         # per-substep affine increment
    def substep_window(self, index: int):
        """Internal times and reduced states across output interval [index, index+1]."""
        times = self.trajectory.times
        if not 0 <= index < len(times) - 1:
            raise ParameterError("window index out of range")
        s = self._substeps
        if s == 1:
            t_fine = times[index:index + 2]
            return t_fine, self.xhat[:, index:index + 2].T.copy()
        t_fine = times[index] + self._h_int * np.arange(s + 1)
        xh = np.empty((s + 1, self.model.k))
        xh[0] = self.xhat[:, index]
        for i in range(s):
            xh[i + 1] = self._prop @ xh[i] + self._affine
        return t_fine, xh

    def node_series_fine(self, rows: np.ndarray):
        """Recover selected grid rows on the full internal grid."""
        times = self.trajectory.times
        s = self._substeps
        Vr = self.model.V[rows, :]
        n_out = len(times) - 1
        t_fine = np.empty(n_out * s + 1)
        series = np.empty((n_out * s + 1, len(rows)))
        t_fine[0] = times[0]
        series[0] = Vr @ self.xhat[:, 0]
        pos = 1
        for j in range(n_out):
            tf, xh = self.substep_window(j)
            block = xh[1:] @ Vr.T
            series[pos:pos + s] = block
            t_fine[pos:pos + s] = tf[1:]
            pos += s
        return t_fine, series

    def state_at(self, t: float) -> np.ndarray:
        """Full-space state at arbitrary t by substep replay + linear interpolation."""
        times = self.trajectory.times
        if not times[0] <= t <= times[-1]:
            raise ParameterError(f"t={t:g} outside the solved interval")
        j = min(int(np.searchsorted(times, t, side="right")) - 1, len(times) - 2)
        t_fine, xh = self.substep_window(j)
        i = min(int(np.searchsorted(t_fine, t, side="right")) - 1, len(t_fine) - 2)
        t0, t1 = t_fine[i], t_fine[i + 1]
        frac = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        xhat_t = (1.0 - frac) * xh[i] + frac * xh[i + 1]
        return self.model.V @ xhat_t


def reduced_transient(
    model: ReducedModel,
    sys: LtiSystem,
    time_grid,
    substeps: int = 1,
) -> StressTrajectory:
    """Backward Euler on the reduced system, then recovery x(t) = V xhat(t)."""
    return solve_ext_phase(model, sys, time_grid, substeps).trajectory


def solve_ext_phase(
    model: ReducedModel,
    sys: LtiSystem,
    time_grid,
    substeps: int = 1,
) -> ExtSolution:
    grid = _validate_grid(time_grid)
    if substeps < 1:
        raise ParameterError("substeps must be >= 1")
    steps_h = np.diff(grid)
    uniform = np.allclose(steps_h, steps_h[0], rtol=1e-12, atol=0.0)
    if substeps > 1 and not uniform:
        raise ParameterError("substepping requires a uniform time grid")

    k = model.k
    c = model.B_h @ sys.u
    xhat = np.empty((k, len(grid)))
    xhat[:, 0] = model.x0_h

    if uniform:
        h_int = steps_h[0] / substeps
        M = np.eye(k) - h_int * model.A_h
        try:
            prop = np.linalg.inv(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"(I - h A_h) singular: {exc}") from exc
        affine = h_int * (prop @ c)
        # propagator across one output interval: prop^substeps plus summed affine
        prop_out = np.linalg.matrix_power(prop, substeps)
        affine_out = affine.copy()
        for _ in range(substeps - 1):
            affine_out = prop @ affine_out + affine
        for j in range(1, len(grid)):
            xhat[:, j] = prop_out @ xhat[:, j - 1] + affine_out
    else:
        h_int = steps_h[0]
        prop = None
        affine = None
        lu = None
        h_cur = None
        x = model.x0_h.copy()
        eye = np.eye(k)
        for j in range(1, len(grid)):
            h = steps_h[j - 1]
            if lu is None or abs(h - h_cur) > 1e-12 * h_cur:
                lu = sla.lu_factor(eye - h * model.A_h)
                h_cur = h
            x = sla.lu_solve(lu, x + h * c)
            xhat[:, j] = x
        prop = np.linalg.inv(eye - h_int * model.A_h)
        affine = h_int * (prop @ c)

    states = (model.V @ xhat).T
    traj = StressTrajectory(times=grid, states=states, solver_tag="ext-rakrylov")
    return ExtSolution(model, traj, xhat, h_int, substeps if uniform else 1, prop, affine)
