"""Two-phase electromigration simulation: shift estimation, nucleation
detection, phase switching, void growth and resistance change."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .discretize import (LtiSystem, assemble_nucleation, assemble_postvoid,
                         diffusivity)
from .eikrylov import EiSolution, ei_transient
from .errors import ConfigurationError
from .expm import small_matrix_exp
from .extkrylov import ExtSolution, extended_rational_arnoldi, solve_ext_phase
from .fdm import StressTrajectory, solve_fdm_phase
from .tree import InterconnectTree, MaterialParams, Segment, tree_stats

SOLVER_FDM = "fdm"
SOLVER_EXT = "ext"
SOLVER_EI = "ei"
SOLVERS = (SOLVER_FDM, SOLVER_EXT, SOLVER_EI)


@dataclass(frozen=True)
class ShiftTimes:
    """Shift-time bases tau = L^2 / (pi^2 kappa) and their scale factors.

    The nucleation base uses the mean segment length, the post-void base the
    longest node-to-node path; both use the tree-mean diffusivity.
    """

    tau_nuc: float
    tau_post: float
    eta_nuc: float = 1.0
    eta_post: float = 1.0
    kappa_mean: float = 0.0

    @property
    def t_shift_nuc(self) -> float:
        return self.eta_nuc * self.tau_nuc

    @property
    def t_shift_post(self) -> float:
        return self.eta_post * self.tau_post

    @property
    def sigma_nuc(self) -> float:
        return 1.0 / self.t_shift_nuc

    @property
    def sigma_post(self) -> float:
        return 1.0 / self.t_shift_post


def estimate_shift_times(tree: InterconnectTree, eta_nuc: float = 1.0,
                         eta_post: float = 1.0) -> ShiftTimes:
    stats = tree_stats(tree)
    kappa_mean = float(np.mean([diffusivity(s, tree.materials) for s in tree.segments]))
    tau_nuc = stats.l_avg ** 2 / (math.pi ** 2 * kappa_mean)
    tau_post = stats.l_max ** 2 / (math.pi ** 2 * kappa_mean)
    return ShiftTimes(tau_nuc=tau_nuc, tau_post=tau_post,
                      eta_nuc=eta_nuc, eta_post=eta_post, kappa_mean=kappa_mean)


# ---------------------------------------------------------------------------
# Nucleation detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NucleationEvent:
    t_nuc: float
    node: int          # grid index of the nucleation point
    cross_index: int   # first trajectory index with max stress >= threshold


def detect_nucleation(traj: StressTrajectory, sigma_crit: float) -> NucleationEvent | None:
    """First grid time where the peak stress reaches sigma_crit.

    The crossing time is refined by linear interpolation of the crossing
    node's stress between the bracketing grid times; ties in the argmax go to
    the lowest grid index. Returns None when the threshold is never reached.
    """
    if len(traj.times) == 0:
        return None
    maxima = traj.states.max(axis=1)
    crossed = np.nonzero(maxima >= sigma_crit)[0]
    if len(crossed) == 0:
        return None
    k = int(crossed[0])
    node = int(np.argmax(traj.states[k]))
    if k == 0:
        return NucleationEvent(t_nuc=float(traj.times[0]), node=node, cross_index=0)
    s0 = traj.states[k - 1, node]
    s1 = traj.states[k, node]
    t0, t1 = traj.times[k - 1], traj.times[k]
    t_nuc = t0 + (sigma_crit - s0) / (s1 - s0) * (t1 - t0)
    return NucleationEvent(t_nuc=float(t_nuc), node=node, cross_index=k)


def _refine_event_ei(sol: EiSolution, sys: LtiSystem, coarse: NucleationEvent,
                     sigma_crit: float, subdivisions: int = 64) -> NucleationEvent:
    """Sharpen the crossing by direct closed-form evaluation inside the
    bracketing interval.

    Only tree-node rows are scanned: the interior rows carry an unforced
    diffusion stencil, so by the discrete maximum principle the spatial peak
    sits at a segment endpoint.
    """
    if coarse.cross_index == 0 or sol.basis.k == 0:
        return coarse
    times = sol.trajectory.times
    t_lo = float(times[coarse.cross_index - 1])
    t_hi = float(times[coarse.cross_index])
    rows = np.arange(sys.grid.n_tree_nodes)
    Vr = sol.basis.beta * sol.basis.V[rows, :]
    f_r = sol.f[rows]

    dt = (t_hi - t_lo) / subdivisions
    prop = small_matrix_exp(sol.H_hat, dt)
    z = sol.z_at(t_lo) if t_lo > 0.0 else np.eye(sol.basis.k)[:, 0]
    t_prev = t_lo
    for _ in range(subdivisions):
        z = prop @ z
        t_cur = t_prev + dt
        vals = Vr @ z - f_r
        if vals.max() >= sigma_crit:
            node_local = int(np.argmax(vals))
            node = int(rows[node_local])

            def g(t, _row=np.array([node])):
                return float(sol.rows_at(_row, t)[0]) - sigma_crit

            if g(t_prev) >= 0.0:
                t_nuc = t_prev
            else:
                t_nuc = brentq(g, t_prev, t_cur, xtol=1e-9 * max(t_cur, 1.0), rtol=1e-13)
            return NucleationEvent(t_nuc=float(t_nuc), node=node,
                                   cross_index=coarse.cross_index)
        t_prev = t_cur
    return coarse


def _refine_event_ext(sol: ExtSolution, sys: LtiSystem, coarse: NucleationEvent,
                      sigma_crit: float) -> NucleationEvent:
    """First crossing on the internal substep grid (tree-node rows only)."""
    if sol._substeps == 1 or coarse.cross_index == 0:
        return coarse
    rows = np.arange(sys.grid.n_tree_nodes)
    Vr = sol.model.V[rows, :]
    times = sol.trajectory.times
    prev_vals = Vr @ sol.xhat[:, 0]
    t_prev = times[0]
    for j in range(len(times) - 1):
        t_fine, xh = sol.substep_window(j)
        series = xh[1:] @ Vr.T
        for i in range(series.shape[0]):
            vals = series[i]
            t_cur = t_fine[i + 1]
            if vals.max() >= sigma_crit:
                node_local = int(np.argmax(vals))
                s0, s1 = prev_vals[node_local], vals[node_local]
                if s1 > s0:
                    t_nuc = t_prev + (sigma_crit - s0) / (s1 - s0) * (t_cur - t_prev)
                else:
                    t_nuc = t_cur
                return NucleationEvent(t_nuc=float(min(max(t_nuc, t_prev), t_cur)),
                                       node=int(rows[node_local]),
                                       cross_index=coarse.cross_index)
            prev_vals = vals
            t_prev = t_cur
    return coarse


# ---------------------------------------------------------------------------
# Void volume and resistance change
# ---------------------------------------------------------------------------

def void_volume(state: np.ndarray, sys: LtiSystem, tree: InterconnectTree) -> float:
    """V_v = -integral(sigma / B) over the remaining wire, in discrete form
    -(sum_i sigma_i * W_i H_i dx_i) / B. May be negative early on."""
    return float(-(sys.cell_volumes @ np.asarray(state)) / tree.materials.bulk_modulus)


def void_volume_by_segment(state: np.ndarray, sys: LtiSystem,
                           tree: InterconnectTree) -> dict[int, float]:
    """Per-segment breakdown of the void-volume integral (node half-cells are
    attributed to each incident segment)."""
    state = np.asarray(state)
    inv_b = 1.0 / tree.materials.bulk_modulus
    out = {}
    for seg in tree.segments:
        rows = sys.grid.segment_rows[seg.id]
        dx = sys.grid.dx[seg.id]
        area = seg.cross_section
        weights = np.full(len(rows), dx * area)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        out[seg.id] = float(-(weights @ state[rows]) * inv_b)
    return out


def critical_void_volume(segment: Segment, mat: MaterialParams) -> float:
    """V_crit: explicit material override, else W^2 * H of the voided segment."""
    if mat.critical_void_volume is not None:
        return mat.critical_void_volume
    return segment.width ** 2 * segment.height


def _barrier_bracket(segment: Segment, mat: MaterialParams) -> float:
    bracket = (mat.resistivity_ta / (mat.barrier_thickness
                                     * (2.0 * segment.height + segment.width))
               - mat.resistivity_cu / (segment.height * segment.width))
    if bracket <= 0.0:
        warnings.warn(
            f"barrier resistance bracket is nonpositive ({bracket:g}) for segment "
            f"{segment.id}; resistance change will not increase",
            stacklevel=3,
        )
    return bracket


def resistance_change(v_v: float, segment: Segment, mat: MaterialParams) -> float:
    """Resistance increase of the voided segment once V_v exceeds V_crit."""
    v_crit = critical_void_volume(segment, mat)
    if v_v <= v_crit:
        return 0.0
    bracket = _barrier_bracket(segment, mat)
    return (v_v - v_crit) / (segment.width * segment.height) * bracket


# ---------------------------------------------------------------------------
# Two-phase simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Run configuration for a two-phase simulation."""

    q: int = 5
    eta_nuc: float = 1.0
    eta_post: float = 1.0
    points_per_segment: int = 11
    steps_nuc: int = 100
    steps_post: int = 100
    horizon_nuc: float | None = None        # default: horizon_mult * tau_nuc
    horizon_post: float | None = None       # default: horizon_mult * tau_post
    horizon_nuc_mult: float = 20.0
    horizon_post_mult: float = 20.0
    sigma_crit: float | None = None         # default: materials.critical_stress
    fastem: bool = False                    # sigma = 0 extended-Krylov mode (ext only)
    fastem_order: int = 50
    ext_substeps: int = 1
    refine: bool = True

    def __post_init__(self):
        if self.steps_nuc < 2 or self.steps_post < 2:
            raise ConfigurationError("steps per phase must be >= 2")
        if self.q < 2:
            raise ConfigurationError("reduction order q must be >= 2")


@dataclass
class SimulationResult:
    """Everything a two-phase run produces. Immutable by convention.

    ``trajectory_post`` and the void/resistance series use absolute times
    (nucleation instant + post-void elapsed time).
    """

    solver: str
    config: SimConfig
    shift_times: ShiftTimes
    sigma_crit: float
    t_nuc: float | None
    nucleation_node: int | None
    trajectory_nuc: StressTrajectory
    trajectory_post: StressTrajectory | None
    delta_r_times: np.ndarray
    delta_r: np.ndarray
    void_volume_series: np.ndarray
    voided_segment: int | None
    timings: dict = field(default_factory=dict)

    @property
    def nucleated(self) -> bool:
        return self.t_nuc is not None

    @property
    def delta_r_final(self) -> float:
        return float(self.delta_r[-1]) if len(self.delta_r) else 0.0


@dataclass(frozen=True)
class ReferenceMetrics:
    """Fine-time-grid backward-Euler reference values for error metrics."""

    t_nuc: float
    node: int
    delta_r_final: float
    void_volume_final: float
    steps: int


def fdm_reference_run(tree: InterconnectTree, config: SimConfig | None = None,
                      ref_steps: int = 8000) -> ReferenceMetrics:
    """Memory-lean fine-grid FDM run producing the reference metrics.

    Uses the same horizons and spatial grid as ``config`` but ``ref_steps``
    uniform steps per phase, streaming the backward-Euler states instead of
    storing the trajectories. The nucleation phase stops at the threshold
    crossing.
    """
    from .fdm import backward_euler_scan

    cfg = config or SimConfig()
    mat = tree.materials
    sigma_crit = cfg.sigma_crit if cfg.sigma_crit is not None else mat.critical_stress
    shift = estimate_shift_times(tree, cfg.eta_nuc, cfg.eta_post)
    sys_nuc = assemble_nucleation(tree, cfg.points_per_segment)

    horizon_nuc = cfg.horizon_nuc if cfg.horizon_nuc else cfg.horizon_nuc_mult * shift.tau_nuc
    grid_nuc = np.linspace(0.0, horizon_nuc, ref_steps + 1)
    t_nuc, node, state, _ = backward_euler_scan(sys_nuc, grid_nuc, sigma_crit)
    if t_nuc is None:
        raise ConfigurationError(
            "reference FDM run did not nucleate; raise the horizon or lower sigma_crit"
        )

    sys_post = assemble_postvoid(sys_nuc, node, mat, state)
    horizon_post = cfg.horizon_post if cfg.horizon_post else cfg.horizon_post_mult * shift.tau_post
    grid_post = np.linspace(0.0, horizon_post, ref_steps + 1)
    _, _, _, final_state = backward_euler_scan(sys_post, grid_post, None)

    v_v = void_volume(final_state, sys_post, tree)
    segment = tree.segments[voided_segment_of(sys_post, tree, node)]
    delta_r = resistance_change(v_v, segment, mat)
    return ReferenceMetrics(t_nuc=float(t_nuc), node=int(node),
                            delta_r_final=float(delta_r),
                            void_volume_final=float(v_v), steps=ref_steps)


def _solve_phase(solver: str, sys: LtiSystem, grid: np.ndarray, sigma: float,
                 cfg: SimConfig):
    if solver == SOLVER_FDM:
        return solve_fdm_phase(sys, grid)
    if solver == SOLVER_EXT:
        if cfg.fastem:
            model = extended_rational_arnoldi(sys, 0.0, cfg.fastem_order, x0=sys.x0)
        else:
            model = extended_rational_arnoldi(sys, sigma, cfg.q, x0=sys.x0)
        return solve_ext_phase(model, sys, grid, substeps=cfg.ext_substeps)
    if solver == SOLVER_EI:
        return ei_transient(sys, grid, cfg.q, sigma)
    raise ConfigurationError(f"unknown solver {solver!r}; expected one of {SOLVERS}")


def _refine(solver: str, sol, sys: LtiSystem, ev: NucleationEvent,
            sigma_crit: float) -> NucleationEvent:
    if solver == SOLVER_EI:
        return _refine_event_ei(sol, sys, ev, sigma_crit)
    if solver == SOLVER_EXT:
        return _refine_event_ext(sol, sys, ev, sigma_crit)
    return ev


def voided_segment_of(sys: LtiSystem, tree: InterconnectTree, node: int) -> int:
    """Segment owning the void grid point (lowest id for junction ties)."""
    candidates = sys.grid.segments_at_row(node, tree)
    return min(candidates)


def simulate_two_phase(tree: InterconnectTree, solver: str = SOLVER_FDM,
                       config: SimConfig | None = None) -> SimulationResult:
    """Run nucleation and, if a void forms, the post-void phase.

    The nucleation phase integrates from zero stress until the horizon; on
    detection the system is reassembled with the void boundary condition at
    the nucleation node, seeded with the stress state at t_nuc, and the
    post-void phase is run on its own grid. Resistance change is gated by the
    critical void volume of the voided segment.
    """
    cfg = config or SimConfig()
    if solver not in SOLVERS:
        raise ConfigurationError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    mat = tree.materials
    sigma_crit = cfg.sigma_crit if cfg.sigma_crit is not None else mat.critical_stress

    shift = estimate_shift_times(tree, cfg.eta_nuc, cfg.eta_post)

    t_start = time.perf_counter()
    sys_nuc = assemble_nucleation(tree, cfg.points_per_segment)
    assembly_s = time.perf_counter() - t_start

    horizon_nuc = cfg.horizon_nuc if cfg.horizon_nuc else cfg.horizon_nuc_mult * shift.tau_nuc
    grid_nuc = np.linspace(0.0, horizon_nuc, cfg.steps_nuc + 1)

    t0 = time.perf_counter()
    sol_nuc = _solve_phase(solver, sys_nuc, grid_nuc, shift.sigma_nuc, cfg)
    event = detect_nucleation(sol_nuc.trajectory, sigma_crit)
    if event is not None and cfg.refine:
        event = _refine(solver, sol_nuc, sys_nuc, event, sigma_crit)
    wall_nuc = time.perf_counter() - t0

    timings = {"assembly_s": assembly_s, "nucleation_s": wall_nuc,
               "postvoid_s": 0.0}

    if event is None:
        timings["total_s"] = wall_nuc
        return SimulationResult(
            solver=solver, config=cfg, shift_times=shift, sigma_crit=sigma_crit,
            t_nuc=None, nucleation_node=None,
            trajectory_nuc=sol_nuc.trajectory, trajectory_post=None,
            delta_r_times=grid_nuc.copy(), delta_r=np.zeros(len(grid_nuc)),
            void_volume_series=np.zeros(len(grid_nuc)), voided_segment=None,
            timings=timings,
        )

    x_void = sol_nuc.state_at(event.t_nuc)
    t0 = time.perf_counter()
    sys_post = assemble_postvoid(sys_nuc, event.node, mat, x_void)
    timings["assembly_s"] += time.perf_counter() - t0
    horizon_post = cfg.horizon_post if cfg.horizon_post else cfg.horizon_post_mult * shift.tau_post
    grid_post = np.linspace(0.0, horizon_post, cfg.steps_post + 1)
    t0 = time.perf_counter()
    sol_post = _solve_phase(solver, sys_post, grid_post, shift.sigma_post, cfg)
    wall_post = time.perf_counter() - t0

    seg_id = voided_segment_of(sys_post, tree, event.node)
    segment = tree.segments[seg_id]
    vv = -(sol_post.trajectory.states @ sys_post.cell_volumes) / mat.bulk_modulus
    v_crit = critical_void_volume(segment, mat)
    bracket = _barrier_bracket(segment, mat)
    delta_r = np.where(vv > v_crit,
                       (vv - v_crit) / (segment.width * segment.height) * bracket,
                       0.0)

    timings["postvoid_s"] = wall_post
    timings["total_s"] = wall_nuc + wall_post

    return SimulationResult(
        solver=solver, config=cfg, shift_times=shift, sigma_crit=sigma_crit,
        t_nuc=event.t_nuc, nucleation_node=event.node,
        trajectory_nuc=sol_nuc.trajectory,
        trajectory_post=sol_post.trajectory.shifted(event.t_nuc),
        delta_r_times=grid_post + event.t_nuc, delta_r=delta_r,
        void_volume_series=vv, voided_segment=seg_id,
        timings=timings,
    )
