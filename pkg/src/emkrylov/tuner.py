"""Application-metric parameter selection by coordinate descent.

The search tunes (order q, nucleation shift factor, post-void shift factor)
against the combined percentage error of nucleation time and resistance
change relative to a fine-time-grid backward-Euler reference. One discrete
sweep over the candidate orders and one coarse-to-fine step search per shift
factor run per iteration; a move is accepted only if it strictly improves
the objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from .engine import SimConfig, SimulationResult, simulate_two_phase
from .errors import ConfigurationError, SearchFailureError
from .tree import InterconnectTree

logger = logging.getLogger(__name__)

#: Objective assigned to a candidate that fails to nucleate (percentage points).
NO_NUCLEATION_PENALTY = 1.0e6


def percentage_error(x: float, y: float, eps: float = 1e-30) -> float:
    """PE(x, y) = 100 |x - y| / (|x| + eps)."""
    if eps <= 0:
        raise ConfigurationError("regularizer eps must be > 0")
    return 100.0 * abs(x - y) / (abs(x) + eps)


@dataclass(frozen=True)
class TunerConfig:
    orders: tuple[int, ...] = (3, 4, 5, 6)
    eta_bounds: tuple[float, float] = (0.1, 20.0)
    step_sizes: tuple[float, ...] = (5.0, 1.0, 0.5, 0.1)
    i_max: int = 20
    tau_stop: float = 1e-3
    eps: float = 1e-30
    initial: tuple[int, float, float] = (4, 1.0, 1.0)

    def __post_init__(self):
        if not self.orders:
            raise ConfigurationError("candidate order set must be nonempty")
        lo, hi = self.eta_bounds
        if not lo < hi:
            raise ConfigurationError("eta bounds must satisfy min < max")
        steps = self.step_sizes
        if not steps or any(s <= 0 for s in steps) or list(steps) != sorted(steps, reverse=True):
            raise ConfigurationError("step sizes must be positive and strictly decreasing")


@dataclass
class TunerResult:
    q: int
    eta_nuc: float
    eta_post: float
    j_star: float
    evaluations: int
    cache_hits: int
    iterations: int
    trace: list[float] = field(default_factory=list)  # J after init and each iteration


@dataclass(frozen=True)
class Reference:
    t_nuc: float
    delta_r: float


def compute_reference(tree: InterconnectTree, base: SimConfig,
                      ref_steps: int = 8000) -> Reference:
    """Fine-time-grid backward-Euler reference for the tuner metrics."""
    from .engine import fdm_reference_run

    metrics = fdm_reference_run(tree, base, ref_steps=ref_steps)
    return Reference(t_nuc=metrics.t_nuc, delta_r=metrics.delta_r_final)


def candidate_metrics(tree: InterconnectTree, solver: str, q: int, eta_nuc: float,
                      eta_post: float, base: SimConfig) -> SimulationResult:
    cfg = replace(base, q=q, eta_nuc=eta_nuc, eta_post=eta_post)
    return simulate_two_phase(tree, solver, cfg)


def objective(q: int, eta_nuc: float, eta_post: float, reference: Reference,
              tree: InterconnectTree, solver: str, base: SimConfig,
              eps: float = 1e-30) -> float:
    """J = PE(t_nuc) + PE(delta R); no-nucleation candidates score the penalty."""
    if solver not in ("ext", "ei"):
        raise ConfigurationError("tuner objective expects solver 'ext' or 'ei'")
    result = candidate_metrics(tree, solver, q, eta_nuc, eta_post, base)
    if not result.nucleated:
        return NO_NUCLEATION_PENALTY
    return (percentage_error(reference.t_nuc, result.t_nuc, eps)
            + percentage_error(reference.delta_r, result.delta_r_final, eps))


def _clip(value: float, bounds: tuple[float, float]) -> float:
    return min(max(value, bounds[0]), bounds[1])


def minimize_coordinate(cfg: TunerConfig, fn) -> TunerResult:
    """Coordinate descent over (q, eta_nuc, eta_post) for an arbitrary
    objective callable fn(q, eta_nuc, eta_post) -> float.

    Deterministic for a fixed configuration: sweep order is orders first,
    then eta_nuc, then eta_post; each step search walks the coarse-to-fine
    step list with directions +1, -1 and breaks out of the whole list on the
    first improving move. Evaluations are cached by exact parameter triple.
    """
    cache: dict[tuple, float] = {}
    stats = {"evals": 0, "hits": 0}

    def evaluate(q, en, ep):
        key = (q, en, ep)
        if key in cache:
            stats["hits"] += 1
            return cache[key]
        stats["evals"] += 1
        value = float(fn(q, en, ep))
        cache[key] = value
        return value

    q, eta_nuc, eta_post = cfg.initial
    if q not in cfg.orders:
        raise ConfigurationError(f"initial order {q} not in candidate set {cfg.orders}")
    eta_nuc = _clip(eta_nuc, cfg.eta_bounds)
    eta_post = _clip(eta_post, cfg.eta_bounds)

    j_star = evaluate(q, eta_nuc, eta_post)
    trace = [j_star]
    iterations = 0

    for _ in range(cfg.i_max):
        iterations += 1
        j_prev = j_star

        for q_c in cfg.orders:
            j_c = evaluate(q_c, eta_nuc, eta_post)
            if j_c < j_star:
                q, j_star = q_c, j_c

        for direction_sweep in ("eta_nuc", "eta_post"):
            current = eta_nuc if direction_sweep == "eta_nuc" else eta_post
            for step in cfg.step_sizes:
                moved = False
                for d in (1.0, -1.0):
                    cand = _clip(current + d * step, cfg.eta_bounds)
                    if cand == current:
                        continue
                    if direction_sweep == "eta_nuc":
                        j_c = evaluate(q, cand, eta_post)
                    else:
                        j_c = evaluate(q, eta_nuc, cand)
                    if j_c < j_star:
                        if direction_sweep == "eta_nuc":
                            eta_nuc = cand
                        else:
                            eta_post = cand
                        j_star = j_c
                        moved = True
                        break
                if moved:
                    break

        trace.append(j_star)
        logger.debug("iteration %d: J*=%.6g at (q=%d, eta_nuc=%g, eta_post=%g)",
                     iterations, j_star, q, eta_nuc, eta_post)
        if j_prev - j_star < cfg.tau_stop:
            break

    if j_star >= NO_NUCLEATION_PENALTY:
        raise SearchFailureError(
            "no nucleating configuration found within the search budget"
        )

    return TunerResult(q=q, eta_nuc=eta_nuc, eta_post=eta_post, j_star=j_star,
                       evaluations=stats["evals"], cache_hits=stats["hits"],
                       iterations=iterations, trace=trace)


def coordinate_descent(cfg: TunerConfig, tree: InterconnectTree, solver: str,
                       base: SimConfig | None = None,
                       reference: Reference | None = None,
                       ref_steps: int = 8000) -> TunerResult:
    """Tune (q, eta_nuc, eta_post) for one tree and solver."""
    base = base or SimConfig()
    if reference is None:
        reference = compute_reference(tree, base, ref_steps=ref_steps)

    def fn(q, en, ep):
        return objective(q, en, ep, reference, tree, solver, base, eps=cfg.eps)

    return minimize_coordinate(cfg, fn)
