"""Electromigration stress analysis for interconnect trees.

Three interchangeable transient engines over the same spatially discretized
stress dynamics (backward-Euler finite differences as the reference, extended
rational Krylov reduction in the frequency domain, rational-Krylov exponential
integration in the time domain) plus a coordinate-descent tuner that selects
reduction order and shift times against nucleation-time / resistance-change
metrics.
"""

from .discretize import (LtiSystem, assemble_nucleation, assemble_postvoid,
                         diffusivity, drive_force)
from .eikrylov import (EiSolution, KrylovBasis, ei_transient,
                       rational_krylov_basis, residual_estimate)
from .engine import (NucleationEvent, ShiftTimes, SimConfig, SimulationResult,
                     detect_nucleation, estimate_shift_times, resistance_change,
                     simulate_two_phase, void_volume, void_volume_by_segment)
from .errors import (ConfigurationError, ConservationViolationError,
                     DegenerateInputError, EmKrylovError, NumericalError,
                     ParameterError, SearchFailureError, TreeFormatError,
                     TreeValidationError)
from .expm import small_matrix_exp
from .extkrylov import ReducedModel, extended_rational_arnoldi, reduced_transient
from .fdm import StressTrajectory, backward_euler
from .tree import (InterconnectTree, MaterialParams, ParamRanges, Segment,
                   TreeNode, TreeStats, generate_synthetic_tree, load_tree,
                   parse_tree, save_tree, serialize_tree, tree_stats)
from .tuner import (TunerConfig, TunerResult, compute_reference,
                    coordinate_descent, minimize_coordinate, objective,
                    percentage_error)

__version__ = "0.1.0"

__all__ = [
    "LtiSystem", "assemble_nucleation", "assemble_postvoid", "diffusivity",
    "drive_force", "EiSolution", "KrylovBasis", "ei_transient",
    "rational_krylov_basis", "residual_estimate", "NucleationEvent",
    "ShiftTimes", "SimConfig", "SimulationResult", "detect_nucleation",
    "estimate_shift_times", "resistance_change", "simulate_two_phase",
    "void_volume", "void_volume_by_segment", "ConfigurationError",
    "ConservationViolationError", "DegenerateInputError", "EmKrylovError",
    "NumericalError", "ParameterError", "SearchFailureError", "TreeFormatError",
    "TreeValidationError", "small_matrix_exp", "ReducedModel",
    "extended_rational_arnoldi", "reduced_transient", "StressTrajectory",
    "backward_euler", "InterconnectTree", "MaterialParams", "ParamRanges",
    "Segment", "TreeNode", "TreeStats", "generate_synthetic_tree", "load_tree",
    "parse_tree", "save_tree", "serialize_tree", "tree_stats", "TunerConfig",
    "TunerResult", "compute_reference", "coordinate_descent",
    "minimize_coordinate", "objective", "percentage_error", "__version__",
]
