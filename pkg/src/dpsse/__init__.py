"""Distributed DC power-system state estimation with a per-state stopping criterion."""

from .central import NormalSystem, build_normal_system, solve_centralized
from .harness import ExperimentPlan, emit_trace, run_experiments
from .io import import_matpower, load_case
from .measurements import Measurement, MeasurementSet, NoiseSpec, build_H, build_R, evaluate_objective
from .metrics import RunSummary, eps1, eps2, overall_time
from .network import AreaPartition, Branch, Bus, NetworkCase, make_partition, validate_case
from .problem import EstimationProblem, make_problem
from .solvers import (
    AdmmEstimator, CentralizedEstimator, DecompositionEstimator, GossipEstimator, MatrixSplittingEstimator,
)
from .stopping import StoppingConfig, run_with_stopping

__version__ = "0.1.0"

__all__ = [
    "AdmmEstimator", "AreaPartition", "Branch", "Bus", "CentralizedEstimator", "DecompositionEstimator",
    "EstimationProblem", "ExperimentPlan", "GossipEstimator", "MatrixSplittingEstimator", "Measurement",
    "MeasurementSet", "NetworkCase", "NoiseSpec", "NormalSystem", "RunSummary", "StoppingConfig",
    "build_H", "build_R", "build_normal_system", "emit_trace", "eps1", "eps2", "evaluate_objective",
    "import_matpower", "load_case", "make_partition", "make_problem", "overall_time", "run_experiments",
    "run_with_stopping", "solve_centralized", "validate_case",
]
