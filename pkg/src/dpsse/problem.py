"""The estimation problem bundle handed to every estimator, plus input checks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .central import NormalSystem, build_normal_system
from .exceptions import DimensionMismatch, SingularSystem, ValidationError
from .measurements import MeasurementSet, build_H, check_observability
from .network import AreaPartition, NetworkCase, make_partition, validate_case


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    """A validated network, its area partition and a measurement set."""

    case: NetworkCase
    partition: AreaPartition
    measurements: MeasurementSet
    truth: np.ndarray | None = None

    @cached_property
    def H(self) -> np.ndarray:
        return build_H(self.case, self.measurements)

    @property
    def z(self) -> np.ndarray:
        return self.measurements.z

    @property
    def sigma(self) -> np.ndarray:
        return self.measurements.sigma

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.measurements.sigma**2

    @property
    def R(self) -> np.ndarray:
        return self.measurements.R

    @cached_property
    def normal_system(self) -> NormalSystem:
        return build_normal_system(self.H, self.weights**-1, self.z)

    @property
    def n_states(self) -> int:
        return self.case.n_states

    def with_measurements(self, ms: MeasurementSet) -> "EstimationProblem":
        return EstimationProblem(self.case, self.partition, ms, self.truth)


def make_problem(case, measurements, partition=None, truth=None) -> EstimationProblem:
    """Validate the pieces and bundle them.

    ``partition`` may be an :class:`AreaPartition`, a mapping of original
    bus id to area, or ``None`` for a single area.
    """
    case = validate_case(case)
    if not isinstance(partition, AreaPartition):
        partition = make_partition(case, partition)
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape != (case.n_states,):
            raise DimensionMismatch(f"truth has shape {truth.shape}, expected ({case.n_states},)")
    return EstimationProblem(case, partition, measurements, truth)


def check_problem(problem, require_observable: bool = True) -> EstimationProblem:
    """Input validation used by every estimator's ``fit``."""
    if not isinstance(problem, EstimationProblem):
        raise TypeError(f"expected an EstimationProblem, got {type(problem).__name__}")
    if len(problem.partition.area_of) != problem.case.n_buses:
        raise ValidationError("partition does not match the case")
    if require_observable:
        report = check_observability(problem.H, problem.weights**-1)
        if not report.observable:
            raise SingularSystem(
                f"measurement set is unobservable (rank {report.rank} < {report.n_states})"
            )
    return problem


def check_state(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatch(f"state vector has shape {x.shape}, expected ({n},)")
    return x
