"""Centralized WLS wrapped in the estimator interface."""

from __future__ import annotations

import time

import numpy as np

from ..central import solve_centralized
from ..measurements import evaluate_objective
from ..problem import check_problem
from ..stopping import FreezeLedger, SolverRun
from ._base import DistributedEstimator


class CentralizedEstimator(DistributedEstimator):
    """Single-shot WLS solve of the full normal equations.

    Exposes the same fitted attributes as the distributed estimators, with
    one iteration and no communication, so it can sit in the same tables.
    """

    method = "central"

    def __init__(self):
        pass

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        t0 = time.perf_counter()
        x = solve_centralized(problem.normal_system)
        elapsed = time.perf_counter() - t0
        n = problem.n_states
        owners = [problem.partition.area_of[b] for b in problem.case.bus_of_state]
        self.run_ = SolverRun(
            method=self.method,
            mode="wosc",
            n_iter=1,
            status="converged",
            slot_trajectory=x[None, :],
            owner_slots=np.arange(n),
            delta_norms=np.array([np.linalg.norm(x)]),
            scalars_sent=np.zeros(1, dtype=int),
            area_seconds=np.array([[elapsed]]),
            frozen_counts=np.zeros(1, dtype=int),
            ledger=FreezeLedger(owners, np.arange(n)),
            areas=("central",),
            x0=np.zeros(n),
        )
        self.state_ = x
        self.n_iter_ = 1
        self.ledger_ = self.run_.ledger
        self.objective_ = evaluate_objective(x, problem.measurements, problem.H)
        return self
