"""Shared estimator machinery for the distributed solvers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..measurements import evaluate_objective
from ..network import local_states, neighbors, shared_state_map
from ..problem import EstimationProblem, check_problem
from ..stopping import StoppingConfig, run_with_stopping


class DistributedEstimator(BaseEstimator):
    """Common ``fit``/``predict``/``score`` for estimators driven by the
    stopping controller. Subclasses implement ``_make_process``.

    After ``fit``: ``state_`` (reduced angle vector), ``run_``
    (:class:`~dpsse.stopping.SolverRun`), ``n_iter_``, ``ledger_``.
    """

    method = ""

    def _stopping_config(self) -> StoppingConfig:
        return StoppingConfig(
            epsilon=self.epsilon,
            mode=self.stopping,
            max_iter=self.max_iter,
            freeze_epsilon=self.freeze_epsilon,
        )

    def fit(self, problem: EstimationProblem, y=None):
        problem = check_problem(problem)
        config = self._stopping_config()
        process = self._make_process(problem)
        self.run_ = run_with_stopping(process, config, self.method)
        self.run_.info.update(getattr(process, "info", {}))
        self.process_ = process
        self.state_ = self.run_.estimate
        self.n_iter_ = self.run_.n_iter
        self.ledger_ = self.run_.ledger
        return self

    def predict(self, X):
        """Estimated measurement values ``H @ state_``.

        ``X`` is an :class:`EstimationProblem` or a measurement matrix.
        """
        check_is_fitted(self, "state_")
        H = X.H if isinstance(X, EstimationProblem) else np.asarray(X, dtype=float)
        return H @ self.state_

    def score(self, problem: EstimationProblem, y=None) -> float:
        """Negative WLS objective at the fitted state (higher is better)."""
        check_is_fitted(self, "state_")
        return -evaluate_objective(self.state_, problem.measurements, problem.H)


class AreaCopies:
    """Slot layout where every area holds its own states plus copies of all
    tie-line endpoints (used by decomposition and ADMM)."""

    def __init__(self, problem: EstimationProblem):
        case, part = problem.case, problem.partition
        self.areas = part.areas
        self.local = {a: local_states(part, case, a) for a in self.areas}
        self.slot_area, self.slot_state = [], []
        self.slot_of: dict[tuple, int] = {}
        for a in self.areas:
            for s in self.local[a]:
                self.slot_of[(a, s)] = len(self.slot_area)
                self.slot_area.append(a)
                self.slot_state.append(s)
        self.slot_state = np.array(self.slot_state, dtype=int)

        owners = [part.area_of[b] for b in case.bus_of_state]
        self.owner_slots = np.array([self.slot_of[(owners[s], s)] for s in range(case.n_states)], dtype=int)

        shared = shared_state_map(part, case)
        self.shared = {pair: states for pair, states in shared.items() if states}
        self.neighbors = {a: sorted(neighbors(part, a), key=self.areas.index) for a in self.areas}

        # measurement rows go to the area holding the metered bus
        self.rows = {a: [] for a in self.areas}
        for r, m in enumerate(problem.measurements):
            self.rows[part.area_of[m.metered_bus]].append(r)

        edges, consumers = [], []
        for (a, b), states in sorted(self.shared.items(), key=lambda kv: (self.areas.index(kv[0][0]), self.areas.index(kv[0][1]))):
            for s in states:
                edges.append(self.slot_of[(a, s)])
                consumers.append(b)
        self.edges = np.array(edges, dtype=int)
        self.edge_consumer = consumers

    def local_H(self, problem, a):
        rows = self.rows[a]
        H = problem.H[np.ix_(rows, self.local[a])] if rows else np.zeros((0, len(self.local[a])))
        # measurement rows must stay within the area's held states
        full = problem.H[rows]
        outside = np.setdiff1d(np.arange(problem.n_states), self.local[a])
        if rows and np.any(full[:, outside] != 0):
            from ..exceptions import UnassignableMeasurement

            raise UnassignableMeasurement(f"area {a!r} holds a measurement touching states it does not hold")
        return H, problem.z[rows], problem.weights[rows]
