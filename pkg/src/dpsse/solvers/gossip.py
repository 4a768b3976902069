"""Randomized gossip gradient iteration ``x <- (I - tau L) x + tau u``.

Each round one adjacent pair of areas, drawn uniformly from a seeded
stream, advances the states it owns; every other state stays put.
"""

from __future__ import annotations

import time

import numpy as np

from ..exceptions import NonAdjacentPair, ValidationError
from ..network import owner_of_state
from ..stopping import StepResult
from ._base import DistributedEstimator
from .matrix_splitting import coupling_edges


def tau_upper_bound(L) -> float:
    """``2 / ||L||_2`` for symmetric positive definite ``L``."""
    L = np.asarray(L, dtype=float)
    return 2.0 / float(np.linalg.eigvalsh(L)[-1])


def adjacent_pairs(partition) -> list[tuple]:
    order = list(partition.areas)
    pairs = set()
    for a in order:
        for b in partition.neighbor_sets[a]:
            pairs.add(tuple(sorted((a, b), key=order.index)))
    return sorted(pairs, key=lambda p: (order.index(p[0]), order.index(p[1])))


def gossip_round(x_t, L, u, tau, active_pair, partition, owners, frozen=None) -> np.ndarray:
    """One round with the areas in ``active_pair`` updating their states.

    ``owners[i]`` is the area owning state ``i``. ``active_pair=None``
    updates every area (the synchronous degenerate mode); a single-area
    partition accepts ``(a, a)``.
    """
    x_t = np.asarray(x_t, dtype=float)
    if active_pair is None:
        idx = np.arange(x_t.size)
    else:
        a, b = active_pair
        lone = a == b and partition.n_areas == 1 and a in partition.areas
        if not lone and b not in partition.neighbor_sets.get(a, ()):
            raise NonAdjacentPair(f"areas {a!r} and {b!r} are not adjacent")
        owners = np.asarray(owners, dtype=object)
        idx = np.flatnonzero((owners == a) | (owners == b))
    if frozen is not None:
        idx = idx[~np.asarray(frozen, dtype=bool)[idx]]
    x_new = x_t.copy()
    x_new[idx] = x_t[idx] - tau * (L[idx] @ x_t - u[idx])
    return x_new


class _GossipProcess:
    def __init__(self, problem, tau, seed, schedule):
        part = problem.partition
        self.areas = part.areas
        self.slot_area = owner_of_state(part, problem.case)
        self.slot_state = np.arange(problem.n_states)
        self.owner_slots = np.arange(problem.n_states)
        self.L = problem.normal_system.L
        self.u = problem.normal_system.u
        self.tau = tau
        self.x = np.zeros(problem.n_states)
        self.pairs = adjacent_pairs(part)
        self.synchronous = schedule == "synchronous" or not self.pairs
        self.rng = np.random.default_rng(seed)

        off = self.L - np.diag(np.diag(self.L))
        self.edges, self.edge_producer, self.edge_consumer = coupling_edges(off, self.slot_area, self.areas)
        owner = np.array([self.areas.index(a) for a in self.slot_area], dtype=int)
        self.area_idx = [np.flatnonzero(owner == k) for k in range(len(self.areas))]
        self.schedule = []
        self.pair_live = {
            pair: np.array([p in pair and c in pair for p, c in zip(self.edge_producer, self.edge_consumer)],
                           dtype=bool)
            for pair in self.pairs
        }

    def values(self):
        return self.x

    def step(self, frozen):
        if self.synchronous:
            active = list(range(len(self.areas)))
            live = None
        else:
            a, b = self.pairs[self.rng.integers(len(self.pairs))]
            self.schedule.append((a, b))
            active = [self.areas.index(a), self.areas.index(b)]
            live = self.pair_live[(a, b)]

        x_old = self.x
        x_new = x_old.copy()
        updated = np.zeros(x_old.size, dtype=bool)
        seconds = np.zeros(len(self.areas))
        for k in active:
            t0 = time.perf_counter()
            idx = self.area_idx[k]
            idx = idx[~frozen[idx]]
            x_new[idx] = x_old[idx] - self.tau * (self.L[idx] @ x_old - self.u[idx])
            updated[idx] = True
            seconds[k] = time.perf_counter() - t0
        self.x = x_new
        return StepResult(seconds, updated=updated, active_edges=live)


class GossipEstimator(DistributedEstimator):
    """Randomized pairwise gossip state estimator.

    Parameters
    ----------
    tau : float or None
        Step size. ``None`` uses ``tau_fraction * tau_upper_bound(L)``.
    tau_fraction : float
        Fraction of the stability bound used when ``tau`` is unset.
    seed : int
        Seed of the pair-activation stream.
    schedule : {"pairs", "synchronous"}
        One random adjacent pair per round, or every area every round.
    allow_unstable : bool
        Accept a step size outside ``(0, 2/||L||)``; the divergence guard
        then stops the run.
    """

    method = "gossip"

    def __init__(self, tau=None, tau_fraction=0.5, seed=42, schedule="pairs", allow_unstable=False,
                 epsilon=1e-6, stopping="wosc", max_iter=20000, freeze_epsilon=None):
        self.tau = tau
        self.tau_fraction = tau_fraction
        self.seed = seed
        self.schedule = schedule
        self.allow_unstable = allow_unstable
        self.epsilon = epsilon
        self.stopping = stopping
        self.max_iter = max_iter
        self.freeze_epsilon = freeze_epsilon

    def _make_process(self, problem):
        if self.schedule not in ("pairs", "synchronous"):
            raise ValidationError(f"unknown schedule {self.schedule!r}")
        self.tau_bound_ = tau_upper_bound(problem.normal_system.L)
        tau = self.tau_fraction * self.tau_bound_ if self.tau is None else float(self.tau)
        if not (0 < tau < self.tau_bound_) and not self.allow_unstable:
            raise ValidationError(f"tau = {tau:.6g} outside the stable interval (0, {self.tau_bound_:.6g})")
        self.tau_ = tau
        proc = _GossipProcess(problem, tau, self.seed, self.schedule)
        proc.info = {"tau": tau, "tau_bound": self.tau_bound_}
        return proc
