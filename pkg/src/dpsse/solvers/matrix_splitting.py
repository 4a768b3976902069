"""Distributed fixed-point iteration on the normal equations.

The gain matrix is split as ``A = M - N`` with ``M`` diagonal, and every
area advances its own states with ``x <- M^-1 (N x + u)``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionMismatch, NonSymmetricInput, NotConvergent
from ..network import owner_of_state
from ..stopping import StepResult
from ._base import DistributedEstimator


@dataclass(frozen=True)
class SplitOperators:
    D: np.ndarray
    E: np.ndarray
    Eprime: np.ndarray
    M: np.ndarray
    N: np.ndarray
    alpha: float

    @property
    def m_diag(self) -> np.ndarray:
        return np.diag(self.M).copy()


def build_split(A, alpha: float = 1.0) -> SplitOperators:
    """Diagonal split with ``Eprime_ii = alpha * sum_j |E_ij|``.

    ``M = D + Eprime`` and ``N = Eprime - E`` so that ``M - N = A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if not np.array_equal(A, A.T):
        raise NonSymmetricInput("A must be exactly symmetric")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    D = np.diag(np.diag(A))
    E = A - D
    Eprime = np.diag(alpha * np.abs(E).sum(axis=1))
    return SplitOperators(D, E, Eprime, D + Eprime, Eprime - E, float(alpha))


def spectral_radius(ops: SplitOperators) -> float:
    """``rho(M^-1 N)``, via the symmetric similar matrix ``M^-1/2 N M^-1/2``."""
    if not np.any(ops.N):
        return 0.0
    s = 1.0 / np.sqrt(ops.m_diag)
    return float(np.max(np.abs(np.linalg.eigvalsh(s[:, None] * ops.N * s[None, :]))))


def step(ops: SplitOperators, x_t, u) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=float)
    u = np.asarray(u, dtype=float)
    if x_t.shape != u.shape or x_t.shape[0] != ops.N.shape[0]:
        raise DimensionMismatch("x, u and the split operators disagree in dimension")
    return (ops.N @ x_t + u) / ops.m_diag


def coupling_edges(A, owners, areas):
    """Transmission edges for solvers whose area updates read rows of ``A``.

    Each state is sent once to every other area owning a state coupled to it.
    Returns ``(producer_slots, producer_areas, consumer_areas)``.
    """
    A = np.asarray(A)
    slots, prod, cons = [], [], []
    for j in range(A.shape[0]):
        readers = {owners[i] for i in np.flatnonzero(A[:, j]) if i != j}
        readers.discard(owners[j])
        for b in sorted(readers, key=list(areas).index):
            slots.append(j)
            prod.append(owners[j])
            cons.append(b)
    return np.array(slots, dtype=int), prod, cons


class _SplittingProcess:
    def __init__(self, problem, ops):
        part = problem.partition
        self.areas = part.areas
        self.slot_area = owner_of_state(part, problem.case)
        self.slot_state = np.arange(problem.n_states)
        self.owner_slots = np.arange(problem.n_states)
        off = ops.N - np.diag(np.diag(ops.N))
        self.edges, _, self.edge_consumer = coupling_edges(off, self.slot_area, self.areas)
        self.ops = ops
        self.m = ops.m_diag
        self.u = problem.normal_system.u
        self.x = np.zeros(problem.n_states)
        owner = np.array([self.areas.index(a) for a in self.slot_area], dtype=int)
        self.area_idx = [np.flatnonzero(owner == k) for k in range(len(self.areas))]

    def values(self):
        return self.x

    def step(self, frozen):
        x_old = self.x
        x_new = x_old.copy()
        seconds = np.zeros(len(self.areas))
        for k, idx in enumerate(self.area_idx):
            t0 = time.perf_counter()
            idx = idx[~frozen[idx]]
            x_new[idx] = (self.ops.N[idx] @ x_old + self.u[idx]) / self.m[idx]
            seconds[k] = time.perf_counter() - t0
        self.x = x_new
        return StepResult(seconds)


class MatrixSplittingEstimator(DistributedEstimator):
    """Jacobi-style matrix-splitting state estimator.

    Parameters
    ----------
    alpha : float
        Scale of the off-diagonal mass moved onto the diagonal of ``M``.
    strict : bool
        Refuse to iterate (``NotConvergent``) when ``rho(M^-1 N) >= 1``;
        otherwise only warn.
    epsilon, stopping, max_iter, freeze_epsilon
        Stopping-controller settings.

    Attributes
    ----------
    spectral_radius_ : float
    split_ : SplitOperators
    """

    method = "matrix-splitting"

    def __init__(self, alpha=1.0, strict=True, epsilon=1e-6, stopping="wosc", max_iter=5000,
                 freeze_epsilon=None):
        self.alpha = alpha
        self.strict = strict
        self.epsilon = epsilon
        self.stopping = stopping
        self.max_iter = max_iter
        self.freeze_epsilon = freeze_epsilon

    def _make_process(self, problem):
        self.split_ = build_split(problem.normal_system.L, self.alpha)
        self.spectral_radius_ = spectral_radius(self.split_)
        if self.spectral_radius_ >= 1:
            msg = f"rho(M^-1 N) = {self.spectral_radius_:.6f} >= 1; the iteration will not converge"
            if self.strict:
                raise NotConvergent(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
        proc = _SplittingProcess(problem, self.split_)
        proc.info = {"spectral_radius": self.spectral_radius_}
        return proc
