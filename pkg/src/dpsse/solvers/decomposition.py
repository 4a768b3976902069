"""Multi-area decomposition with border-consistency penalties.

Each area minimizes the weighted error of its own measurements plus
``omega_x * (x_s - x~_s)^2`` for every state ``s`` it shares with a
neighbor, where ``x~_s`` is the value that neighbor published last sweep.
Sweeps are synchronous: all areas solve from the same published borders,
then publish.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..exceptions import SingularLocalSystem
from ..stopping import StepResult
from ._base import AreaCopies, DistributedEstimator


@dataclass(frozen=True, eq=False)
class AreaSubproblem:
    """Local data of one area.

    ``states`` are the global state indices held locally. ``border`` lists
    the consistency terms as ``(local position, neighbor area, state)``.
    ``local_rows``/``border_rows`` split the area's measurements into those
    touching only its own buses and those reaching into a neighbor.
    """

    area: object
    states: tuple[int, ...]
    H: np.ndarray
    z: np.ndarray
    w: np.ndarray
    rows: tuple[int, ...]
    local_rows: tuple[int, ...]
    border_rows: dict
    border: tuple[tuple[int, object, int], ...]
    omega_x: float

    @cached_property
    def hessian(self) -> np.ndarray:
        Q = self.H.T @ (self.w[:, None] * self.H)
        np.add.at(Q, (self._border_pos, self._border_pos), self.omega_x)
        Q.setflags(write=False)
        return Q

    @cached_property
    def _border_pos(self) -> np.ndarray:
        return np.array([p for p, _, _ in self.border], dtype=int)

    @cached_property
    def _measurement_rhs(self) -> np.ndarray:
        return self.H.T @ (self.w * self.z)

    def rhs(self, border_values) -> np.ndarray:
        r = self._measurement_rhs.copy()
        np.add.at(r, self._border_pos, self.omega_x * np.asarray(border_values, dtype=float))
        return r

    def objective(self, x, border_values) -> float:
        res = self.z - self.H @ x
        gap = x[self._border_pos] - np.asarray(border_values, dtype=float)
        return float(res @ (self.w * res) + self.omega_x * gap @ gap)

    def gradient(self, x, border_values) -> np.ndarray:
        return 2.0 * (self.hessian @ x - self.rhs(border_values))


def build_subproblems(problem, omega_x: float = 1e4, layout: AreaCopies | None = None) -> list[AreaSubproblem]:
    """One subproblem per area; every measurement row lands in exactly one."""
    if not omega_x > 0:
        raise ValueError("omega_x must be positive")
    layout = layout or AreaCopies(problem)
    owner = [problem.partition.area_of[b] for b in problem.case.bus_of_state]
    out = []
    for a in layout.areas:
        H, z, w = layout.local_H(problem, a)
        states = layout.local[a]
        local_rows, border_rows = [], {}
        for r, row in zip(layout.rows[a], H):
            foreign = sorted({owner[states[c]] for c in np.flatnonzero(row)} - {a}, key=layout.areas.index)
            if foreign:
                border_rows.setdefault((a, foreign[0]), []).append(r)
            else:
                local_rows.append(r)
        pos = {s: k for k, s in enumerate(states)}
        border = tuple(
            (pos[s], b, s) for b in layout.neighbors[a] for s in layout.shared.get((a, b), [])
        )
        out.append(AreaSubproblem(
            a, tuple(states), H, z, w, tuple(layout.rows[a]), tuple(local_rows),
            {k: tuple(v) for k, v in border_rows.items()}, border, float(omega_x),
        ))
    return out


def solve_area(sp: AreaSubproblem, border_values, fixed=None, x_current=None, _factor=None) -> np.ndarray:
    """Exact minimizer of the area objective for the given border values.

    ``fixed`` masks local positions held at ``x_current`` (frozen states).

    Raises
    ------
    SingularLocalSystem
        If the area stays unobservable even with the consistency terms.
    """
    n = len(sp.states)
    fixed = np.zeros(n, dtype=bool) if fixed is None else np.asarray(fixed, dtype=bool)
    x = np.zeros(n) if x_current is None else np.array(x_current, dtype=float)
    free = ~fixed
    if not free.any():
        return x
    Q = sp.hessian
    b = (sp.rhs(border_values) - Q[:, fixed] @ x[fixed])[free]
    factor = _factor or _cholesky(Q[np.ix_(free, free)], sp.area)
    x[free] = cho_solve(factor, b)
    return x


def _cholesky(Q, area):
    try:
        factor = cho_factor(Q, lower=True)
    except LinAlgError as exc:
        raise SingularLocalSystem(f"area {area!r}: local gain matrix is singular") from exc
    d = np.abs(np.diag(factor[0]))
    if d.min() <= d.max() * 1e-7:
        raise SingularLocalSystem(f"area {area!r}: local gain matrix is numerically singular")
    return factor


def exchange_borders(subproblems, values, sent_mask=None):
    """Border values each area reads next sweep, plus the scalars sent.

    ``values[a]`` is area ``a``'s local vector. ``sent_mask[a]`` (optional)
    flags the local positions ``a`` still transmits; frozen values are
    already known to the consumer, so they are read but not counted.
    """
    index = {sp.area: {s: k for k, s in enumerate(sp.states)} for sp in subproblems}
    borders, sent = {}, 0
    for sp in subproblems:
        vec = np.empty(len(sp.border))
        for k, (_, b, s) in enumerate(sp.border):
            pos = index[b][s]
            vec[k] = values[b][pos]
            if sent_mask is None or sent_mask[b][pos]:
                sent += 1
        borders[sp.area] = vec
    return borders, sent


class _DecompositionProcess:
    def __init__(self, problem, omega_x):
        lay = AreaCopies(problem)
        self.layout = lay
        self.areas = lay.areas
        self.slot_area = lay.slot_area
        self.slot_state = lay.slot_state
        self.owner_slots = lay.owner_slots
        self.edges = lay.edges
        self.subproblems = build_subproblems(problem, omega_x, lay)
        self.slices = {}
        start = 0
        for a in self.areas:
            n = len(lay.local[a])
            self.slices[a] = slice(start, start + n)
            start += n
        self.x = np.zeros(len(self.slot_area))
        self.borders = {sp.area: np.zeros(len(sp.border)) for sp in self.subproblems}
        self._factors = {}
        # fail fast on locally unobservable areas
        for sp in self.subproblems:
            self._factor(sp, np.zeros(len(sp.states), dtype=bool))

    def _factor(self, sp, fixed):
        key = (sp.area, fixed.tobytes())
        if key not in self._factors:
            free = ~fixed
            self._factors[key] = _cholesky(sp.hessian[np.ix_(free, free)], sp.area) if free.any() else None
        return self._factors[key]

    def values(self):
        return self.x

    def local_values(self):
        return {a: self.x[self.slices[a]] for a in self.areas}

    def step(self, frozen):
        x_new = self.x.copy()
        seconds = np.zeros(len(self.areas))
        for k, sp in enumerate(self.subproblems):
            t0 = time.perf_counter()
            sl = self.slices[sp.area]
            fixed = frozen[sl]
            x_new[sl] = solve_area(sp, self.borders[sp.area], fixed, self.x[sl], self._factor(sp, fixed))
            seconds[k] = time.perf_counter() - t0
        self.x = x_new
        self.borders, _ = exchange_borders(self.subproblems, self.local_values())
        return StepResult(seconds)


class DecompositionEstimator(DistributedEstimator):
    """Multi-area decomposition state estimator.

    Parameters
    ----------
    omega_x : float
        Weight of each border-consistency term (default ``1/0.01**2``).
    """

    method = "decomposition"

    def __init__(self, omega_x=1e4, epsilon=1e-6, stopping="wosc", max_iter=200, freeze_epsilon=None):
        self.omega_x = omega_x
        self.epsilon = epsilon
        self.stopping = stopping
        self.max_iter = max_iter
        self.freeze_epsilon = freeze_epsilon

    def _make_process(self, problem):
        proc = _DecompositionProcess(problem, self.omega_x)
        self.subproblems_ = proc.subproblems
        proc.info = {"omega_x": float(self.omega_x)}
        return proc
