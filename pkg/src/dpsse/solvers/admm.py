"""Consensus ADMM state estimation.

Area ``k`` keeps a local copy ``x_k`` of its own states and of every
tie-line endpoint. For each neighboring pair ``(k, l)`` an auxiliary vector
``x_kl`` (shared by both sides) and duals ``v_kl``, ``v_lk`` enforce
agreement on the shared states. One iteration is the local x-update, the
auxiliary update and the dual ascent, in that order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..exceptions import SingularLocalSystem
from ..stopping import StepResult
from ._base import AreaCopies, DistributedEstimator


@dataclass
class AdmmState:
    """Iterate of the consensus ADMM.

    ``x[k]`` is area ``k``'s local vector over ``states[k]``; ``aux`` and
    ``dual`` are keyed by ordered pair ``(k, l)`` and run over
    ``shared[(k, l)]``. ``aux[(k, l)]`` and ``aux[(l, k)]`` are the same
    array object.
    """

    states: dict
    shared: dict
    x: dict
    aux: dict
    dual: dict
    c: float
    t: int = 0
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("penalty c must be positive")
        self._pos = {k: {s: i for i, s in enumerate(st)} for k, st in self.states.items()}

    def copy_of(self, k, l) -> np.ndarray:
        """``x_k[l]``: area ``k``'s copies of the states it shares with ``l``."""
        pos = self._pos[k]
        return self.x[k][[pos[s] for s in self.shared[(k, l)]]]

    @classmethod
    def flat_start(cls, states, shared, c):
        x = {k: np.zeros(len(st)) for k, st in states.items()}
        aux, dual = {}, {}
        for (k, l), st in shared.items():
            if (l, k) in aux:
                aux[(k, l)] = aux[(l, k)]
            else:
                aux[(k, l)] = np.zeros(len(st))
            dual[(k, l)] = np.zeros(len(st))
        return cls(states, shared, x, aux, dual, float(c))


def local_system(H, z, w, states, shared_items, c):
    """Hessian and constant right-hand side of one area's x-update.

    The update solves ``(2 H^T W H + c P) x = 2 H^T W z + sum_l (c x_kl - v_kl)``
    with ``P`` counting, per state, the pairs it is shared in.
    """
    pos = {s: i for i, s in enumerate(states)}
    Q = 2.0 * H.T @ (w[:, None] * H)
    for _, st in shared_items:
        for s in st:
            Q[pos[s], pos[s]] += c
    return Q, 2.0 * H.T @ (w * z)


def x_update(state: AdmmState, data: dict, frozen: dict | None = None, factors: dict | None = None) -> dict:
    """Exact local minimizers of the augmented Lagrangian over each ``x_k``.

    ``data[k] = (H_k, z_k, w_k)`` restricted to the area's held states.
    ``frozen[k]`` masks local entries held at their current value.
    """
    out = {}
    for k, states in state.states.items():
        out[k] = _x_update_area(state, k, data[k], None if frozen is None else frozen[k],
                                None if factors is None else factors.get(k))
    return out


def _x_update_area(state, k, data, fixed=None, factor=None, system=None):
    states = state.states[k]
    pos = state._pos[k]
    items = [(l, st) for (kk, l), st in state.shared.items() if kk == k]
    if system is None:
        system = local_system(*data, states, items, state.c)
    Q, rhs = system[0], system[1].copy()
    for l, st in items:
        idx = [pos[s] for s in st]
        np.add.at(rhs, idx, state.c * state.aux[(k, l)] - state.dual[(k, l)])
    n = len(states)
    fixed = np.zeros(n, dtype=bool) if fixed is None else fixed
    x = state.x[k].copy()
    free = ~fixed
    if not free.any():
        return x
    b = (rhs - Q[:, fixed] @ x[fixed])[free]
    if factor is None:
        factor = _cholesky(Q[np.ix_(free, free)], k)
    x[free] = cho_solve(factor, b)
    return x


def _cholesky(Q, area):
    try:
        factor = cho_factor(Q, lower=True)
    except LinAlgError as exc:
        raise SingularLocalSystem(f"area {area!r}: local x-update system is singular") from exc
    d = np.abs(np.diag(factor[0]))
    if d.min() <= d.max() * 1e-7:
        raise SingularLocalSystem(f"area {area!r}: local x-update system is numerically singular")
    return factor


def aux_update(state: AdmmState) -> dict:
    """``x_kl = (x_k[l] + x_l[k]) / 2 + (v_kl + v_lk) / (2c)`` per pair."""
    out = {}
    for (k, l) in state.shared:
        if (l, k) in out:
            out[(k, l)] = out[(l, k)]
            continue
        out[(k, l)] = 0.5 * (state.copy_of(k, l) + state.copy_of(l, k)) + (
            state.dual[(k, l)] + state.dual[(l, k)]
        ) / (2.0 * state.c)
    return out


def dual_update(state: AdmmState) -> dict:
    """``v_kl <- v_kl + c (x_k[l] - x_kl)``."""
    return {
        (k, l): state.dual[(k, l)] + state.c * (state.copy_of(k, l) - state.aux[(k, l)])
        for (k, l) in state.shared
    }


def pair_update(state: AdmmState) -> tuple[dict, dict]:
    """Auxiliary and dual updates in one pass, per unordered pair.

    Same iteration as :func:`aux_update` followed by :func:`dual_update`,
    but the dual step uses ``x_k[l] - x_kl = h - s`` with half-gap
    ``h = (x_k[l] - x_l[k]) / 2`` and ``s = (v_kl + v_lk) / (2c)``. The two
    sides then see ``h`` and ``-h`` exactly, so zero-sum duals stay
    zero-sum in floating point instead of drifting by rounding.
    """
    aux, dual = {}, {}
    c = state.c
    for (k, l) in state.shared:
        if (k, l) in aux:
            continue
        a, b = state.copy_of(k, l), state.copy_of(l, k)
        h = (a - b) / 2.0
        s = (state.dual[(k, l)] + state.dual[(l, k)]) / (2.0 * c)
        aux[(k, l)] = aux[(l, k)] = (a + b) / 2.0 + s
        dual[(k, l)] = state.dual[(k, l)] + c * (h - s)
        dual[(l, k)] = state.dual[(l, k)] + c * (-h - s)
    return aux, dual


def consensus_residual(state: AdmmState) -> float:
    """Largest disagreement ``|x_k[l] - x_l[k]|`` over all shared entries."""
    worst = 0.0
    for (k, l) in state.shared:
        gap = np.abs(state.copy_of(k, l) - state.copy_of(l, k))
        if gap.size:
            worst = max(worst, float(gap.max()))
    return worst


def dual_antisymmetry(state: AdmmState) -> float:
    """Largest ``|v_kl + v_lk|``; zero for every iterate started from zero duals."""
    worst = 0.0
    for (k, l) in state.shared:
        s = np.abs(state.dual[(k, l)] + state.dual[(l, k)])
        if s.size:
            worst = max(worst, float(s.max()))
    return worst


def penalty_unit(problem) -> float:
    """``sqrt(lambda_min * lambda_max)`` of the WLS Hessian ``2 H^T W H``.

    The classic penalty scale for ADMM on quadratic objectives; computed
    once at setup from the centralized gain matrix.
    """
    ev = np.linalg.eigvalsh(2.0 * problem.normal_system.L)
    return float(np.sqrt(ev[0] * ev[-1]))


class _AdmmProcess:
    def __init__(self, problem, c, track=False):
        lay = AreaCopies(problem)
        self.layout = lay
        self.areas = lay.areas
        self.slot_area = lay.slot_area
        self.slot_state = lay.slot_state
        self.owner_slots = lay.owner_slots
        self.edges = lay.edges
        self.data = {a: lay.local_H(problem, a) for a in self.areas}
        self.state = AdmmState.flat_start({a: lay.local[a] for a in self.areas}, lay.shared, c)
        self.slices = {}
        start = 0
        for a in self.areas:
            n = len(lay.local[a])
            self.slices[a] = slice(start, start + n)
            start += n
        self.pairs_of = {a: [p for p in lay.shared if a in p] for a in self.areas}
        self.systems = {
            a: local_system(*self.data[a], lay.local[a],
                            [(l, st) for (k, l), st in lay.shared.items() if k == a], c)
            for a in self.areas
        }
        self._factors = {}
        for a in self.areas:
            self._factor(a, np.zeros(len(lay.local[a]), dtype=bool))
        self.track = track
        self.residuals: list[float] = []
        self.antisymmetry: list[float] = []

    def _factor(self, a, fixed):
        key = (a, fixed.tobytes())
        if key not in self._factors:
            Q = self.systems[a][0]
            free = ~fixed
            self._factors[key] = _cholesky(Q[np.ix_(free, free)], a) if free.any() else None
        return self._factors[key]

    def values(self):
        return np.concatenate([self.state.x[a] for a in self.areas]) if self.areas else np.zeros(0)

    def step(self, frozen):
        st = self.state
        seconds = np.zeros(len(self.areas))
        new_x = {}
        for k, a in enumerate(self.areas):
            t0 = time.perf_counter()
            fixed = frozen[self.slices[a]]
            new_x[a] = _x_update_area(st, a, self.data[a], fixed, self._factor(a, fixed), self.systems[a])
            seconds[k] += time.perf_counter() - t0
        st.x = new_x

        t0 = time.perf_counter()
        st.aux, st.dual = pair_update(st)
        pair_time = time.perf_counter() - t0
        # both ends of a pair compute the midpoint and their own dual
        n_pairs = max(len(st.shared), 1)
        for k, a in enumerate(self.areas):
            seconds[k] += pair_time * len(self.pairs_of[a]) / n_pairs
        st.t += 1
        if self.track:
            self.residuals.append(consensus_residual(st))
            self.antisymmetry.append(dual_antisymmetry(st))
        return StepResult(seconds)


class AdmmEstimator(DistributedEstimator):
    """Consensus ADMM state estimator.

    Parameters
    ----------
    c : float
        Penalty parameter. With ``penalty_scale="spectral"`` (default) it is
        relative: the effective penalty is ``c * penalty_unit(problem)``.
        With ``penalty_scale="absolute"`` it is used as given; note that
        the WLS weights (``1/sigma^2``) make absolute values near 1 far too
        small to enforce consensus.
    track : bool
        Record consensus residual and dual antisymmetry per iteration
        (``consensus_residuals_``, ``dual_antisymmetry_``).

    Attributes
    ----------
    c_ : float
        Effective penalty.
    admm_state_ : AdmmState
        Final iterate including auxiliaries and duals.
    """

    method = "admm"

    def __init__(self, c=1.0, penalty_scale="spectral", track=False, epsilon=1e-6, stopping="wosc", max_iter=2000,
                 freeze_epsilon=None):
        self.c = c
        self.penalty_scale = penalty_scale
        self.track = track
        self.epsilon = epsilon
        self.stopping = stopping
        self.max_iter = max_iter
        self.freeze_epsilon = freeze_epsilon

    def _make_process(self, problem):
        if self.penalty_scale == "spectral":
            self.c_ = float(self.c) * penalty_unit(problem)
        elif self.penalty_scale == "absolute":
            self.c_ = float(self.c)
        else:
            raise ValueError(f"penalty_scale must be 'spectral' or 'absolute', got {self.penalty_scale!r}")
        proc = _AdmmProcess(problem, self.c_, self.track)
        proc.info = {"c": self.c_}
        return proc

    def fit(self, problem, y=None):
        super().fit(problem, y)
        self.admm_state_ = self.process_.state
        self.consensus_residual_ = consensus_residual(self.admm_state_)
        if self.track:
            self.consensus_residuals_ = np.array(self.process_.residuals)
            self.dual_antisymmetry_ = np.array(self.process_.antisymmetry)
        return self
