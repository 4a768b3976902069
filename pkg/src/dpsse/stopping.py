"""Distributed stopping criterion with per-state freezing.

Every distributed solver is driven through :func:`run_with_stopping`. The
solver exposes its iterate as a flat vector of *slots*, one per
(area, state) copy. The controller owns the freeze ledger: in WSC mode a
slot whose change between two consecutive iterates drops below epsilon is
frozen for good. Frozen slots are neither recomputed nor transmitted.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Hashable, Protocol, Sequence

import numpy as np

from .exceptions import DimensionMismatch, DivergenceGuard, ValidationError

MODES = ("wosc", "wsc")


@dataclass(frozen=True)
class StoppingConfig:
    """Global tolerance, WOSC/WSC mode and the iteration cap.

    ``freeze_epsilon`` overrides the per-state freeze tolerance; by default
    the same epsilon serves both checks.
    """

    epsilon: float = 1e-6
    mode: str = "wosc"
    max_iter: int = 10000
    freeze_epsilon: float | None = None
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")
        if self.freeze_epsilon is not None and self.freeze_epsilon < 0:
            raise ValidationError("freeze_epsilon must be non-negative")

    @property
    def freeze_tol(self) -> float:
        return self.epsilon if self.freeze_epsilon is None else self.freeze_epsilon


class FreezeLedger:
    """Frozen flags and freeze stamps per slot, plus transmission counts."""

    def __init__(self, slot_area: Sequence[Hashable], slot_state: Sequence[int]):
        self.slot_area = list(slot_area)
        self.slot_state = np.asarray(slot_state, dtype=int)
        n = len(self.slot_area)
        if self.slot_state.shape != (n,):
            raise DimensionMismatch("slot_area and slot_state differ in length")
        self.frozen = np.zeros(n, dtype=bool)
        self.stamp = np.full(n, -1, dtype=int)
        self.sent: list[int] = []

    def __len__(self):
        return len(self.slot_area)

    @property
    def cumulative(self) -> int:
        return int(sum(self.sent))

    @property
    def frozen_count(self) -> int:
        return int(self.frozen.sum())

    def is_empty(self) -> bool:
        return not self.frozen.any()

    def freeze(self, mask, iteration: int) -> None:
        new = np.asarray(mask, dtype=bool) & ~self.frozen
        self.frozen |= new
        self.stamp[new] = iteration

    def records(self) -> list[dict]:
        return [
            {"area": self.slot_area[k], "state": int(self.slot_state[k]), "iteration": int(self.stamp[k])}
            for k in np.flatnonzero(self.frozen)
        ]


def global_continue(x_t, x_prev, config: StoppingConfig) -> bool:
    """True while the Euclidean norm of the iterate change exceeds epsilon."""
    if x_prev is None:
        return True
    x_t = np.asarray(x_t, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    if x_t.shape != x_prev.shape:
        raise DimensionMismatch(f"iterates differ in shape: {x_t.shape} vs {x_prev.shape}")
    return bool(np.linalg.norm(x_t - x_prev) > config.epsilon)


def apply_freeze(x_t, x_prev, ledger: FreezeLedger, config: StoppingConfig,
                 iteration: int = 0, candidates=None) -> np.ndarray:
    """Freeze every unfrozen candidate slot whose change is below tolerance.

    Returns the mask of slots frozen by this call. ``candidates`` limits the
    check to slots the solver actually recomputed this iteration; slots left
    idle by a partial schedule would otherwise look converged.
    """
    if config.mode != "wsc":
        return np.zeros(len(ledger), dtype=bool)
    change = np.abs(np.asarray(x_t, dtype=float) - np.asarray(x_prev, dtype=float))
    mask = (change < config.freeze_tol) & ~ledger.frozen
    if candidates is not None:
        mask &= np.asarray(candidates, dtype=bool)
    ledger.freeze(mask, iteration)
    return mask


def comm_cost(frozen, edges, active=None) -> int:
    """Scalars sent in one iteration.

    ``edges`` lists the producing slot of every (producer -> consumer area)
    transmission edge. Frozen producers send nothing; ``active`` optionally
    masks edges that are live this iteration.
    """
    edges = np.asarray(edges, dtype=int)
    if edges.size == 0:
        return 0
    live = ~np.asarray(frozen, dtype=bool)[edges]
    if active is not None:
        live &= np.asarray(active, dtype=bool)
    return int(live.sum())


@dataclass
class StepResult:
    """What one solver iteration reports back to the controller.

    ``updated`` marks slots recomputed this iteration (``None`` = all
    unfrozen slots); ``area_seconds`` holds per-area compute time;
    ``active_edges`` masks the transmission edges used this iteration.
    """

    area_seconds: np.ndarray
    updated: np.ndarray | None = None
    active_edges: np.ndarray | None = None


class DistributedProcess(Protocol):
    areas: Sequence[Hashable]
    slot_area: Sequence[Hashable]
    slot_state: np.ndarray
    owner_slots: np.ndarray
    edges: np.ndarray

    def values(self) -> np.ndarray: ...

    def step(self, frozen: np.ndarray) -> StepResult: ...


@dataclass
class SolverRun:
    """Trajectory, freeze ledger and communication counters of one run."""

    method: str
    mode: str
    n_iter: int
    status: str
    slot_trajectory: np.ndarray
    owner_slots: np.ndarray
    delta_norms: np.ndarray
    scalars_sent: np.ndarray
    area_seconds: np.ndarray
    frozen_counts: np.ndarray
    ledger: FreezeLedger
    areas: tuple = ()
    x0: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def trajectory(self) -> np.ndarray:
        """Per-iteration estimate (owner copy of every state)."""
        return self.slot_trajectory[:, self.owner_slots]

    @property
    def estimate(self) -> np.ndarray:
        if self.n_iter == 0:
            return self.x0[self.owner_slots].copy()
        return self.slot_trajectory[-1, self.owner_slots].copy()

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def scalars_transmitted(self) -> int:
        return int(self.scalars_sent.sum())

    @property
    def compute_seconds(self) -> np.ndarray:
        return self.area_seconds.sum(axis=1) if self.area_seconds.size else np.zeros(self.n_iter)


def run_with_stopping(process: DistributedProcess, config: StoppingConfig, method: str = "") -> SolverRun:
    """Drive ``process`` until the global change drops below epsilon.

    The first iteration always runs. After each iteration the controller
    counts transmissions (against the freeze state at the start of the
    iteration), checks the divergence guard, then in WSC mode freezes
    converged slots (from the second iteration on, once two computed
    iterates exist). Hitting ``max_iter`` is reported via ``status``.

    Raises
    ------
    DivergenceGuard
        When the iterate norm exceeds ``divergence_factor`` times its
        reference (the larger of the initial and first-iterate norms). The
        partial run is attached.
    """
    ledger = FreezeLedger(process.slot_area, process.slot_state)
    x_prev = process.values().copy()
    x0 = x_prev.copy()
    slots, deltas, sent, seconds, frozen_counts = [], [], [], [], []
    status = "max_iter"
    ref = None

    def _build(n, st):
        n_areas = len(process.areas)
        return SolverRun(
            method=method,
            mode=config.mode,
            n_iter=n,
            status=st,
            slot_trajectory=np.array(slots).reshape(n, len(x0)),
            owner_slots=np.asarray(process.owner_slots, dtype=int),
            delta_norms=np.array(deltas, dtype=float),
            scalars_sent=np.array(sent, dtype=int),
            area_seconds=np.array(seconds, dtype=float).reshape(n, n_areas),
            frozen_counts=np.array(frozen_counts, dtype=int),
            ledger=ledger,
            areas=tuple(process.areas),
            x0=x0,
        )

    for t in range(1, config.max_iter + 1):
        frozen_before = ledger.frozen.copy()
        res = process.step(frozen_before)
        x = process.values().copy()
        if np.any(x[frozen_before] != x_prev[frozen_before]):
            raise RuntimeError(f"{method}: solver wrote to a frozen slot")

        n_sent = comm_cost(frozen_before, process.edges, res.active_edges)
        ledger.sent.append(n_sent)
        slots.append(x)
        deltas.append(float(np.linalg.norm(x - x_prev)))
        sent.append(n_sent)
        seconds.append(np.asarray(res.area_seconds, dtype=float))

        norm = float(np.linalg.norm(x))
        if ref is None:
            ref = max(float(np.linalg.norm(x0)), norm, np.finfo(float).tiny)
        if not np.isfinite(norm) or norm > config.divergence_factor * ref:
            frozen_counts.append(ledger.frozen_count)
            raise DivergenceGuard(
                f"{method}: iterate norm {norm:.3e} exceeded {config.divergence_factor:g}x reference "
                f"at iteration {t}",
                run=_build(t, "diverged"),
            )

        if config.mode == "wsc" and t >= 2:
            candidates = ~frozen_before if res.updated is None else (res.updated & ~frozen_before)
            apply_freeze(x, x_prev, ledger, config, t, candidates)
        frozen_counts.append(ledger.frozen_count)

        if not global_continue(x, x_prev, config):
            status = "converged"
            break
        x_prev = x

    return _build(len(slots), status)


def timed(fn, *args, **kwargs):
    """Call ``fn`` and return ``(result, seconds)`` on the monotonic clock."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
