"""DC measurement model: H, R, synthetic measurements and the WLS objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    NonPositiveSigma,
    UnknownBranch,
    UnknownBus,
    ValidationError,
)
from .network import NetworkCase

KINDS = ("flow", "injection", "virtual", "pseudo")
INJECTION_KINDS = ("injection", "virtual", "pseudo")

DEFAULT_SIGMAS = {"flow": 0.01, "injection": 0.01, "pseudo": 0.1, "virtual": 1e-4}


@dataclass(frozen=True)
class Measurement:
    """One active-power measurement.

    ``buses`` holds dense bus indices: ``(i, j)`` for a flow from ``i`` to
    ``j``, ``(i,)`` for an injection at ``i``. Pseudo measurements use
    either shape.
    """

    kind: str
    buses: tuple[int, ...]
    value: float
    sigma: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown measurement kind {self.kind!r}")
        n = len(self.buses)
        if self.kind == "flow" and n != 2:
            raise ValidationError("flow measurement needs (from, to)")
        if self.kind in ("injection", "virtual") and n != 1:
            raise ValidationError(f"{self.kind} measurement needs a single bus")
        if self.kind == "pseudo" and n not in (1, 2):
            raise ValidationError("pseudo measurement needs one bus or a bus pair")
        if not self.sigma > 0:
            raise NonPositiveSigma(f"sigma must be positive, got {self.sigma}")
        if self.kind == "virtual" and self.value != 0.0:
            raise ValidationError("virtual measurements must have value 0")

    @property
    def is_flow_like(self) -> bool:
        return len(self.buses) == 2

    @property
    def metered_bus(self) -> int:
        """Bus where the meter sits (the from-end for flows)."""
        return self.buses[0]


@dataclass(frozen=True)
class MeasurementSet:
    items: tuple[Measurement, ...]

    def __post_init__(self):
        if not self.items:
            raise ValidationError("measurement set is empty")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, k):
        return self.items[k]

    @property
    def z(self) -> np.ndarray:
        return np.array([m.value for m in self.items], dtype=float)

    @property
    def sigma(self) -> np.ndarray:
        return np.array([m.sigma for m in self.items], dtype=float)

    @property
    def R(self) -> np.ndarray:
        return build_R(self)

    def with_values(self, values) -> "MeasurementSet":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise DimensionMismatch(f"expected {len(self)} values, got {values.shape}")
        return MeasurementSet(tuple(
            Measurement(m.kind, m.buses, 0.0 if m.kind == "virtual" else float(v), m.sigma)
            for m, v in zip(self.items, values)
        ))


@dataclass(frozen=True)
class NoiseSpec:
    seed: int = 42
    sigmas: dict = field(default_factory=lambda: dict(DEFAULT_SIGMAS))
    enabled: bool = True

    def __post_init__(self):
        for kind, s in self.sigmas.items():
            if not s > 0:
                raise NonPositiveSigma(f"default sigma for {kind} must be positive")


def _flow_row(case, i, j, branches, col, out):
    try:
        br = case.branches[branches[frozenset((i, j))]]
    except KeyError:
        raise UnknownBranch(f"no branch between buses {i} and {j}") from None
    b = 1.0 / br.reactance
    if col[i] >= 0:
        out[col[i]] += b
    if col[j] >= 0:
        out[col[j]] -= b


def build_H(case: NetworkCase, ms: Iterable[Measurement]) -> np.ndarray:
    """Measurement matrix over the reduced (slack-free) state vector.

    A flow ``i -> j`` contributes ``(theta_i - theta_j) / x_ij``; an injection
    at ``i`` is the sum of flows leaving ``i`` over its incident branches.
    """
    items = list(ms)
    branches = case.branch_index()
    adj = case.adjacency()
    col = case.state_of_bus
    H = np.zeros((len(items), case.n_states))
    for r, m in enumerate(items):
        for bus in m.buses:
            if not 0 <= bus < case.n_buses:
                raise UnknownBus(f"measurement references unknown bus {bus}")
        if m.is_flow_like:
            _flow_row(case, m.buses[0], m.buses[1], branches, col, H[r])
        else:
            i = m.buses[0]
            for j in sorted(adj[i]):
                _flow_row(case, i, j, branches, col, H[r])
    return H


def build_R(ms: Iterable[Measurement]) -> np.ndarray:
    sigma = np.array([m.sigma for m in ms], dtype=float)
    if np.any(~(sigma > 0)):
        raise NonPositiveSigma("all sigmas must be positive")
    return np.diag(sigma**2)


def _weights(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return 1.0 / (np.diag(R) if R.ndim == 2 else R)


def evaluate_objective(x, ms, H) -> float:
    """Weighted residual sum of squares ``(z - Hx)^T R^-1 (z - Hx)``.

    ``ms`` may be a :class:`MeasurementSet` or a ``(z, R)`` pair.
    """
    if isinstance(ms, MeasurementSet):
        z, w = ms.z, 1.0 / ms.sigma**2
    else:
        z, R = ms
        z, w = np.asarray(z, dtype=float), _weights(R)
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float)
    if H.shape != (z.size, x.size):
        raise DimensionMismatch(f"H is {H.shape}, expected {(z.size, x.size)}")
    r = z - H @ x
    return float(r @ (w * r))


def default_layout(case: NetworkCase) -> list[tuple[str, tuple[int, ...]]]:
    """One flow per branch (from-end) and one injection per bus."""
    layout = [("flow", (br.from_bus, br.to_bus)) for br in case.branches]
    layout += [("injection", (b.id,)) for b in case.buses]
    return layout


def simulate_measurements(
    case: NetworkCase,
    truth,
    spec: NoiseSpec | None = None,
    layout: Sequence | None = None,
) -> MeasurementSet:
    """Generate ``z = H @ truth + e`` with seeded Gaussian noise.

    ``layout`` entries are ``(kind, buses)`` or ``(kind, buses, sigma)``
    tuples, or :class:`Measurement` objects whose value is ignored.
    Virtual measurements are always exactly zero.
    """
    spec = spec or NoiseSpec()
    layout = default_layout(case) if layout is None else layout
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (case.n_states,) or not np.all(np.isfinite(truth)):
        raise DimensionMismatch(f"truth must be a finite vector of length {case.n_states}")

    items = []
    for entry in layout:
        if isinstance(entry, Measurement):
            kind, buses, sigma = entry.kind, entry.buses, entry.sigma
        else:
            kind, buses = entry[0], tuple(entry[1])
            sigma = entry[2] if len(entry) > 2 else spec.sigmas[kind]
        items.append(Measurement(kind, tuple(int(b) for b in buses), 0.0, float(sigma)))

    H = build_H(case, items)
    z = H @ truth
    if spec.enabled:
        rng = np.random.default_rng(spec.seed)
        z = z + rng.standard_normal(len(items)) * np.array([m.sigma for m in items])
    return MeasurementSet(tuple(items)).with_values(z)


@dataclass(frozen=True)
class ObservabilityReport:
    observable: bool
    rank: int
    n_states: int
    condition: float


def check_observability(H, R) -> ObservabilityReport:
    H = np.asarray(H, dtype=float)
    Hw = H * np.sqrt(_weights(R))[:, None]
    n = H.shape[1]
    s = np.linalg.svd(Hw, compute_uv=False)
    tol = s.max(initial=0.0) * max(Hw.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    cond = float(s[0] ** 2 / s[-1] ** 2) if n and rank == n else float("inf")
    return ObservabilityReport(rank == n, rank, n, cond)
