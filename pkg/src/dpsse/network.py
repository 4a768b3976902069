"""Grid topology, state indexing and multi-area partitions.

All angles are in radians and reactances in per-unit. The slack bus angle is
fixed at zero and removed from the unknown vector, so a case with ``n`` buses
has ``n - 1`` states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    DanglingBranch,
    DisconnectedGraph,
    DuplicateBus,
    MultipleSlack,
    NoSlack,
    UnknownArea,
    UnknownBus,
    ValidationError,
)


@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    reactance: float


@dataclass(frozen=True)
class NetworkCase:
    """Buses and branches of a DC network.

    A case returned by :func:`validate_case` has dense 0-based bus ids;
    ``original_ids[i]`` gives the user-facing id of bus ``i``.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    original_ids: tuple[int, ...] = ()
    name: str = ""

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_states(self) -> int:
        return len(self.buses) - 1

    @property
    def slack(self) -> int:
        return next(b.id for b in self.buses if b.is_slack)

    @property
    def state_of_bus(self) -> np.ndarray:
        """Map dense bus index -> state column, -1 for the slack."""
        out = np.full(self.n_buses, -1, dtype=int)
        others = [b.id for b in self.buses if not b.is_slack]
        out[others] = np.arange(len(others))
        return out

    @property
    def bus_of_state(self) -> np.ndarray:
        return np.array([b.id for b in self.buses if not b.is_slack], dtype=int)

    def index_of(self, original_id: int) -> int:
        try:
            return self.original_ids.index(original_id)
        except ValueError:
            raise UnknownBus(f"bus {original_id} is not in the case") from None

    def branch_index(self) -> dict[frozenset, int]:
        return {frozenset((br.from_bus, br.to_bus)): k for k, br in enumerate(self.branches)}

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in self.buses]
        for br in self.branches:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        return adj


def validate_case(case: NetworkCase) -> NetworkCase:
    """Check the case invariants and normalize bus ids to ``0..n-1``.

    Raises
    ------
    DuplicateBus, DanglingBranch, NoSlack, MultipleSlack, DisconnectedGraph
        On the corresponding invariant violation. Non-positive reactances,
        self-loops and duplicate branches raise plain :class:`ValidationError`.
    """
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateBus(f"duplicate bus ids: {dup}")
    if not ids:
        raise ValidationError("case has no buses")
    n_slack = sum(b.is_slack for b in case.buses)
    if n_slack == 0:
        raise NoSlack("no slack bus designated")
    if n_slack > 1:
        raise MultipleSlack(f"{n_slack} slack buses designated, expected exactly one")

    # already-normalized cases keep their original id map
    if case.original_ids and ids == list(range(len(ids))):
        original = tuple(case.original_ids)
    else:
        original = tuple(ids)
    pos = {bid: k for k, bid in enumerate(ids)}

    branches = []
    seen = set()
    for br in case.branches:
        if br.from_bus not in pos or br.to_bus not in pos:
            raise DanglingBranch(f"branch {br.from_bus}-{br.to_bus} references a missing bus")
        if br.from_bus == br.to_bus:
            raise ValidationError(f"branch {br.from_bus}-{br.to_bus} is a self-loop")
        if not (np.isfinite(br.reactance) and br.reactance > 0):
            raise ValidationError(f"branch {br.from_bus}-{br.to_bus} has reactance {br.reactance}")
        key = frozenset((br.from_bus, br.to_bus))
        if key in seen:
            raise ValidationError(f"duplicate branch {br.from_bus}-{br.to_bus}")
        seen.add(key)
        branches.append(Branch(pos[br.from_bus], pos[br.to_bus], float(br.reactance)))

    n = len(ids)
    if branches:
        rows = [b.from_bus for b in branches]
        cols = [b.to_bus for b in branches]
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        n_comp, _ = connected_components(graph, directed=False)
    else:
        n_comp = n
    if n_comp != 1:
        raise DisconnectedGraph(f"network has {n_comp} connected components")

    buses = tuple(Bus(k, b.is_slack) for k, b in enumerate(case.buses))
    return NetworkCase(buses, tuple(branches), original, case.name)


@dataclass(frozen=True)
class AreaPartition:
    """Assignment of buses to areas plus the derived tie-line structure.

    Build with :func:`make_partition`; ``area_of`` is indexed by dense bus id.
    """

    areas: tuple[Hashable, ...]
    area_of: tuple[Hashable, ...]
    tie_lines: tuple[int, ...] = ()
    neighbor_sets: Mapping[Hashable, frozenset] = field(default_factory=dict)
    boundary: Mapping[tuple, frozenset] = field(default_factory=dict)

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    def buses_of(self, a: Hashable) -> list[int]:
        self._check(a)
        return [i for i, ar in enumerate(self.area_of) if ar == a]

    def _check(self, a):
        if a not in self.neighbor_sets:
            raise UnknownArea(f"unknown area {a!r}")


def make_partition(case: NetworkCase, mapping: Mapping[int, Hashable] | None = None) -> AreaPartition:
    """Build a partition of a validated case.

    ``mapping`` is keyed by original bus id. ``None`` gives a single area
    named ``1``.
    """
    if mapping is None:
        mapping = {oid: 1 for oid in case.original_ids}
    missing = [oid for oid in case.original_ids if oid not in mapping]
    if missing:
        raise ValidationError(f"buses without an area: {missing}")
    extra = [k for k in mapping if k not in case.original_ids]
    if extra:
        raise UnknownBus(f"partition references unknown buses: {extra}")
    area_of = tuple(mapping[oid] for oid in case.original_ids)
    areas = tuple(sorted(set(area_of), key=_sort_key))

    ties = []
    nbrs: dict[Hashable, set] = {a: set() for a in areas}
    boundary: dict[tuple, set] = {}
    for k, br in enumerate(case.branches):
        a, b = area_of[br.from_bus], area_of[br.to_bus]
        if a == b:
            continue
        ties.append(k)
        nbrs[a].add(b)
        nbrs[b].add(a)
        for pair in ((a, b), (b, a)):
            boundary.setdefault(pair, set()).update((br.from_bus, br.to_bus))
    return AreaPartition(
        areas,
        area_of,
        tuple(ties),
        {a: frozenset(s) for a, s in nbrs.items()},
        {p: frozenset(s) for p, s in boundary.items()},
    )


def _sort_key(a):
    return (0, a, "") if isinstance(a, (int, np.integer)) else (1, 0, str(a))


def neighbors(partition: AreaPartition, a: Hashable) -> set:
    """Areas joined to ``a`` by at least one tie-line."""
    partition._check(a)
    return set(partition.neighbor_sets[a])


def shared_state_map(partition: AreaPartition, case: NetworkCase) -> dict[tuple, list[int]]:
    """State indices shared by each ordered pair of neighboring areas.

    A state is shared between ``k`` and ``l`` when its bus is an endpoint of a
    ``k``-``l`` tie-line. The slack bus carries no state and is skipped.
    """
    col = case.state_of_bus
    out = {}
    for pair, buses in partition.boundary.items():
        out[pair] = sorted(int(col[i]) for i in buses if col[i] >= 0)
    return out


def local_states(partition: AreaPartition, case: NetworkCase, a: Hashable) -> list[int]:
    """States held by area ``a``: its own buses plus every tie-line endpoint."""
    col = case.state_of_bus
    held = set(partition.buses_of(a))
    for (k, _), buses in partition.boundary.items():
        if k == a:
            held.update(buses)
    return sorted(int(col[i]) for i in held if col[i] >= 0)


def owner_of_state(partition: AreaPartition, case: NetworkCase) -> list:
    return [partition.area_of[i] for i in case.bus_of_state]


def two_hop_closure(partition: AreaPartition, case: NetworkCase, a: Hashable, measurements) -> set[int]:
    """External buses whose angles enter area ``a``'s rows of the gain matrix.

    Returned as dense bus indices. The coupling is taken at bus level (slack
    included): a flow couples its two ends, an injection couples its bus and
    every neighbor of it. The set is empty unless an injection-type
    measurement sits on a tie-line endpoint; with flow-only metering the
    coupling never reaches past the tie-lines.
    """
    from .measurements import INJECTION_KINDS

    partition._check(a)
    tie_ends = set()
    for buses in partition.boundary.values():
        tie_ends |= buses
    ms = list(measurements)
    if not any(m.kind in INJECTION_KINDS and len(m.buses) == 1 and m.buses[0] in tie_ends for m in ms):
        return set()

    adj = case.adjacency()
    own = set(partition.buses_of(a))
    reached = set()
    for m in ms:
        if len(m.buses) == 1:
            group = {m.buses[0]} | adj[m.buses[0]]
        else:
            group = set(m.buses)
        if group & own:
            reached |= group - own
    return reached


def one_hop_boundary(partition: AreaPartition, case: NetworkCase, a: Hashable) -> set[int]:
    """External buses directly tied to area ``a``."""
    partition._check(a)
    out = set()
    for k in partition.tie_lines:
        br = case.branches[k]
        ends = (br.from_bus, br.to_bus)
        areas = [partition.area_of[i] for i in ends]
        if a in areas:
            out.update(i for i in ends if partition.area_of[i] != a)
    return out


def ensure_buses(case: NetworkCase, ids: Iterable[int]) -> None:
    for i in ids:
        if not 0 <= i < case.n_buses:
            raise UnknownBus(f"bus index {i} out of range")
