"""Case files: the native JSON format and a MATPOWER topology reader.

Native case layout::

    {
      "name": "case14",
      "buses": [{"id": 1, "slack": true}, {"id": 2}, ...],
      "branches": [{"from": 1, "to": 2, "x": 0.05917}, ...],
      "partition": [{"area": 1, "buses": [1, 2, 5]}, ...],
      "measurements": [
        {"kind": "flow", "from": 1, "to": 2, "value": 0.73, "sigma": 0.01},
        {"kind": "injection", "bus": 4, "value": -0.47, "sigma": 0.01},
        ...
      ],
      "truth_state": {"2": -0.087, ...},
      "noise": {"seed": 42, "enabled": true, "sigmas": {"flow": 0.01}}
    }

Bus ids are the user-facing ids; injections are positive into the network.
``partition``, ``truth_state`` and ``noise`` are optional.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ParseError, UnsupportedFormat, ValidationError
from .measurements import Measurement, MeasurementSet, NoiseSpec, build_H
from .network import AreaPartition, Branch, Bus, NetworkCase, make_partition, validate_case
from .problem import EstimationProblem

BUNDLED = ("case4", "case14", "case118")


@dataclass(frozen=True)
class CaseFile:
    case: NetworkCase
    partition: AreaPartition
    measurements: MeasurementSet | None
    truth: np.ndarray | None = None
    noise: NoiseSpec | None = None
    notes: str = ""

    def problem(self) -> EstimationProblem:
        if self.measurements is None:
            raise ValidationError(f"case {self.case.name!r} carries no measurements")
        return EstimationProblem(self.case, self.partition, self.measurements, self.truth)


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled case {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("dpsse") / "data" / f"{name}.json"))


def resolve_case_path(path) -> Path:
    """Accept a file path or the name of a bundled case."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled_path(str(path))
    return p


def load_case(path) -> CaseFile:
    """Read and validate a native JSON case file (or a bundled case name)."""
    p = resolve_case_path(path)
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{p}: invalid JSON at byte offset {exc.pos} (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    try:
        return case_from_dict(doc, default_name=p.stem)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{p}: missing or malformed field: {exc}") from exc


def case_from_dict(doc: dict, default_name: str = "") -> CaseFile:
    buses = tuple(Bus(int(b["id"]), bool(b.get("slack", False))) for b in doc["buses"])
    branches = tuple(Branch(int(b["from"]), int(b["to"]), float(b["x"])) for b in doc["branches"])
    case = validate_case(NetworkCase(buses, branches, name=doc.get("name", default_name)))

    mapping = None
    if doc.get("partition"):
        mapping = {}
        for entry in doc["partition"]:
            for bid in entry["buses"]:
                if int(bid) in mapping:
                    raise ValidationError(f"bus {bid} assigned to more than one area")
                mapping[int(bid)] = entry["area"]
    partition = make_partition(case, mapping)

    ms = None
    if doc.get("measurements"):
        ms = MeasurementSet(tuple(_measurement(case, m) for m in doc["measurements"]))

    truth = None
    if doc.get("truth_state") is not None:
        angles = {int(k): float(v) for k, v in doc["truth_state"].items()}
        truth = np.array([angles[case.original_ids[i]] for i in case.bus_of_state])

    noise = None
    if doc.get("noise") is not None:
        nd = doc["noise"]
        sigmas = dict(NoiseSpec().sigmas)
        sigmas.update(nd.get("sigmas", {}))
        noise = NoiseSpec(int(nd.get("seed", 42)), sigmas, bool(nd.get("enabled", True)))

    return CaseFile(case, partition, ms, truth, noise, doc.get("notes", ""))


def _measurement(case: NetworkCase, m: dict) -> Measurement:
    kind = m["kind"]
    if "bus" in m:
        buses = (case.index_of(int(m["bus"])),)
    else:
        buses = (case.index_of(int(m["from"])), case.index_of(int(m["to"])))
    return Measurement(kind, buses, float(m.get("value", 0.0)), float(m["sigma"]))


def case_to_dict(case: NetworkCase, partition=None, measurements=None, truth=None,
                 noise: NoiseSpec | None = None, notes: str = "") -> dict:
    ids = case.original_ids
    doc = {"name": case.name}
    if notes:
        doc["notes"] = notes
    doc["buses"] = [{"id": ids[b.id], "slack": True} if b.is_slack else {"id": ids[b.id]} for b in case.buses]
    doc["branches"] = [{"from": ids[b.from_bus], "to": ids[b.to_bus], "x": b.reactance} for b in case.branches]
    if partition is not None:
        doc["partition"] = [
            {"area": a, "buses": [ids[i] for i in partition.buses_of(a)]} for a in partition.areas
        ]
    if measurements is not None:
        rows = []
        for m in measurements:
            row = {"kind": m.kind}
            if len(m.buses) == 1:
                row["bus"] = ids[m.buses[0]]
            else:
                row["from"], row["to"] = ids[m.buses[0]], ids[m.buses[1]]
            row["value"] = m.value
            row["sigma"] = m.sigma
            rows.append(row)
        doc["measurements"] = rows
    if truth is not None:
        doc["truth_state"] = {str(ids[i]): float(v) for i, v in zip(case.bus_of_state, truth)}
    if noise is not None:
        doc["noise"] = {"seed": noise.seed, "enabled": noise.enabled, "sigmas": dict(noise.sigmas)}
    return doc


def save_case(path, *args, **kwargs) -> None:
    Path(path).write_text(json.dumps(case_to_dict(*args, **kwargs), indent=1) + "\n")


# --- MATPOWER ---------------------------------------------------------------

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def read_matpower_tables(path) -> dict:
    """Parse the numeric tables (``mpc.bus``, ``mpc.branch``, ...) of a
    MATPOWER case file into arrays; scalars such as ``baseMVA`` come back
    as floats."""
    text = Path(path).read_text()
    if "mpc" not in text:
        raise UnsupportedFormat(f"{path}: not a MATPOWER version 2 case file")
    out: dict = {}
    for name, value in _SCALAR_RE.findall(text):
        out[name] = float(value)
    for name, body in _MATRIX_RE.findall(text):
        rows = []
        for line in body.splitlines():
            line = line.split("%", 1)[0].strip().rstrip(";").strip()
            if not line:
                continue
            for chunk in line.split(";"):
                if chunk.strip():
                    try:
                        rows.append([float(v) for v in chunk.split()])
                    except ValueError as exc:
                        raise ParseError(f"{path}: bad number in mpc.{name}: {exc}") from exc
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ParseError(f"{path}: ragged rows in mpc.{name}")
        out[name] = np.array(rows, dtype=float)
    return out


def import_matpower(path, name: str | None = None) -> NetworkCase:
    """Topology of a MATPOWER case: buses, branch reactances and the slack.

    Out-of-service branches are dropped and parallel branches are merged
    into one equivalent reactance. Measurements are not imported.
    """
    tables = read_matpower_tables(path)
    for table in ("bus", "branch"):
        if table not in tables or tables[table].size == 0:
            raise ParseError(f"{path}: missing mpc.{table} table")
    bus, branch = tables["bus"], tables["branch"]
    buses = tuple(Bus(int(r[0]), int(r[1]) == 3) for r in bus)

    susceptance: dict[tuple[int, int], float] = {}
    for r in branch:
        if branch.shape[1] > 10 and r[10] == 0:
            continue
        f, t, x = int(r[0]), int(r[1]), float(r[3])
        key = (f, t) if (t, f) not in susceptance else (t, f)
        susceptance[key] = susceptance.get(key, 0.0) + 1.0 / x
    branches = tuple(Branch(f, t, 1.0 / b) for (f, t), b in susceptance.items())
    return validate_case(NetworkCase(buses, branches, name=name or Path(path).stem))


def dc_power_flow(case: NetworkCase, injections) -> np.ndarray:
    """Reduced angle vector solving ``B theta = P`` with the slack at zero.

    ``injections`` is per dense bus, in per-unit; the slack entry is ignored.
    """
    rows = [Measurement("injection", (b.id,), 0.0, 1.0) for b in case.buses if not b.is_slack]
    B = build_H(case, rows)
    P = np.asarray(injections, dtype=float)[case.bus_of_state]
    return np.linalg.solve(B, P)
