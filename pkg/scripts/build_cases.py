"""Regenerate the bundled case files under src/dpsse/data.

The IEEE 14 and 118 bus topologies come from the MATPOWER text shipped
next to the JSON files. Truth states are DC power-flow solutions of the
cases' own load/generation data; measurements are the default layout (one
flow per branch plus one injection per bus) with seeded Gaussian noise.
"""

import sys
from pathlib import Path

import numpy as np

from dpsse.io import dc_power_flow, import_matpower, read_matpower_tables, save_case
from dpsse.measurements import NoiseSpec, simulate_measurements
from dpsse.network import Branch, Bus, NetworkCase, make_partition, validate_case

DATA = Path(__file__).resolve().parents[1] / "src" / "dpsse" / "data"
SEED = 42

CASE14_AREAS = {1: [1, 2, 5], 2: [3, 4, 7, 8], 3: [6, 11, 12, 13], 4: [9, 10, 14]}
CASE14_NOTES = (
    "IEEE 14-bus topology (MATPOWER case14). Four-area layout common in "
    "multi-area state estimation studies. Truth = DC power flow of the "
    "case's own dispatch; measurements = all branch flows + all injections, "
    "sigma 0.01 p.u., seed 42."
)

CASE118_AREAS = {
    1: list(range(1, 24)) + list(range(25, 33)) + [113, 114, 115, 117],
    2: list(range(33, 68)),
    3: [24] + list(range(68, 113)) + [116, 118],
}
CASE118_NOTES = (
    "IEEE 118-bus topology (MATPOWER case118, parallel lines merged). Three-zone "
    "split commonly used for the 118-bus system. Truth = DC power flow; measurements = all "
    "branch flows + all injections, sigma 0.01 p.u., seed 42."
)

CASE4_NOTES = (
    "Small 4-bus test system. "
    "Ring 1-2-3-4 with chord 2-4, areas {1,2} and {3,4}. Truth = DC power flow "
    "of the listed injections; all flows + all injections, sigma 0.01, seed 42."
)


def injections_from_tables(case, tables):
    base = tables.get("baseMVA", 100.0)
    p = np.zeros(case.n_buses)
    for row in tables["bus"]:
        p[case.index_of(int(row[0]))] -= row[2] / base
    for row in tables.get("gen", []):
        if len(row) < 8 or row[7] > 0:
            p[case.index_of(int(row[0]))] += row[1] / base
    return p


def write(case, areas, truth, notes, name):
    partition = make_partition(case, {b: a for a, buses in areas.items() for b in buses})
    noise = NoiseSpec(seed=SEED)
    ms = simulate_measurements(case, truth, noise)
    save_case(DATA / f"{name}.json", case, partition, ms, truth, noise, notes)
    print(name, case.n_buses, "buses", len(case.branches), "branches", len(ms), "measurements",
          partition.n_areas, "areas", len(partition.tie_lines), "tie-lines")


def main():
    for name, areas, notes in (("case14", CASE14_AREAS, CASE14_NOTES), ("case118", CASE118_AREAS, CASE118_NOTES)):
        src = DATA / f"{name}.m"
        case = import_matpower(src, name=name)
        truth = dc_power_flow(case, injections_from_tables(case, read_matpower_tables(src)))
        write(case, areas, truth, notes, name)

    case4 = validate_case(NetworkCase(
        tuple(Bus(i, i == 1) for i in range(1, 5)),
        (Branch(1, 2, 0.10), Branch(2, 3, 0.20), Branch(3, 4, 0.10), Branch(4, 1, 0.25), Branch(2, 4, 0.15)),
        name="case4",
    ))
    p = np.array([0.8, -0.5, 0.3, -0.6])
    write(case4, {1: [1, 2], 2: [3, 4]}, dc_power_flow(case4, p), CASE4_NOTES, "case4")


if __name__ == "__main__":
    sys.exit(main())
