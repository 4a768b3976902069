import numpy as np
import pytest

from dpsse.io import load_case
from dpsse.measurements import Measurement, MeasurementSet, simulate_measurements, NoiseSpec
from dpsse.network import Branch, Bus, NetworkCase
from dpsse.problem import make_problem


def two_bus_case(x=0.5):
    return NetworkCase((Bus(1, True), Bus(2)), (Branch(1, 2, x),))


def two_bus_problem():
    # flow P12 and injection at bus 2, both sigma 0.1, consistent with theta_2 = -0.2
    case = two_bus_case()
    ms = MeasurementSet((
        Measurement("flow", (0, 1), 0.4, 0.1),
        Measurement("injection", (1,), -0.4, 0.1),
    ))
    return make_problem(case, ms)


def path_case(n=3, x=0.1):
    buses = tuple(Bus(i, i == 1) for i in range(1, n + 1))
    branches = tuple(Branch(i, i + 1, x * (1 + 0.5 * (i % 2))) for i in range(1, n))
    return NetworkCase(buses, branches)


def noiseless(problem):
    """Same problem with every measurement replaced by its exact value at the truth."""
    z = problem.H @ problem.truth
    return problem.with_measurements(problem.measurements.with_values(z))


def path_problem(n=3, areas=None, noise=False):
    case = path_case(n)
    from dpsse.network import validate_case

    vc = validate_case(case)
    truth = np.linspace(-0.05, -0.05 * (n - 1), n - 1)
    ms = simulate_measurements(vc, truth, NoiseSpec(seed=7, enabled=noise))
    return make_problem(case, ms, areas, truth)


@pytest.fixture(scope="session")
def bundled():
    return {name: load_case(name) for name in ("case4", "case14", "case118")}


@pytest.fixture(scope="session")
def problems(bundled):
    return {name: cf.problem() for name, cf in bundled.items()}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
