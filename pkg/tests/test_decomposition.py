import numpy as np
import pytest

from dpsse.central import solve_centralized
from dpsse.measurements import Measurement, MeasurementSet
from dpsse.metrics import eps1
from dpsse.network import Branch, Bus, NetworkCase
from dpsse.problem import make_problem
from dpsse.solvers import DecompositionEstimator
from dpsse.solvers.decomposition import build_subproblems, exchange_borders, solve_area

from conftest import noiseless, path_problem


def _four_bus_two_areas():
    # 1-2 | 3-4 joined by one tie 2-3; flow on the tie metered at bus 2
    case = NetworkCase(
        (Bus(1, True), Bus(2), Bus(3), Bus(4)),
        (Branch(1, 2, 0.1), Branch(2, 3, 0.2), Branch(3, 4, 0.1)),
    )
    ms = MeasurementSet((
        Measurement("flow", (0, 1), 0.5, 0.01),
        Measurement("flow", (1, 2), 0.3, 0.01),
        Measurement("flow", (2, 3), 0.2, 0.01),
        Measurement("injection", (3,), -0.2, 0.01),
    ))
    return make_problem(case, ms, {1: 1, 2: 1, 3: 2, 4: 2})


def test_single_area_equals_centralized(problems):
    p = problems["case14"]
    single = make_problem(p.case, p.measurements)
    sps = build_subproblems(single)
    assert len(sps) == 1 and not sps[0].border_rows and not sps[0].border
    x = solve_area(sps[0], [])
    np.testing.assert_allclose(x, solve_centralized(single.normal_system), rtol=0, atol=1e-10)


def test_tie_flow_lands_in_one_border_set():
    p = _four_bus_two_areas()
    sps = build_subproblems(p)
    tie_row = 1
    in_border = [rows for sp in sps for rows in sp.border_rows.values() if tie_row in rows]
    in_local = [sp for sp in sps if tie_row in sp.local_rows]
    assert len(in_border) == 1 and not in_local


def test_rows_partitioned(problems):
    for p in problems.values():
        sps = build_subproblems(p)
        rows = [r for sp in sps for r in sp.local_rows]
        rows += [r for sp in sps for rs in sp.border_rows.values() for r in rs]
        assert sorted(rows) == list(range(len(p.measurements)))


def test_penalty_limit_pins_border(problems):
    p = problems["case14"]
    sps = build_subproblems(p, omega_x=1e12)
    rng = np.random.default_rng(2)
    # one published value per state, near the operating point
    published = solve_centralized(p.normal_system) + rng.normal(scale=1e-2, size=p.n_states)
    for sp in sps:
        border = np.array([published[s] for _, _, s in sp.border])
        x = solve_area(sp, border)
        pos = [k for k, _, _ in sp.border]
        assert np.abs(x[pos] - border).max() <= 1e-6


def test_local_optimality(problems):
    for name in ("case4", "case14"):
        p = problems[name]
        sps = build_subproblems(p)
        rng = np.random.default_rng(4)
        for sp in sps:
            border = rng.normal(scale=0.1, size=len(sp.border))
            x = solve_area(sp, border)
            assert np.abs(sp.gradient(x, border)).max() <= 1e-9
            # objective never above the previous point with the same borders
            x_prev = rng.normal(scale=0.1, size=x.size)
            assert sp.objective(x, border) <= sp.objective(x_prev, border)


def test_frozen_entries_held(problems):
    p = problems["case14"]
    sp = build_subproblems(p)[0]
    x0 = np.full(len(sp.states), 0.05)
    fixed = np.zeros(len(sp.states), dtype=bool)
    fixed[0] = True
    x = solve_area(sp, np.zeros(len(sp.border)), fixed, x0)
    assert x[0] == 0.05


def test_noiseless_path_fixed_point():
    p = noiseless(path_problem(3, {1: 1, 2: 1, 3: 2}))
    est = DecompositionEstimator(epsilon=1e-12, max_iter=500).fit(p)
    assert np.abs(est.state_ - solve_centralized(p.normal_system)).max() <= 1e-6


def test_exchange_counts():
    p = _four_bus_two_areas()
    sps = build_subproblems(p)
    values = {sp.area: np.arange(len(sp.states), dtype=float) for sp in sps}
    borders, sent = exchange_borders(sps, values)
    # two shared states (buses 2 and 3), sent both ways
    assert sent == 4
    mask = {sp.area: np.ones(len(sp.states), dtype=bool) for sp in sps}
    mask[1][:] = False
    _, sent = exchange_borders(sps, values, mask)
    assert sent == 2


def test_single_area_exchange_is_noop(problems):
    p = problems["case4"]
    sps = build_subproblems(make_problem(p.case, p.measurements))
    borders, sent = exchange_borders(sps, {sps[0].area: np.zeros(len(sps[0].states))})
    assert sent == 0 and borders[sps[0].area].size == 0


def test_single_area_run(problems):
    p = problems["case14"]
    single = make_problem(p.case, p.measurements)
    est = DecompositionEstimator().fit(single)
    assert est.n_iter_ <= 2
    np.testing.assert_allclose(est.state_, solve_centralized(single.normal_system), rtol=0, atol=1e-10)


def test_bundled_4_both_modes(problems):
    p = problems["case4"]
    wosc = DecompositionEstimator().fit(p)
    wsc = DecompositionEstimator(stopping="wsc").fit(p)
    assert wosc.run_.converged and wsc.run_.converged
    assert wsc.n_iter_ <= wosc.n_iter_


def test_freeze_stops_border_traffic(problems):
    p = problems["case14"]
    wosc = DecompositionEstimator().fit(p)
    wsc = DecompositionEstimator(stopping="wsc").fit(p)
    assert not wsc.ledger_.is_empty()
    per_iter = wosc.run_.scalars_sent[0]
    assert np.all(wosc.run_.scalars_sent == per_iter)
    assert wsc.run_.scalars_sent[-1] < per_iter


def test_larger_omega_reduces_bias(problems):
    p = problems["case14"]
    xs = solve_centralized(p.normal_system)
    e_lo = eps1(xs, DecompositionEstimator(omega_x=1e4, max_iter=2000).fit(p).state_)
    e_hi = eps1(xs, DecompositionEstimator(omega_x=1e6, max_iter=2000).fit(p).state_)
    assert e_hi < e_lo
