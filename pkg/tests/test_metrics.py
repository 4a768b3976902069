import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dpsse.central import solve_centralized
from dpsse.exceptions import DimensionMismatch
from dpsse.measurements import evaluate_objective
from dpsse.metrics import (
    SUMMARY_COLUMNS, IterationTrace, RunSummary, eps1, eps2, measure_cb, objective_value, overall_time,
)
from dpsse.solvers import AdmmEstimator, DecompositionEstimator, GossipEstimator, MatrixSplittingEstimator

from conftest import noiseless


def test_eps_examples():
    a, b = [0.1, -0.2], [0.12, -0.25]
    assert eps1(a, a) == 0.0 and eps2(a, a) == 0.0
    assert eps1(a, b) == pytest.approx(0.07)
    assert eps2(a, b) == pytest.approx(0.05)
    assert eps1([0.3], [0.1]) == eps2([0.3], [0.1])
    with pytest.raises(DimensionMismatch):
        eps1([1.0], [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        eps2([1.0], [1.0, 2.0])


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=st.floats(-10, 10)), arrays(np.float64, n, elements=st.floats(-10, 10)))))
def test_eps_ordering(pair):
    a, b = pair
    e1, e2 = eps1(a, b), eps2(a, b)
    assert e1 >= e2 >= 0
    assert e1 <= a.size * e2 * (1 + 1e-12)


def test_overall_time_examples():
    assert overall_time(0.5, 16, 0.77) == pytest.approx(8.77, abs=1e-12)
    assert overall_time(0.5, 40, 2.83) == pytest.approx(22.83, abs=1e-12)
    assert overall_time(0.5, 245, 0.4282) == pytest.approx(122.93, abs=0.005)
    assert overall_time(0.0, 40, 2.83) == 2.83
    assert overall_time(0.5, 0, 1.25) == 1.25


def test_objective_value_delegates(problems):
    p = problems["case14"]
    x = solve_centralized(p.normal_system)
    assert objective_value(x, p.H, p.R, p.z) == evaluate_objective(x, p.measurements, p.H)


def test_objective_value_noiseless(problems):
    p = noiseless(problems["case14"])
    x = solve_centralized(p.normal_system)
    assert objective_value(x, p.H, p.R, p.z) <= 1e-18


class _Run:
    def __init__(self, seconds):
        self.area_seconds = np.asarray(seconds, dtype=float)


def test_measure_cb_definition():
    serial, parallel = measure_cb(_Run([[0.003, 0.001]]))
    assert serial == pytest.approx(0.004)
    assert parallel == pytest.approx(0.003)
    serial, parallel = measure_cb(_Run([[0.002], [0.005]]))
    assert serial == parallel


@pytest.mark.parametrize("est", [MatrixSplittingEstimator(), GossipEstimator(), DecompositionEstimator(),
                                 AdmmEstimator()])
def test_summary_invariants(problems, est):
    for name in ("case4", "case14"):
        p = problems[name]
        xs = solve_centralized(p.normal_system)
        run = est.fit(p).run_
        s = RunSummary.from_run(run, xs, p, t_delay=0.5, case=name)
        assert s.OT == 0.5 * s.Iter + s.CB
        assert s.eps1 >= s.eps2 >= 0
        assert s.Iter >= 1
        assert s.CB <= s.CB_serial
        assert s.OV >= evaluate_objective(xs, p.measurements, p.H) - 1e-9


def test_summary_serialization(problems):
    p = problems["case4"]
    run = AdmmEstimator().fit(p).run_
    s = RunSummary.from_run(run, solve_centralized(p.normal_system), p)
    doc = json.loads(s.to_json())
    assert tuple(doc)[:len(SUMMARY_COLUMNS)] == SUMMARY_COLUMNS
    assert doc["OT"] == doc["t_delay"] * doc["Iter"] + doc["CB"]
    row = s.csv_row()
    assert float(row[7]) == s.OT


def test_trace_from_run(problems):
    run = AdmmEstimator(stopping="wsc").fit(problems["case4"]).run_
    tr = IterationTrace.from_run(run)
    assert len(tr) == run.n_iter
    assert tr.iteration.tolist() == list(range(1, run.n_iter + 1))
    np.testing.assert_array_equal(tr.states[-1], run.estimate)
    off = IterationTrace.from_run(run, timing=False)
    assert not off.compute_ms.any()
