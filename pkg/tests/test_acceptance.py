"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (shown in the terminal summary)
before asserting, so a full run always lists every criterion. Reference
iteration counts from the literature are logged next to measured ones and
never asserted.
"""

import time

import numpy as np
import pytest

from dpsse.central import solve_centralized
from dpsse.exceptions import DivergenceGuard
from dpsse.harness import ExperimentPlan, run_experiments
from dpsse.measurements import evaluate_objective
from dpsse.metrics import eps1, overall_time, read_table
from dpsse.solvers import AdmmEstimator, DecompositionEstimator, GossipEstimator, MatrixSplittingEstimator
from dpsse.solvers.gossip import tau_upper_bound
from dpsse.solvers.matrix_splitting import build_split, spectral_radius

from conftest import noiseless

REPORT: list[str] = []
CASES = ("case4", "case14", "case118")
SMALL = ("case4", "case14")

# criterion 2 caps, per method
CAPS = {"matrix-splitting": 5000, "gossip": 20000, "decomposition": 200, "admm": 2000}
FACTORY = {
    "matrix-splitting": lambda **kw: MatrixSplittingEstimator(**kw),
    "gossip": lambda **kw: GossipEstimator(seed=42, tau_fraction=0.5, **kw),
    "decomposition": lambda **kw: DecompositionEstimator(**kw),
    "admm": lambda **kw: AdmmEstimator(**kw),
}
REFERENCE_ITERS = {
    "case4": {"matrix-splitting": 110, "gossip": 467, "decomposition": 16, "admm": 70},
    "case14": {"matrix-splitting": 1024, "gossip": 2217, "decomposition": 40, "admm": 245},
}

_elapsed_small = [0.0]


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    REPORT.append(line)
    print(line)
    return ok


class Runs:
    """Every (case, method, mode) run at the criterion-2 settings, computed once."""

    def __init__(self, problems):
        self.problems = problems
        self.oracle = {c: solve_centralized(problems[c].normal_system) for c in CASES}
        self.cache = {}
        self.seconds = {}

    def get(self, case, method, mode):
        key = (case, method, mode)
        if key not in self.cache:
            t0 = time.perf_counter()
            est = FACTORY[method](epsilon=1e-6, stopping=mode, max_iter=CAPS[method])
            est.fit(self.problems[case])
            self.seconds[key] = time.perf_counter() - t0
            if case in SMALL:
                _elapsed_small[0] += self.seconds[key]
            self.cache[key] = est
        return self.cache[key]


@pytest.fixture(scope="module")
def runs(problems):
    return Runs(problems)


def test_criterion_1_oracle_equivalence(problems):
    details, ok = [], True
    for name in CASES:
        p = problems[name]
        t0 = time.perf_counter()
        x = solve_centralized(p.normal_system)
        elapsed = time.perf_counter() - t0
        # independent path: SVD-based least squares on the whitened system
        sw = np.sqrt(p.weights)
        x_ref = np.linalg.lstsq(sw[:, None] * p.H, sw * p.z, rcond=None)[0]
        diff = np.abs(x - x_ref).max()
        grad = np.abs(p.H.T @ (p.weights * (p.z - p.H @ x))).max()
        good = diff <= 1e-10 and grad <= 1e-9 and elapsed < 1.0
        ok &= good
        details.append(f"{name} |dx|={diff:.1e} grad={grad:.1e} t={elapsed * 1e3:.1f}ms")
    record(1, ok, "; ".join(details))
    assert ok


def test_criterion_2_convergence(runs):
    details, ok = [], True
    for case in SMALL:
        for method in CAPS:
            est = runs.get(case, method, "wosc")
            e1 = eps1(runs.oracle[case], est.state_)
            good = e1 <= 1e-3
            ok &= good
            ref = REFERENCE_ITERS[case][method]
            details.append(f"{case}/{method} eps1={e1:.2e} iter={est.n_iter_} (ref {ref}){'' if good else ' X'}")
    t0 = time.perf_counter()
    for method in CAPS:
        est = runs.get("case118", method, "wosc")
        details.append(f"case118/{method} eps1={eps1(runs.oracle['case118'], est.state_):.2e} "
                       f"iter={est.n_iter_} {est.run_.status}")
    t118 = sum(v for (c, _, _), v in runs.seconds.items() if c == "case118") + time.perf_counter() - t0
    ok &= t118 < 300
    details.append(f"case118 time {t118:.1f}s")
    record(2, ok, "; ".join(details))
    assert ok


def test_criterion_3_overall_time_identity(tmp_path):
    arith = (
        overall_time(0.5, 16, 0.77) == pytest.approx(8.77, abs=1e-12)
        and overall_time(0.5, 40, 2.83) == pytest.approx(22.83, abs=1e-12)
        and abs(overall_time(0.5, 245, 0.4282) - 122.93) <= 0.005
    )
    plan = ExperimentPlan(cases=["case4"], out=str(tmp_path))
    run_experiments(plan)
    rows = read_table(tmp_path / "table.csv")
    exact = all(r["OT"] == 0.5 * r["Iter"] + r["CB"] for r in rows)
    ok = arith and exact and len(rows) == 8
    record(3, ok, f"table rows {len(rows)}, identity exact={exact}, reference arithmetic={arith}")
    assert ok


def test_criterion_4_stopping_dominance(runs):
    details, ok = [], True
    for case in CASES:
        for method in CAPS:
            a = runs.get(case, method, "wosc").run_
            b = runs.get(case, method, "wsc").run_
            good = b.n_iter <= a.n_iter and b.scalars_transmitted <= a.scalars_transmitted
            if not b.ledger.is_empty():
                good &= b.scalars_transmitted < a.scalars_transmitted
            ok &= good
            details.append(f"{case}/{method} iter {a.n_iter}->{b.n_iter} "
                           f"scalars {a.scalars_transmitted}->{b.scalars_transmitted}{'' if good else ' X'}")
    a = runs.get("case118", "admm", "wosc").run_
    b = runs.get("case118", "admm", "wsc").run_
    reduction = 1 - b.n_iter / a.n_iter
    ok &= reduction > 0.10
    details.append(f"case118 admm reduction {reduction:.0%} (reference 38%)")
    record(4, ok, "; ".join(details))
    assert ok


def _frozen_ok(run):
    traj = run.slot_trajectory
    for k in np.flatnonzero(run.ledger.frozen):
        t = run.ledger.stamp[k]
        if not np.all(traj[t - 1:, k] == traj[t - 1, k]):
            return False
    return bool(np.all(np.diff(run.frozen_counts) >= 0))


def test_criterion_5_freeze_semantics(runs, problems):
    details, ok = [], True
    for case in SMALL:
        for method in CAPS:
            run = runs.get(case, method, "wsc").run_
            frozen_ok = _frozen_ok(run)
            # lower the freeze tolerance until nothing freezes before termination
            tol = 1e-6
            while True:
                est = FACTORY[method](epsilon=1e-6, stopping="wsc", max_iter=CAPS[method], freeze_epsilon=tol)
                est.fit(problems[case])
                if est.ledger_.is_empty():
                    break
                tol = tol / 100 if tol > 1e-30 else 0.0
            ref = runs.get(case, method, "wosc").run_
            same = est.run_.slot_trajectory.tobytes() == ref.slot_trajectory.tobytes()
            good = frozen_ok and same
            ok &= good
            details.append(f"{case}/{method} frozen={run.ledger.frozen_count} immutable={frozen_ok} "
                           f"identical@{tol:g}={same}")
    record(5, ok, "; ".join(details))
    assert ok


def test_criterion_6_admm_consensus(problems):
    details, ok = [], True
    for case in CASES:
        est = AdmmEstimator(epsilon=1e-6, max_iter=CAPS["admm"], track=True).fit(problems[case])
        res = est.consensus_residual_
        anti = float(est.dual_antisymmetry_.max())
        good = res <= 1e-6 and anti <= 1e-12
        ok &= good
        details.append(f"{case} residual={res:.1e} antisymmetry={anti:.1e}")
    record(6, ok, "; ".join(details))
    assert ok


def test_criterion_7_convergence_guards(problems):
    rho_fixture = spectral_radius(build_split(np.array([[2.0, 1.0], [1.0, 2.0]])))
    ok = abs(rho_fixture - 2 / 3) <= 1e-12
    details = [f"fixture rho={rho_fixture:.12f}"]
    for case in CASES:
        est = MatrixSplittingEstimator(max_iter=1).fit(problems[case])
        ok &= est.spectral_radius_ < 1
        details.append(f"{case} rho={est.spectral_radius_:.6f}")
    p = problems["case14"]
    tau = 1.5 * tau_upper_bound(p.normal_system.L)
    try:
        GossipEstimator(tau=tau, allow_unstable=True, schedule="synchronous", max_iter=20000).fit(p)
        fired = False
    except DivergenceGuard as exc:
        fired = exc.run is not None
        details.append(f"gossip 1.5x bound diverged at iteration {exc.run.n_iter}")
    ok &= fired
    record(7, ok, "; ".join(details))
    assert ok


NOISELESS_CAPS = {"matrix-splitting": 200000, "gossip": 2000000, "decomposition": 20000, "admm": 20000}


def test_criterion_8_noiseless_recovery(problems):
    # tolerance 1e-6 on eps1 needs a stopping epsilon well below 1e-6
    details, ok = [], True
    for case in SMALL:
        p = noiseless(problems[case])
        for method in CAPS:
            t0 = time.perf_counter()
            est = FACTORY[method](epsilon=1e-13, stopping="wosc", max_iter=NOISELESS_CAPS[method]).fit(p)
            _elapsed_small[0] += time.perf_counter() - t0
            e1 = eps1(p.truth, est.state_)
            ov = evaluate_objective(est.state_, p.measurements, p.H)
            good = e1 <= 1e-6 and ov <= 1e-12
            ok &= good
            details.append(f"{case}/{method} eps1={e1:.1e} OV={ov:.1e}")
    record(8, ok, "; ".join(details))
    assert ok


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    kw = dict(cases=["case14"], seed=42, timing="off")
    run_experiments(ExperimentPlan(out=str(tmp_path / "a"), **kw))
    run_experiments(ExperimentPlan(out=str(tmp_path / "b"), **kw))
    _elapsed_small[0] += time.perf_counter() - t0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    fast = _elapsed_small[0] < 60
    ok = same and len(files) == 9 and fast
    record(9, ok, f"{len(files)} csv files byte-identical={same}; case4+case14 work {_elapsed_small[0]:.1f}s")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
