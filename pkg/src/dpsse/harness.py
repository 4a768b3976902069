"""Experiment matrix: every (case, method, mode) run against one oracle per case."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .central import solve_centralized
from .exceptions import DivergenceGuard, DPSSEError, ValidationError
from .io import load_case, resolve_case_path
from .metrics import IterationTrace, RunSummary, summaries_to_csv
from .solvers import ESTIMATORS
from .stopping import MODES

METHODS = tuple(ESTIMATORS)
DISTRIBUTED = tuple(m for m in METHODS if m != "central")
TIMING = ("wall", "off")

# estimator keyword for each plan-level method parameter
_PARAMS = {
    "matrix-splitting": ("alpha",),
    "gossip": ("tau", "tau_fraction", "seed"),
    "decomposition": ("omega_x",),
    "admm": ("c",),
}


@dataclass
class ExperimentPlan:
    """Cases, methods, modes and shared solver settings of one experiment matrix.

    ``max_iter`` may be a single cap or a ``{method: cap}`` mapping; unset
    methods keep their estimator default. ``timing="off"`` reports zero
    compute time so outputs depend only on the inputs and the seed.
    """

    cases: list
    methods: list = field(default_factory=lambda: list(DISTRIBUTED))
    modes: list = field(default_factory=lambda: list(MODES))
    alpha: float = 1.0
    tau: float | None = None
    tau_fraction: float = 0.5
    omega_x: float = 1e4
    c: float = 1.0
    epsilon: float = 1e-6
    t_delay: float = 0.5
    seed: int = 42
    max_iter: int | dict | None = None
    out: str = "results"
    timing: str = "wall"

    def __post_init__(self):
        if isinstance(self.cases, (str, os.PathLike)):
            self.cases = [self.cases]
        self.cases = [str(c) for c in self.cases]
        for c in self.cases:
            if not resolve_case_path(c).exists():
                raise ValidationError(f"case file not found: {c}")
        for m in self.methods:
            if m not in ESTIMATORS:
                raise ValidationError(f"unknown method {m!r}; choose from {METHODS}")
        for m in self.modes:
            if m not in MODES:
                raise ValidationError(f"unknown stopping mode {m!r}; choose from {MODES}")
        if self.timing not in TIMING:
            raise ValidationError(f"timing must be one of {TIMING}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.t_delay < 0:
            raise ValidationError("t_delay must be non-negative")
        if self.alpha < 0:
            raise ValidationError("alpha must be non-negative")
        if not 0 < self.tau_fraction < 1:
            raise ValidationError("tau_fraction must lie in (0, 1)")
        if self.tau is not None and not self.tau > 0:
            raise ValidationError("tau must be positive")
        if not self.omega_x > 0 or not self.c > 0:
            raise ValidationError("omega_x and c must be positive")

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"{path}: unknown plan keys {sorted(unknown)}")
        # relative case paths are taken from the plan's directory
        cases = doc.get("cases", [])
        cases = [cases] if isinstance(cases, str) else cases
        doc["cases"] = [c if Path(c).is_absolute() or not (path.parent / c).exists() else str(path.parent / c)
                        for c in cases]
        return cls(**doc)

    def cap(self, method):
        if isinstance(self.max_iter, dict):
            return self.max_iter.get(method)
        return self.max_iter

    def estimator(self, method, mode):
        kwargs = {}
        if method != "central":
            kwargs = {"epsilon": self.epsilon, "stopping": mode}
            cap = self.cap(method)
            if cap is not None:
                kwargs["max_iter"] = int(cap)
        for p in _PARAMS.get(method, ()):
            kwargs[p] = getattr(self, p)
        return ESTIMATORS[method](**kwargs)


def oracle_checksum(x) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(trace: IterationTrace) -> str:
    n = trace.states.shape[1] if trace.states.ndim == 2 else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", *(f"state_{i}" for i in range(n)), "delta_norm", "scalars_sent", "compute_ms",
                "frozen_count"])
    for k in range(len(trace)):
        w.writerow([
            int(trace.iteration[k]),
            *(repr(float(v)) for v in trace.states[k]),
            repr(float(trace.delta_norm[k])),
            int(trace.scalars_sent[k]),
            repr(float(trace.compute_ms[k])),
            int(trace.frozen_count[k]),
        ])
    return buf.getvalue()


def emit_trace(trace: IterationTrace, path) -> Path:
    """Write ``trace`` as CSV (one row per iteration) and return the path."""
    path = Path(path)
    _atomic_write(path, trace_csv(trace))
    return path


def run_one(problem, method, mode, plan: ExperimentPlan, x_cent, case_name=""):
    """Fit one estimator and summarize it; errors become a failed summary."""
    timing = plan.timing == "wall"
    try:
        est = plan.estimator(method, mode).fit(problem)
    except DivergenceGuard as exc:
        if exc.run is None:
            return RunSummary.failed(method, mode, exc, plan.t_delay, case_name, "diverged"), None
        s = RunSummary.from_run(exc.run, x_cent, problem, plan.t_delay, case_name, timing)
        return _with_error(s, exc), IterationTrace.from_run(exc.run, timing)
    except (DPSSEError, ValueError, ArithmeticError) as exc:
        return RunSummary.failed(method, mode, exc, plan.t_delay, case_name), None
    if method == "central":
        # one exact solve; the mode column does not apply
        est.run_.mode = mode
    return (RunSummary.from_run(est.run_, x_cent, problem, plan.t_delay, case_name, timing),
            IterationTrace.from_run(est.run_, timing))


def _with_error(s: RunSummary, exc) -> RunSummary:
    return replace(s, error=str(exc))


def run_experiments(plan: ExperimentPlan, out=None) -> list[RunSummary]:
    """Run the full matrix and write traces, per-run summaries and ``table.csv``.

    Output layout under ``out`` (default ``plan.out``)::

        table.csv
        <case>/<method>_<mode>.csv     (trace)
        <case>/<method>_<mode>.json    (summary)
    """
    out = Path(out if out is not None else plan.out)
    rows, header = [], []
    for case_path in plan.cases:
        cf = load_case(case_path)
        name = cf.case.name or Path(case_path).stem
        problem = cf.problem()
        x_cent = solve_centralized(problem.normal_system)
        header.append(f"oracle {name} n_states={x_cent.size} sha256={oracle_checksum(x_cent)}")
        for method in plan.methods:
            for mode in plan.modes:
                summary, trace = run_one(problem, method, mode, plan, x_cent, name)
                stem = f"{method}_{mode}"
                _atomic_write(out / name / f"{stem}.json", summary.to_json() + "\n")
                if trace is not None:
                    emit_trace(trace, out / name / f"{stem}.csv")
                rows.append(summary)
    header.append(f"epsilon={plan.epsilon!r} t_delay={plan.t_delay!r} seed={plan.seed} timing={plan.timing}")
    _atomic_write(out / "table.csv", summaries_to_csv(rows, "\n".join(header)))
    return rows
