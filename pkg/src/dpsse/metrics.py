"""Performance indicators of a distributed run against the centralized oracle."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DimensionMismatch
from .measurements import evaluate_objective

#: Column order shared by the JSON object and the CSV row of a summary.
SUMMARY_COLUMNS = ("Iter", "eps1", "eps2", "CB", "OT", "OV", "scalars_transmitted")
TABLE_COLUMNS = ("case", "method", "mode") + SUMMARY_COLUMNS + ("t_delay", "status", "error")


def _pair(x_cent, x_dist):
    a = np.asarray(x_cent, dtype=float).ravel()
    b = np.asarray(x_dist, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"state vectors differ in length: {a.size} vs {b.size}")
    return a, b


def eps1(x_cent, x_dist) -> float:
    """Sum of absolute deviations from the centralized solution."""
    a, b = _pair(x_cent, x_dist)
    return float(np.abs(a - b).sum())


def eps2(x_cent, x_dist) -> float:
    """Largest absolute deviation from the centralized solution."""
    a, b = _pair(x_cent, x_dist)
    return float(np.abs(a - b).max()) if a.size else 0.0


def overall_time(t_delay: float, iterations: int, cb: float) -> float:
    """``t_delay * iterations + cb``: simulated transmission delay plus compute."""
    return t_delay * iterations + cb


def objective_value(x, H, R, z) -> float:
    """WLS objective at ``x``."""
    return evaluate_objective(x, (z, R), H)


def measure_cb(run) -> tuple[float, float]:
    """``(serial, parallel)`` compute burden of a run, in seconds.

    Serial adds every area's time; parallel charges each iteration only
    for its slowest area, as if areas computed side by side.
    """
    t = np.asarray(run.area_seconds, dtype=float)
    if t.size == 0:
        return 0.0, 0.0
    return float(t.sum()), float(t.max(axis=1).sum())


@dataclass(frozen=True)
class RunSummary:
    """One table row: iteration count, oracle errors, timing and objective."""

    method: str
    mode: str
    Iter: int
    eps1: float
    eps2: float
    CB: float
    OT: float
    OV: float
    scalars_transmitted: int
    t_delay: float = 0.5
    status: str = "converged"
    error: str = ""
    CB_serial: float = 0.0
    case: str = ""

    @classmethod
    def from_run(cls, run, x_cent, problem, t_delay: float = 0.5, case: str = "", timing: bool = True):
        """Summarize a finished run. ``timing=False`` zeroes CB for reproducible output."""
        serial, parallel = measure_cb(run) if timing else (0.0, 0.0)
        x = run.estimate
        return cls(
            method=run.method,
            mode=run.mode,
            Iter=int(run.n_iter),
            eps1=eps1(x_cent, x),
            eps2=eps2(x_cent, x),
            CB=parallel,
            OT=overall_time(t_delay, int(run.n_iter), parallel),
            OV=evaluate_objective(x, problem.measurements, problem.H),
            scalars_transmitted=run.scalars_transmitted,
            t_delay=float(t_delay),
            status=run.status,
            CB_serial=serial,
            case=case,
        )

    @classmethod
    def failed(cls, method, mode, error, t_delay=0.5, case="", status="error"):
        nan = math.nan
        return cls(method, mode, 0, nan, nan, nan, nan, nan, 0, float(t_delay), status, str(error), nan, case)

    def ordered(self) -> dict:
        """Summary columns first, in table order, then the bookkeeping fields."""
        d = asdict(self)
        out = {k: d[k] for k in SUMMARY_COLUMNS}
        out.update({k: v for k, v in d.items() if k not in out})
        return out

    def to_json(self) -> str:
        return json.dumps(self.ordered(), allow_nan=True)

    def csv_row(self) -> list[str]:
        d = asdict(self)
        return [_fmt(d[k]) for k in TABLE_COLUMNS]


def _fmt(v) -> str:
    # repr keeps the float exact, so OT = t_delay * Iter + CB survives a round trip
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summaries_to_csv(rows, header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        for line in header_comment.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_table(path) -> list[dict]:
    """Parse a ``table.csv`` back into typed dicts (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for rec in csv.DictReader(lines):
        row = dict(rec)
        row["Iter"] = int(row["Iter"])
        row["scalars_transmitted"] = int(row["scalars_transmitted"])
        for k in ("eps1", "eps2", "CB", "OT", "OV", "t_delay"):
            row[k] = float(row[k])
        out.append(row)
    return out


@dataclass
class IterationTrace:
    """Per-iteration record of a run, ready to be written as CSV.

    ``states`` holds the owner-copy estimate after each iteration.
    """

    states: np.ndarray
    delta_norm: np.ndarray
    scalars_sent: np.ndarray
    compute_ms: np.ndarray
    frozen_count: np.ndarray
    iteration: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.states)
        if self.iteration is None:
            self.iteration = np.arange(1, n + 1)
        for name in ("delta_norm", "scalars_sent", "compute_ms", "frozen_count", "iteration"):
            if len(getattr(self, name)) != n:
                raise DimensionMismatch(f"trace column {name} has the wrong length")

    def __len__(self):
        return len(self.states)

    @classmethod
    def from_run(cls, run, timing: bool = True):
        if timing and run.area_seconds.size:
            ms = run.area_seconds.max(axis=1) * 1e3
        else:
            ms = np.zeros(run.n_iter)
        return cls(
            states=run.trajectory,
            delta_norm=run.delta_norms,
            scalars_sent=run.scalars_sent,
            compute_ms=ms,
            frozen_count=run.frozen_counts,
        )
