"""Parameter sweeps over the coupled loop and transition detection.

A sweep varies one or two of ``alpha``, ``beta``, ``gamma`` or ``scale``
(the RST attribute scale) and runs :func:`cogran.engine.run_coupled` at every
grid point, optionally several times with derived seeds. Points never share
state, so they may run in parallel; results are assembled by point index.
"""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from joblib import Parallel, delayed

from .dataset import Dataset
from .engine import CouplingParams, RegulatorSpec, RstRegulator, RunTrace, run_coupled

__all__ = [
    "AXIS_NAMES",
    "SweepSpec",
    "SweepCell",
    "SweepResult",
    "TransitionReport",
    "point_seed",
    "run_point",
    "run_sweep",
    "aggregate_mean_ng",
    "fluctuation",
    "detect_transition",
    "parse_axis",
    "write_sweep_csv",
    "write_aggregate_csv",
    "write_report_csv",
    "read_aggregate_csv",
]

AXIS_NAMES = ("alpha", "beta", "gamma", "scale")


def _axis(axis) -> tuple[str, tuple[float, ...]]:
    name, values = axis
    if name not in AXIS_NAMES:
        raise ValueError(f"unknown sweep parameter {name!r}; expected one of {AXIS_NAMES}")
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError(f"axis {name!r} has no values")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"axis {name!r} has non-finite values")
    return name, values


@dataclass(frozen=True)
class SweepSpec:
    params: CouplingParams
    regulator: RegulatorSpec
    axis1: tuple[str, tuple[float, ...]]
    axis2: tuple[str, tuple[float, ...]] | None = None
    repetitions: int = 1
    seed: int = 0
    som_epochs: int = 20

    def __post_init__(self):
        object.__setattr__(self, "axis1", _axis(self.axis1))
        if self.axis2 is not None:
            object.__setattr__(self, "axis2", _axis(self.axis2))
            if self.axis2[0] == self.axis1[0]:
                raise ValueError("the two sweep axes must name different parameters")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for name, _ in filter(None, (self.axis1, self.axis2)):
            if name == "scale" and not isinstance(self.regulator, RstRegulator):
                raise ValueError("a 'scale' axis needs the rst regulator")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.axis1[1]), (len(self.axis2[1]) if self.axis2 else 1)

    def point(self, i: int, j: int = 0) -> tuple[CouplingParams, RegulatorSpec]:
        """Parameters and regulator for cell ``(i, j)``."""
        p, reg = self.params, self.regulator
        settings = [(self.axis1[0], self.axis1[1][i])]
        if self.axis2:
            settings.append((self.axis2[0], self.axis2[1][j]))
        for name, value in settings:
            if name == "scale":
                reg = replace(reg, scales=(int(round(value)),))
            else:
                p = p.replace(**{name: value})
        return p, reg


def point_seed(seed: int, i: int, j: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), i, j, rep]).generate_state(1)[0])


@dataclass(frozen=True)
class SweepCell:
    i: int
    j: int
    axis1_value: float
    axis2_value: float | None
    traces: tuple[RunTrace, ...]
    seeds: tuple[int, ...]

    @property
    def completed(self) -> tuple[RunTrace, ...]:
        return tuple(t for t in self.traces if t.completed)

    @property
    def failures(self) -> tuple[str, ...]:
        return tuple(t.diagnostic or "incomplete" for t in self.traces if not t.completed)

    @property
    def missing(self) -> bool:
        return not self.completed

    def _pool(self, attr: str) -> np.ndarray:
        parts = [getattr(t, attr) for t in self.completed]
        return np.concatenate(parts) if parts else np.array([])

    @property
    def mean_ng(self) -> float:
        pool = self._pool("n_actual")
        return float(pool.mean()) if pool.size else math.nan

    @property
    def sd_ng(self) -> float:
        pool = self._pool("n_actual")
        return float(pool.std()) if pool.size else math.nan

    @property
    def mean_e(self) -> float:
        pool = self._pool("errors")
        return float(pool.mean()) if pool.size else math.nan


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    cells: tuple[SweepCell, ...] = field(default=())

    @property
    def two_axis(self) -> bool:
        return self.spec.axis2 is not None

    def cell(self, i: int, j: int = 0) -> SweepCell:
        return self.cells[i * self.spec.shape[1] + j]

    def grid(self, stat: str = "mean_ng") -> np.ndarray:
        n1, n2 = self.spec.shape
        return np.array([getattr(c, stat) for c in self.cells]).reshape(n1, n2)


def run_point(spec: SweepSpec, train: Dataset, test: Dataset, i: int, j: int = 0, rep: int = 0) -> RunTrace:
    p, reg = spec.point(i, j)
    return run_coupled(train, test, p, reg, seed=point_seed(spec.seed, i, j, rep), som_epochs=spec.som_epochs)


def run_sweep(spec: SweepSpec, train: Dataset, test: Dataset, n_jobs: int | None = None) -> SweepResult:
    n1, n2 = spec.shape
    jobs = [(i, j, r) for i in range(n1) for j in range(n2) for r in range(spec.repetitions)]
    if n_jobs in (None, 1):
        traces = [run_point(spec, train, test, i, j, r) for i, j, r in jobs]
    else:
        traces = Parallel(n_jobs=n_jobs)(
            delayed(run_point)(spec, train, test, i, j, r) for i, j, r in jobs
        )
    cells = []
    reps = spec.repetitions
    for k, (i, j) in enumerate((i, j) for i in range(n1) for j in range(n2)):
        chunk = tuple(traces[k * reps:(k + 1) * reps])
        cells.append(
            SweepCell(
                i,
                j,
                spec.axis1[1][i],
                spec.axis2[1][j] if spec.axis2 else None,
                chunk,
                tuple(point_seed(spec.seed, i, j, r) for r in range(reps)),
            )
        )
    return SweepResult(spec, tuple(cells))


class AggregateSeries(NamedTuple):
    name: str
    axis: tuple[float, ...]
    stat: tuple[float, ...]
    missing: tuple[float, ...] = ()


def aggregate_mean_ng(result: SweepResult) -> AggregateSeries:
    """Mean realized neuron count per axis value, pooled over steps and repetitions.

    Points without a single completed trace are listed in ``missing`` and
    left out of ``axis``/``stat``.
    """
    if result.two_axis:
        raise ValueError("aggregate_mean_ng needs a single-axis sweep")
    axis, stat, missing = [], [], []
    for c in result.cells:
        if c.missing:
            missing.append(c.axis1_value)
            continue
        axis.append(c.axis1_value)
        stat.append(c.mean_ng)
    return AggregateSeries(result.spec.axis1[0], tuple(axis), tuple(stat), tuple(missing))


def fluctuation(trace: RunTrace, burn_in: int = 0) -> float:
    """Population standard deviation of ``N_actual`` over steps ``t > burn_in``."""
    if not 0 <= burn_in < len(trace):
        raise ValueError(f"burn_in must be in [0, {len(trace) - 1}]")
    tail = [s.n_actual for s in trace.steps if s.t > burn_in]
    return float(statistics.pstdev(tail)) if tail else 0.0


@dataclass(frozen=True)
class TransitionReport:
    axis: tuple[float, ...]
    stat: tuple[float, ...]
    interval: tuple[float, float] | None
    statistic: str = "mean_ng"
    jump: float = 0.0
    threshold: float = 0.0

    @property
    def found(self) -> bool:
        return self.interval is not None


def detect_transition(axis: Sequence[float], stat: Sequence[float], statistic: str = "mean_ng") -> TransitionReport:
    """Largest adjacent jump, reported only if it exceeds twice the median jump."""
    axis = tuple(float(v) for v in axis)
    stat = tuple(float(v) for v in stat)
    if len(axis) != len(stat):
        raise ValueError("axis and statistic lengths differ")
    if len(axis) < 3:
        raise ValueError("need at least 3 axis points")
    if any(b < a for a, b in zip(axis, axis[1:])):
        raise ValueError("axis values must be sorted")
    jumps = np.abs(np.diff(stat))
    k = int(np.argmax(jumps))  # first maximum -> lower-axis interval
    threshold = 2.0 * float(np.median(jumps))
    interval = (axis[k], axis[k + 1]) if jumps[k] > threshold else None
    return TransitionReport(axis, stat, interval, statistic, float(jumps[k]), threshold)


def parse_axis(text: str) -> tuple[str, tuple[float, ...]]:
    """``name=start:stop:count`` (inclusive linspace) or ``name=v1,v2,...``."""
    name, sep, body = text.partition("=")
    name = name.strip()
    if not sep or not body.strip():
        raise ValueError(f"axis {text!r} must look like name=start:stop:count or name=v1,v2")
    body = body.strip()
    try:
        if ":" in body:
            start, stop, count = body.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            values = tuple(float(v) for v in np.linspace(float(start), float(stop), n))
        else:
            values = tuple(float(v) for v in body.split(","))
    except ValueError:
        raise ValueError(f"cannot parse axis values in {text!r}") from None
    return _axis((name, values))


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_sweep_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis1", "axis2", "rep", "t", "N_actual", "E"])
        for c in result.cells:
            for rep, trace in enumerate(c.traces):
                for s in trace.steps:
                    w.writerow([_fmt(c.axis1_value), _fmt(c.axis2_value), rep, s.t, s.n_actual, repr(float(s.error))])
    return path


def write_aggregate_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis1", "axis2", "mean_ng", "sd_ng", "mean_e"])
        for c in result.cells:
            w.writerow([_fmt(c.axis1_value), _fmt(c.axis2_value), _fmt(c.mean_ng), _fmt(c.sd_ng), _fmt(c.mean_e)])
    return path


def read_aggregate_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["axis1", "axis2", "mean_ng", "sd_ng", "mean_e"]:
            raise ValueError(f"{path}: not an aggregate CSV (columns {reader.fieldnames})")
        return [
            {k: (float(v) if v != "" else None) for k, v in row.items()} for row in reader
        ]


def write_report_csv(report: TransitionReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "found", "low", "high", "jump", "threshold"])
        lo, hi = report.interval if report.interval else (None, None)
        w.writerow([report.statistic, int(report.found), _fmt(lo), _fmt(hi), repr(report.jump), repr(report.threshold)])
        w.writerow([])
        w.writerow(["axis", report.statistic])
        for a, s in zip(report.axis, report.stat):
            w.writerow([repr(a), repr(s)])
    return path
