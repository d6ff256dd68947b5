"""Coupled close-open loop: SOM granulation driven by the regulator's error.

Every step shapes an ``n1 x n2`` map from the current neuron count, trains
it on the training data, hands the prototypes to the regulator, measures the
regulator's error on the held-out data and feeds it to the growth law::

    linear:  N' = alpha * N + beta * E + gamma
    power:   N' = N ** alpha + E ** beta + gamma

``N`` stays real between steps; only :func:`grid_shape` rounds and clamps.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import nfis, rst
from .dataset import Dataset
from .som import SomGrid, TrainSchedule, granules, init_grid, train_batch

log = logging.getLogger(__name__)

__all__ = [
    "CouplingParams",
    "NfisRegulator",
    "RstRegulator",
    "StubRegulator",
    "RegulatorSpec",
    "TraceStep",
    "RunTrace",
    "growth_linear",
    "growth_power",
    "growth",
    "iterate_law",
    "linear_closed_form",
    "grid_shape",
    "near_square_feasible",
    "step_seed",
    "run_coupled",
    "TRACE_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
]

LAWS = ("linear", "power")


@dataclass(frozen=True)
class CouplingParams:
    alpha: float = 0.9
    beta: float = 0.001
    gamma: float = 0.5
    law: str = "linear"
    n0: float = 100.0
    n_min: int = 4
    n_max: int = 400
    iterations: int = 30

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "n0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.n0 <= 0:
            raise ValueError("n0 must be > 0")
        if self.n_min < 4:
            raise ValueError("n_min must be >= 4")
        if self.n_max < self.n_min:
            raise ValueError("n_max must be >= n_min")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def replace(self, **changes) -> "CouplingParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NfisRegulator:
    """Fixed rule budget and fixed training schedule at every step."""

    n_rules: int = 2
    max_rules: int = 3
    train_iterations: int = 10
    step: float = 0.01

    kind = "nfis"

    def __post_init__(self):
        if not 1 <= self.n_rules <= self.max_rules:
            raise ValueError(f"n_rules must be in 1..{self.max_rules}")
        if self.train_iterations < 1:
            raise ValueError("train_iterations must be >= 1")
        if not self.step > 0:
            raise ValueError("step must be > 0")


@dataclass(frozen=True)
class RstRegulator:
    """Rough-set regulator with a per-step attribute scale schedule.

    Step ``t`` (1-based) uses ``scales[t - 1]``; past the end of the
    schedule the last entry is held. ``decision_scale=None`` makes the
    decision follow the attribute scale of the step.
    """

    scales: tuple[int, ...] = (3,)
    decision_scale: int | None = 3
    min_support: int = 1

    kind = "rst"

    def __post_init__(self):
        scales = tuple(int(s) for s in np.atleast_1d(self.scales))
        if not scales or any(s < 1 for s in scales):
            raise ValueError("scale schedule must be non-empty with entries >= 1")
        object.__setattr__(self, "scales", scales)
        if self.decision_scale is not None and self.decision_scale < 1:
            raise ValueError("decision_scale must be >= 1")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")

    def scale_at(self, t: int) -> int:
        return self.scales[min(t, len(self.scales)) - 1]


@dataclass(frozen=True)
class StubRegulator:
    """Constant error, optionally perturbed by Gaussian noise from the step seed.

    The SOM is not trained for stub runs since the error ignores the granules.
    """

    error: float = 10.0
    noise_sd: float = 0.0

    kind = "stub"

    def __post_init__(self):
        if not (math.isfinite(self.error) and self.error >= 0):
            raise ValueError("stub error must be finite and >= 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


RegulatorSpec = Union[NfisRegulator, RstRegulator, StubRegulator]


class TraceStep(NamedTuple):
    t: int
    n_target: float
    n1: int
    n2: int
    n_actual: int
    error: float
    rule_count: int
    scale: int | None
    saturated: bool


@dataclass(frozen=True)
class RunTrace:
    steps: tuple[TraceStep, ...]
    iterations: int
    diagnostic: str | None = None
    final_grid: SomGrid | None = field(default=None, compare=False, repr=False)
    final_regulator: object = field(default=None, compare=False, repr=False)

    @property
    def completed(self) -> bool:
        return self.diagnostic is None and len(self.steps) == self.iterations

    def __len__(self) -> int:
        return len(self.steps)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps], dtype=float)

    @property
    def n_actual(self) -> np.ndarray:
        return self.column("n_actual")

    @property
    def errors(self) -> np.ndarray:
        return self.column("error")


def _check_inputs(N: float, E: float) -> None:
    if not (math.isfinite(N) and math.isfinite(E)):
        raise ValueError(f"non-finite growth input N={N}, E={E}")
    if N <= 0:
        raise ValueError(f"neuron count must be > 0, got {N}")
    if E < 0:
        raise ValueError(f"error must be >= 0, got {E}")


def growth_linear(N: float, E: float, p: CouplingParams) -> float:
    _check_inputs(N, E)
    return p.alpha * N + (p.beta * E + p.gamma)


def growth_power(N: float, E: float, p: CouplingParams) -> float:
    _check_inputs(N, E)
    if E == 0:
        if p.beta <= 0:
            raise ValueError("0 ** beta is undefined for beta <= 0")
        e_term = 0.0
    else:
        e_term = E ** p.beta
    return N ** p.alpha + e_term + p.gamma


def growth(N: float, E: float, p: CouplingParams) -> float:
    return growth_linear(N, E, p) if p.law == "linear" else growth_power(N, E, p)


def iterate_law(p: CouplingParams, errors: Sequence[float], n0: float | None = None) -> np.ndarray:
    """Unclamped, unrounded neuron counts: ``out[0] = n0``, ``out[t+1] = law(out[t], errors[t])``."""
    out = [float(p.n0 if n0 is None else n0)]
    for E in errors:
        out.append(growth(out[-1], float(E), p))
    return np.array(out)


def linear_closed_form(p: CouplingParams, E: float, t) -> np.ndarray:
    """``alpha^t N0 + (beta E + gamma)(1 - alpha^t)/(1 - alpha)`` for constant ``E``."""
    t = np.asarray(t, dtype=float)
    a = p.alpha
    drive = p.beta * E + p.gamma
    geom = t if a == 1 else (1 - a ** t) / (1 - a)
    return a ** t * p.n0 + drive * geom


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def grid_shape(N_target: float, p: CouplingParams) -> tuple[int, int]:
    """Near-square ``(n1, n2)`` for the clamped target, both sides at least 2."""
    if not math.isfinite(N_target):
        N = float(p.n_max) if N_target > 0 else float(p.n_min)
    else:
        N = min(max(N_target, p.n_min), p.n_max)
    # start from round(sqrt N) x round(N / n1); a neighbouring n1 wins only
    # if it lands strictly closer to N while staying near-square
    base = max(2, _round_half_up(math.sqrt(N)))
    n1, n2 = base, max(2, _round_half_up(N / base))
    for cand in (base - 1, base + 1):
        if cand < 2:
            continue
        m = max(2, _round_half_up(N / cand))
        if abs(cand - m) <= 2 and abs(cand * m - N) < abs(n1 * n2 - N):
            n1, n2 = cand, m
    # rounding may step just outside the clamp band; pull n2 back when a
    # side >= 2 allows it
    if n1 * n2 < p.n_min:
        n2 = -(-p.n_min // n1)
    elif n1 * n2 > p.n_max and p.n_max // n1 >= 2:
        n2 = p.n_max // n1
    return n1, n2


def near_square_feasible(N: float, tol: float) -> bool:
    """Whether any ``n1, n2 >= 2`` with ``|n1 - n2| <= 2`` has ``|n1 n2 - N| <= tol``."""
    top = int(math.sqrt(N + tol)) + 2
    return any(
        abs(a * b - N) <= tol for a in range(2, top + 1) for b in range(max(2, a - 2), a + 3)
    )


def step_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(t)]).generate_state(1)[0])


class _StepFailure(RuntimeError):
    pass


def _regulate(reg: RegulatorSpec, grans: Dataset | None, test: Dataset, t: int, seed: int):
    """Fit the regulator on the granules and return (error, rule_count, scale, fitted)."""
    if isinstance(reg, StubRegulator):
        E = reg.error
        if reg.noise_sd > 0:
            E = max(0.0, E + reg.noise_sd * np.random.default_rng(seed).standard_normal())
        return float(E), 0, None, None
    if isinstance(reg, NfisRegulator):
        model = nfis.init_from_granules(grans, reg.n_rules, seed=seed)
        model = nfis.train_hybrid(model, grans, reg.train_iterations, reg.step)
        return nfis.rmse(model, test), model.n_rules, None, model
    if isinstance(reg, RstRegulator):
        scale = reg.scale_at(t)
        dec_scale = scale if reg.decision_scale is None else reg.decision_scale
        table = rst.build_table(grans, scale, dec_scale, seed=seed)
        rules = rst.extract_rules(table, reg.min_support)
        if not rules:
            raise _StepFailure(f"min_support={reg.min_support} filtered out every rule")
        cond, dec = rst.encode(table.attribute_scales, table.decision_scale, test)
        predicted = rst.classify_many(rules, cond)
        return rst.mse(dec, predicted), len(rules), scale, (table, rules)
    raise TypeError(f"unknown regulator {reg!r}")


def run_coupled(
    train: Dataset,
    test: Dataset,
    p: CouplingParams,
    reg: RegulatorSpec,
    seed: int = 0,
    som_epochs: int = 20,
) -> RunTrace:
    """Run ``p.iterations`` close-open steps.

    A failing step ends the run; the returned trace then holds the completed
    steps and a ``diagnostic`` message.
    """
    if len(train) == 0 or len(test) == 0:
        raise ValueError("train and test data must be non-empty")
    if train.dim != test.dim:
        raise ValueError("train and test dimensions differ")
    N = float(p.n0)
    steps: list[TraceStep] = []
    grid = fitted = None
    joint = train.joint()
    for t in range(1, p.iterations + 1):
        s = step_seed(seed, t)
        n1, n2 = grid_shape(N, p)
        try:
            grans = None
            if not isinstance(reg, StubRegulator):
                grid = init_grid(n1, n2, joint.shape[1], joint, seed=s)
                grid = train_batch(grid, joint, TrainSchedule.default_for(n1, n2, som_epochs))
                grans = granules(grid, train.feature_names, train.target_name)
            E, rule_count, scale, fitted = _regulate(reg, grans, test, t, s)
            if not (math.isfinite(E) and E >= 0):
                raise _StepFailure(f"regulator produced invalid error {E!r}")
        except (ValueError, np.linalg.LinAlgError, _StepFailure) as exc:
            msg = f"step {t}: {exc}"
            log.error("coupled run aborted at %s", msg)
            return RunTrace(tuple(steps), p.iterations, msg, grid, fitted)
        steps.append(
            TraceStep(t, N, n1, n2, n1 * n2, E, rule_count, scale, bool(N > p.n_max))
        )
        try:
            N = growth(N, E, p)
        except ValueError as exc:
            msg = f"step {t}: growth law failed: {exc}"
            return RunTrace(tuple(steps), p.iterations, msg, grid, fitted)
        if not math.isfinite(N):
            if t < p.iterations:
                msg = f"step {t}: neuron count diverged"
                return RunTrace(tuple(steps), p.iterations, msg, grid, fitted)
    return RunTrace(tuple(steps), p.iterations, None, grid, fitted)


TRACE_COLUMNS = ("t", "N_target", "n1", "n2", "N_actual", "E", "rule_count", "scale", "saturated")


def trace_rows(trace: RunTrace):
    for s in trace.steps:
        yield [
            s.t,
            repr(float(s.n_target)),
            s.n1,
            s.n2,
            s.n_actual,
            repr(float(s.error)),
            s.rule_count,
            "" if s.scale is None else s.scale,
            int(s.saturated),
        ]


def write_trace_csv(trace: RunTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        w.writerows(trace_rows(trace))
    return path


def read_trace_csv(path) -> RunTrace:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: not a trace CSV (columns {reader.fieldnames})")
        steps = tuple(
            TraceStep(
                int(r["t"]),
                float(r["N_target"]),
                int(r["n1"]),
                int(r["n2"]),
                int(r["N_actual"]),
                float(r["E"]),
                int(r["rule_count"]),
                int(r["scale"]) if r["scale"] else None,
                bool(int(r["saturated"])),
            )
            for r in reader
        )
    return RunTrace(steps, len(steps))
