"""Rough-set regulator over discretized granules.

Condition attributes and the decision are each mapped to ordered classes by
:func:`cogran.som.discretize_1d`. Rules are read directly off the
indiscernibility classes of the full condition set; a class whose members
disagree on the decision yields an ambiguous rule carrying the highest
decision index present.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .dataset import Dataset
from .som import Discretization1D, discretize_1d

__all__ = [
    "DecisionTable",
    "DecisionRule",
    "Approximation",
    "RuleSetError",
    "build_table",
    "encode",
    "ind_classes",
    "approximate",
    "extract_rules",
    "classify",
    "classify_many",
    "mse",
    "format_rules",
    "save_rules_csv",
]


class RuleSetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DecisionTable:
    conditions: np.ndarray  # (n_objects, n_attributes) int class indices
    decisions: np.ndarray  # (n_objects,) int class indices
    attribute_scales: tuple[Discretization1D, ...] = ()
    decision_scale: Discretization1D | None = None

    def __post_init__(self):
        C = np.array(self.conditions, dtype=int)
        d = np.array(self.decisions, dtype=int).ravel()
        if C.ndim != 2 or C.shape[0] == 0:
            raise ValueError("decision table needs at least one object")
        if d.shape[0] != C.shape[0]:
            raise ValueError("one decision per object required")
        if np.any(C < 0) or np.any(d < 0):
            raise ValueError("class indices must be non-negative")
        if self.attribute_scales:
            if len(self.attribute_scales) != C.shape[1]:
                raise ValueError("one discretization per attribute required")
            for j, disc in enumerate(self.attribute_scales):
                if C[:, j].max() >= disc.k:
                    raise ValueError(f"attribute {j} index outside its {disc.k} classes")
        if self.decision_scale is not None and d.max() >= self.decision_scale.k:
            raise ValueError("decision index outside its scale")
        C.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "conditions", C)
        object.__setattr__(self, "decisions", d)
        object.__setattr__(self, "attribute_scales", tuple(self.attribute_scales))

    @property
    def n_objects(self) -> int:
        return self.conditions.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.conditions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DecisionTable):
            return NotImplemented
        return (
            np.array_equal(self.conditions, other.conditions)
            and np.array_equal(self.decisions, other.decisions)
            and self.attribute_scales == other.attribute_scales
            and self.decision_scale == other.decision_scale
        )

    __hash__ = None


class DecisionRule(NamedTuple):
    condition: tuple[int, ...]
    decision: int
    support: int
    ambiguous: bool = False


class Approximation(NamedTuple):
    lower: frozenset
    upper: frozenset

    @property
    def accuracy(self) -> float:
        return len(self.lower) / len(self.upper) if self.upper else 0.0

    @property
    def boundary(self) -> frozenset:
        return self.upper - self.lower


def build_table(granules: Dataset, scales, decision_scale: int, seed: int = 0) -> DecisionTable:
    """Discretize each feature column and the target independently.

    ``scales`` is either one class count for every attribute or a sequence
    with one count per attribute.
    """
    if len(granules) == 0:
        raise ValueError("cannot build a decision table from no granules")
    d = granules.dim
    if np.ndim(scales) == 0:
        scales = [int(scales)] * d
    scales = [int(s) for s in scales]
    if len(scales) != d:
        raise ValueError(f"{len(scales)} scales given for {d} attributes")
    if any(s < 1 for s in scales) or decision_scale < 1:
        raise ValueError("every scale must be >= 1")
    discs = tuple(
        discretize_1d(granules.X[:, j], scales[j], seed=seed + j) for j in range(d)
    )
    dec = discretize_1d(granules.y, decision_scale, seed=seed + d)
    return encode_table(discs, dec, granules)


def encode_table(discs, dec: Discretization1D, data: Dataset) -> DecisionTable:
    conditions, decisions = encode(discs, dec, data)
    return DecisionTable(conditions, decisions, tuple(discs), dec)


def encode(discs: Sequence[Discretization1D], dec: Discretization1D | None, data: Dataset):
    """Class indices of ``data`` under existing scales (used for test objects)."""
    X = np.atleast_2d(data.X)
    if X.shape[1] != len(discs):
        raise ValueError("attribute count does not match the discretizations")
    conditions = np.column_stack([disc.classify(X[:, j]) for j, disc in enumerate(discs)])
    conditions = conditions.reshape(X.shape[0], len(discs)).astype(int)
    decisions = None if dec is None else np.asarray(dec.classify(data.y), dtype=int).ravel()
    return conditions, decisions


def _check_attrs(table: DecisionTable, attrs) -> list[int]:
    attrs = sorted(set(int(a) for a in attrs))
    if not attrs:
        raise ValueError("attribute subset must be non-empty")
    if attrs[0] < 0 or attrs[-1] >= table.n_attributes:
        raise ValueError(f"attribute index out of range 0..{table.n_attributes - 1}")
    return attrs


def ind_classes(table: DecisionTable, attrs=None) -> list[tuple[int, ...]]:
    """Indiscernibility partition, blocks ordered by their smallest member."""
    attrs = _check_attrs(table, range(table.n_attributes) if attrs is None else attrs)
    blocks: dict[tuple, list[int]] = {}
    for i, row in enumerate(table.conditions[:, attrs]):
        blocks.setdefault(tuple(row.tolist()), []).append(i)
    return [tuple(b) for b in blocks.values()]


def approximate(table: DecisionTable, attrs, decision_class: int) -> Approximation:
    if decision_class < 0:
        raise ValueError("decision class must be non-negative")
    if table.decision_scale is not None and decision_class >= table.decision_scale.k:
        raise ValueError(f"decision class {decision_class} outside the decision scale")
    concept = set(np.flatnonzero(table.decisions == decision_class).tolist())
    lower: set[int] = set()
    upper: set[int] = set()
    for block in ind_classes(table, attrs):
        members = set(block)
        if members & concept:
            upper |= members
            if members <= concept:
                lower |= members
    return Approximation(frozenset(lower), frozenset(upper))


def extract_rules(table: DecisionTable, min_support: int = 1) -> list[DecisionRule]:
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    rules = []
    for block in ind_classes(table):
        if len(block) < min_support:
            continue
        decisions = set(table.decisions[list(block)].tolist())
        rules.append(
            DecisionRule(
                condition=tuple(table.conditions[block[0]].tolist()),
                decision=max(decisions),
                support=len(block),
                ambiguous=len(decisions) > 1,
            )
        )
    return rules


def classify(rules: Sequence[DecisionRule], obj) -> int:
    """Exact-match rule, else the Hamming-nearest one.

    Ties among nearest rules go to higher support, then higher decision.
    """
    return int(classify_many(rules, np.asarray(obj, dtype=int)[None, :])[0])


def classify_many(rules: Sequence[DecisionRule], objects) -> np.ndarray:
    if not rules:
        raise RuleSetError("cannot classify with an empty rule list")
    conds = np.array([r.condition for r in rules], dtype=int)
    objects = np.atleast_2d(np.asarray(objects, dtype=int))
    if objects.shape[1] != conds.shape[1]:
        raise ValueError("object length does not match rule conditions")
    support = np.array([r.support for r in rules])
    decision = np.array([r.decision for r in rules])
    # lexsort: last key is primary
    order = np.lexsort((-decision, -support))
    conds, decision = conds[order], decision[order]
    hamming = (objects[:, None, :] != conds[None, :, :]).sum(axis=-1)
    return decision[np.argmin(hamming, axis=1)]


def mse(real_classes, classified) -> float:
    r = np.asarray(real_classes, dtype=int).ravel()
    c = np.asarray(classified, dtype=int).ravel()
    if r.shape != c.shape:
        raise ValueError(f"length mismatch: {r.size} real vs {c.size} classified")
    if r.size == 0:
        raise ValueError("MSE of an empty test set is undefined")
    diff = (r - c).astype(float)
    return float((diff ** 2).sum() / r.size)


def format_rules(rules: Sequence[DecisionRule], names=None) -> list[str]:
    lines = []
    for rule in rules:
        names_ = names or [f"a{j}" for j in range(len(rule.condition))]
        cond = " AND ".join(f"{n}={c}" for n, c in zip(names_, rule.condition))
        tag = f"support={rule.support}" + (", ambiguous" if rule.ambiguous else "")
        lines.append(f"IF {cond} THEN d={rule.decision} [{tag}]")
    return lines


def save_rules_csv(rules: Sequence[DecisionRule], path) -> Path:
    path = Path(path)
    width = len(rules[0].condition) if rules else 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*[f"a{j}" for j in range(width)], "decision", "support", "ambiguous"])
        for rule in rules:
            w.writerow([*rule.condition, rule.decision, rule.support, int(rule.ambiguous)])
    return path
