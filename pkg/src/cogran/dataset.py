"""Monitored data: loading, synthesis, splitting and min-max normalization.

A :class:`Dataset` is an immutable pair of arrays ``X`` (n_samples, dim) and
``y`` (n_samples,). Records are exposed as a view for code that prefers to
iterate object-by-object.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "Record",
    "Dataset",
    "NormalizationInfo",
    "DatasetError",
    "load_csv",
    "save_csv",
    "synthetic_target",
    "gen_synthetic",
    "split",
    "normalize",
]


class DatasetError(ValueError):
    """Raised for malformed or inconsistent monitored data."""


class Record(NamedTuple):
    features: tuple[float, ...]
    target: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    target_name: str = "target"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise DatasetError(f"X must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if X.shape[1] < 1:
            raise DatasetError("dataset needs at least one feature")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DatasetError("dataset contains non-finite values")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DatasetError("feature_names length does not match dim")
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_records(cls, records, **kwargs) -> "Dataset":
        records = list(records)
        if not records:
            raise DatasetError("empty dataset")
        X = np.array([r[0] for r in records], dtype=float)
        y = np.array([r[1] for r in records], dtype=float)
        return cls(X, y, **kwargs)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def records(self) -> list[Record]:
        return list(iter(self))

    def __iter__(self) -> Iterator[Record]:
        for row, t in zip(self.X, self.y):
            yield Record(tuple(float(v) for v in row), float(t))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and self.feature_names == other.feature_names
            and self.target_name == other.target_name
        )

    __hash__ = None

    def joint(self) -> np.ndarray:
        """Feature and target columns stacked into one (n, dim + 1) array."""
        return np.column_stack([self.X, self.y])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.target_name)


def load_csv(path) -> Dataset:
    """Read a header-led CSV whose last column is the target."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DatasetError("empty dataset: file has no header")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DatasetError("header must name at least one feature and the target")
    body = rows[1:]
    if not body:
        raise DatasetError("empty dataset")
    values = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(
                f"row {lineno}: expected {len(header)} columns, got {len(row)}"
            )
        parsed = []
        for col, cell in zip(header, row):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"row {lineno}, column {col!r}: non-numeric value {cell.strip()!r}"
                ) from None
        values.append(parsed)
    arr = np.array(values, dtype=float)
    return Dataset(arr[:, :-1], arr[:, -1], tuple(header[:-1]), header[-1])


def save_csv(data: Dataset, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, data.target_name])
        for row, t in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(t))])
    return path


def synthetic_target(X: np.ndarray) -> np.ndarray:
    """Noise-free target of :func:`gen_synthetic`.

    ``y = sum_j sin(2*pi*x_j + j)``, a smooth per-feature sinusoid sum with a
    phase offset equal to the feature index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    phases = np.arange(X.shape[1], dtype=float)
    return np.sin(2.0 * np.pi * X + phases).sum(axis=1)


def gen_synthetic(n: int = 693, dim: int = 3, noise_sd: float = 0.05, seed: int = 0) -> Dataset:
    """Uniform features in [0, 1] with :func:`synthetic_target` plus Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, dim))
    y = synthetic_target(X)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, size=n)
    return Dataset(X, y)


def split(data: Dataset, n_train: int, n_test: int, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffle deterministically and cut into disjoint train and test parts.

    The test part may be empty (``n_test=0``); it is then returned as a
    zero-row dataset sharing the column names.
    """
    if n_train < 0 or n_test < 0:
        raise DatasetError("split sizes must be non-negative")
    if n_train + n_test > len(data):
        raise DatasetError(
            f"requested {n_train} + {n_test} records but only {len(data)} available"
        )
    perm = np.random.default_rng(seed).permutation(len(data))
    train_idx = perm[:n_train]
    test_idx = perm[n_train:n_train + n_test]
    return data.subset(train_idx), _subset_maybe_empty(data, test_idx)


def _subset_maybe_empty(data: Dataset, idx: np.ndarray) -> Dataset:
    # Dataset itself allows zero rows; only loaders insist on content
    return Dataset(
        data.X[idx].reshape(len(idx), data.dim),
        data.y[idx],
        data.feature_names,
        data.target_name,
    )


@dataclass(frozen=True)
class NormalizationInfo:
    """Per-channel (min, max) for features and target.

    Constant channels (``max == min``) map to 0.5 and invert back to their
    single value.
    """

    feature_min: tuple[float, ...]
    feature_max: tuple[float, ...]
    target_min: float
    target_max: float

    @property
    def constant_features(self) -> tuple[bool, ...]:
        return tuple(lo == hi for lo, hi in zip(self.feature_min, self.feature_max))

    @property
    def constant_target(self) -> bool:
        return self.target_min == self.target_max

    @staticmethod
    def _fwd(v, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (v - lo) / safe, 0.5)

    @staticmethod
    def _inv(v, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = hi - lo
        return np.where(span > 0, lo + v * span, lo)

    def transform_X(self, X) -> np.ndarray:
        return self._fwd(np.asarray(X, dtype=float), self.feature_min, self.feature_max)

    def transform_y(self, y) -> np.ndarray:
        return self._fwd(np.asarray(y, dtype=float), self.target_min, self.target_max)

    def inverse_X(self, X) -> np.ndarray:
        return self._inv(np.asarray(X, dtype=float), self.feature_min, self.feature_max)

    def inverse_y(self, y) -> np.ndarray:
        return self._inv(np.asarray(y, dtype=float), self.target_min, self.target_max)

    def apply(self, data: Dataset) -> Dataset:
        """Map another dataset (e.g. the test split) with these bounds.

        Values outside the fitted range land outside [0, 1]; that is expected
        for held-out data.
        """
        return Dataset(
            self.transform_X(data.X).reshape(data.X.shape),
            self.transform_y(data.y).reshape(data.y.shape),
            data.feature_names,
            data.target_name,
        )

    def invert(self, data: Dataset) -> Dataset:
        return Dataset(
            self.inverse_X(data.X).reshape(data.X.shape),
            self.inverse_y(data.y).reshape(data.y.shape),
            data.feature_names,
            data.target_name,
        )


def normalize(data: Dataset) -> tuple[Dataset, NormalizationInfo]:
    if len(data) == 0:
        raise DatasetError("cannot normalize an empty dataset")
    info = NormalizationInfo(
        feature_min=tuple(float(v) for v in data.X.min(axis=0)),
        feature_max=tuple(float(v) for v in data.X.max(axis=0)),
        target_min=float(data.y.min()),
        target_max=float(data.y.max()),
    )
    return info.apply(data), info
