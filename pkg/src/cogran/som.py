"""Rectangular batch self-organizing map and a 1-D SOM discretizer.

The map is trained in the joint feature+target space so that every
prototype doubles as a labelled record ("crisp granule") for the second
layer. Training is the batch variant: each epoch assigns every record to
its best-matching unit and moves every prototype to the kernel-weighted mean
of the records. The lattice kernel is a Gaussian truncated at the current
radius, so a radius below 1 reduces to plain BMU means.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset

__all__ = [
    "SomGrid",
    "TrainSchedule",
    "Discretization1D",
    "init_grid",
    "bmu",
    "bmu_many",
    "train_batch",
    "quantization_error",
    "granules",
    "discretize_1d",
    "save_prototypes",
]


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.joint()
    return np.atleast_2d(np.asarray(data, dtype=float))


@dataclass(frozen=True, eq=False)
class SomGrid:
    n1: int
    n2: int
    prototypes: np.ndarray

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"lattice sides must be >= 1, got {self.n1}x{self.n2}")
        W = np.array(self.prototypes, dtype=float)
        if W.ndim != 2 or W.shape[0] != self.n1 * self.n2:
            raise ValueError(
                f"expected {self.n1 * self.n2} prototypes, got array of shape {W.shape}"
            )
        if not np.all(np.isfinite(W)):
            raise ValueError("prototypes must be finite")
        W.setflags(write=False)
        object.__setattr__(self, "prototypes", W)

    @property
    def n_units(self) -> int:
        return self.n1 * self.n2

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]

    @property
    def coords(self) -> np.ndarray:
        """(row, col) of every unit, row-major."""
        k = np.arange(self.n_units)
        return np.column_stack([k // self.n2, k % self.n2])

    def lattice_distances(self) -> np.ndarray:
        c = self.coords.astype(float)
        diff = c[:, None, :] - c[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))

    def with_prototypes(self, W) -> "SomGrid":
        return SomGrid(self.n1, self.n2, W)

    def __eq__(self, other):
        if not isinstance(other, SomGrid):
            return NotImplemented
        return (self.n1, self.n2) == (other.n1, other.n2) and np.array_equal(
            self.prototypes, other.prototypes
        )

    __hash__ = None


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 20
    radius_start: float = 1.0
    radius_end: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (self.radius_start >= self.radius_end >= 0):
            raise ValueError("need radius_start >= radius_end >= 0")

    @classmethod
    def default_for(cls, n1: int, n2: int, epochs: int = 20) -> "TrainSchedule":
        start = max(max(n1, n2) / 2.0, 0.5)
        return cls(epochs=epochs, radius_start=start, radius_end=0.5)

    def radii(self) -> np.ndarray:
        if self.epochs == 1:
            return np.array([self.radius_end])
        return np.linspace(self.radius_start, self.radius_end, self.epochs)


def init_grid(n1: int, n2: int, dim: int, data, seed: int = 0) -> SomGrid:
    """Prototypes drawn from the data rows; with replacement only when needed."""
    M = _as_matrix(data)
    if M.shape[0] == 0:
        raise ValueError("cannot initialise a SOM from empty data")
    if M.shape[1] != dim:
        raise ValueError(f"data has {M.shape[1]} columns, grid dim is {dim}")
    n_units = n1 * n2
    rng = np.random.default_rng(seed)
    idx = rng.choice(M.shape[0], size=n_units, replace=n_units > M.shape[0])
    return SomGrid(n1, n2, M[idx])


def _sq_dists(W: np.ndarray, M: np.ndarray) -> np.ndarray:
    # exact differences rather than the |a|^2 - 2ab + |b|^2 expansion so that
    # exact hits and ties compare equal
    return ((M[:, None, :] - W[None, :, :]) ** 2).sum(axis=-1)


def bmu(grid: SomGrid, x) -> int:
    """Index of the nearest prototype; ties go to the lowest index."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != grid.dim:
        raise ValueError(f"vector has length {x.shape[0]}, grid dim is {grid.dim}")
    d = ((grid.prototypes - x) ** 2).sum(axis=1)
    return int(np.argmin(d))


def bmu_many(grid: SomGrid, data) -> np.ndarray:
    M = _as_matrix(data)
    if M.shape[1] != grid.dim:
        raise ValueError(f"data has {M.shape[1]} columns, grid dim is {grid.dim}")
    return np.argmin(_sq_dists(grid.prototypes, M), axis=1)


def _kernel(lattice_d: np.ndarray, radius: float) -> np.ndarray:
    inside = lattice_d <= radius
    if radius <= 0:
        return inside.astype(float)
    return np.where(inside, np.exp(-(lattice_d ** 2) / (2.0 * radius ** 2)), 0.0)


def train_batch(grid: SomGrid, data, schedule: TrainSchedule | None = None) -> SomGrid:
    M = _as_matrix(data)
    if M.shape[1] != grid.dim:
        raise ValueError(f"data has {M.shape[1]} columns, grid dim is {grid.dim}")
    if M.shape[0] == 0:
        raise ValueError("cannot train on empty data")
    if schedule is None:
        schedule = TrainSchedule.default_for(grid.n1, grid.n2)
    W = grid.prototypes.copy()
    lat = grid.lattice_distances()
    for radius in schedule.radii():
        winners = np.argmin(_sq_dists(W, M), axis=1)
        H = _kernel(lat, radius)[:, winners]  # (units, records)
        mass = H.sum(axis=1)
        hit = mass > 0
        W[hit] = (H[hit] @ M) / mass[hit, None]
    return grid.with_prototypes(W)


def quantization_error(grid: SomGrid, data) -> float:
    """Mean Euclidean distance from each record to its BMU."""
    M = _as_matrix(data)
    if M.shape[0] == 0:
        raise ValueError("quantization error of empty data is undefined")
    d2 = _sq_dists(grid.prototypes, M).min(axis=1)
    return float(np.sqrt(d2).mean())


def granules(grid: SomGrid, feature_names=(), target_name="target") -> Dataset:
    """Split each joint prototype back into (features, target)."""
    if grid.dim < 2:
        raise ValueError("joint prototypes need at least one feature and a target")
    W = grid.prototypes
    return Dataset(W[:, :-1], W[:, -1], tuple(feature_names), target_name)


def save_prototypes(grid: SomGrid, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "row", "col", *[f"w_{j}" for j in range(grid.dim)]])
        for k, ((r, c), proto) in enumerate(zip(grid.coords, grid.prototypes)):
            w.writerow([k, int(r), int(c), *[repr(float(v)) for v in proto]])
    return path


_LEVEL_NAMES = {
    1: ("all",),
    2: ("low", "high"),
    3: ("low", "middle", "high"),
    4: ("very low", "low", "high", "very high"),
    5: ("very low", "low", "middle", "high", "very high"),
}


@dataclass(frozen=True)
class Discretization1D:
    """Sorted 1-D codebook; class of a value is the index of its nearest center."""

    codebook: tuple[float, ...]
    requested_k: int = field(default=0, compare=False)

    def __post_init__(self):
        cb = tuple(float(v) for v in self.codebook)
        if not cb:
            raise ValueError("codebook must be non-empty")
        if any(b <= a for a, b in zip(cb, cb[1:])):
            raise ValueError("codebook must be strictly increasing")
        object.__setattr__(self, "codebook", cb)
        if not self.requested_k:
            object.__setattr__(self, "requested_k", len(cb))

    @property
    def k(self) -> int:
        return len(self.codebook)

    @property
    def collapsed(self) -> bool:
        """True when fewer classes than requested survived."""
        return self.k < self.requested_k

    @property
    def boundaries(self) -> tuple[float, ...]:
        cb = self.codebook
        return tuple((a + b) / 2.0 for a, b in zip(cb, cb[1:]))

    def classify(self, values):
        """Class index per value. A value on a boundary goes to the lower class."""
        v = np.asarray(values, dtype=float)
        out = np.searchsorted(np.asarray(self.boundaries), v, side="left")
        return int(out) if out.ndim == 0 else out.astype(int)

    def labels(self) -> tuple[str, ...]:
        return _LEVEL_NAMES.get(self.k, tuple(f"class {i}" for i in range(self.k)))


def discretize_1d(values, k: int, seed: int = 0, epochs: int = 20) -> Discretization1D:
    """Fit ``k`` ordered class centers with a chain-lattice batch SOM.

    Centers start at evenly spaced quantiles, which already respects the
    chain order. ``seed`` is accepted for symmetry with the other fitters;
    the quantile start makes the result seed-independent. Duplicate centers
    are merged; when fewer than
    ``k`` distinct values exist the codebook is the distinct values
    themselves. Check :attr:`Discretization1D.collapsed` for the reduction.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot discretize an empty value list")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    distinct = np.unique(v)
    if distinct.size <= k:
        return Discretization1D(tuple(distinct), requested_k=k)
    init = np.quantile(v, (np.arange(k) + 0.5) / k)
    grid = SomGrid(1, k, init[:, None])
    schedule = TrainSchedule(epochs=epochs, radius_start=max(k / 2.0, 0.5), radius_end=0.5)
    trained = train_batch(grid, v[:, None], schedule)
    centers = np.unique(trained.prototypes[:, 0])
    return Discretization1D(tuple(centers), requested_k=k)
