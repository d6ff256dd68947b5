"""First-order Takagi-Sugeno fuzzy regulator.

Each rule has a Gaussian premise per input and a linear consequent
``a . x + b``. Premises come from clustering the crisp granules; training
alternates a least-squares consequent fit with one gradient step on the
premise centers and widths (the usual hybrid scheme).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dataset import Dataset

log = logging.getLogger(__name__)

__all__ = [
    "FuzzyRule",
    "FuzzyModel",
    "init_from_granules",
    "infer",
    "predict",
    "fit_consequents_lse",
    "sse",
    "sse_gradient",
    "train_hybrid",
    "rmse",
    "rmse_values",
    "format_rules",
    "save_rules_csv",
]

SIGMA_FLOOR_FRACTION = 0.05
LLOYD_ROUNDS = 50
# singular values below this fraction of the largest count as zero
LSTSQ_RCOND = 1e-10


class FuzzyRule(NamedTuple):
    centers: tuple[float, ...]
    sigmas: tuple[float, ...]
    consequent: tuple[float, ...]  # d slopes then the bias


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FuzzyModel:
    """Rule base stored as arrays.

    ``centers`` and ``sigmas`` are (n_rules, d); ``coefs`` is (n_rules, d + 1)
    with the bias in the last column. ``sigma_floor`` (d,) is the lower clamp
    applied during training.
    """

    centers: np.ndarray
    sigmas: np.ndarray
    coefs: np.ndarray
    sigma_floor: np.ndarray

    def __post_init__(self):
        C, S, A, F = (_ro(v) for v in (self.centers, self.sigmas, self.coefs, self.sigma_floor))
        if C.ndim != 2 or C.shape[0] < 1:
            raise ValueError("need at least one rule")
        r, d = C.shape
        if S.shape != (r, d) or A.shape != (r, d + 1) or F.shape != (d,):
            raise ValueError("inconsistent rule array shapes")
        if np.any(S <= 0):
            raise ValueError("sigmas must be strictly positive")
        if not all(np.all(np.isfinite(v)) for v in (C, S, A, F)):
            raise ValueError("rule parameters must be finite")
        for name, v in zip(("centers", "sigmas", "coefs", "sigma_floor"), (C, S, A, F)):
            object.__setattr__(self, name, v)

    @property
    def n_rules(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def rules(self) -> list[FuzzyRule]:
        return [
            FuzzyRule(tuple(map(float, c)), tuple(map(float, s)), tuple(map(float, a)))
            for c, s, a in zip(self.centers, self.sigmas, self.coefs)
        ]

    def replace(self, **changes) -> "FuzzyModel":
        fields = dict(
            centers=self.centers, sigmas=self.sigmas, coefs=self.coefs, sigma_floor=self.sigma_floor
        )
        fields.update(changes)
        return FuzzyModel(**fields)

    def __eq__(self, other):
        if not isinstance(other, FuzzyModel):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("centers", "sigmas", "coefs", "sigma_floor")
        )

    __hash__ = None


def _xy(data, y=None):
    if isinstance(data, Dataset):
        return data.X, data.y
    X = np.atleast_2d(np.asarray(data, dtype=float))
    return X, None if y is None else np.asarray(y, dtype=float).ravel()


def _farthest_point_seeds(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(X.shape[0]))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _lloyd(X: np.ndarray, centers: np.ndarray, rounds: int) -> tuple[np.ndarray, np.ndarray]:
    labels = None
    for _ in range(rounds):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        new_labels = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for i in range(centers.shape[0]):
            members = X[labels == i]
            if len(members):
                centers[i] = members.mean(axis=0)
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return centers, np.argmin(d2, axis=1)


def init_from_granules(granules: Dataset, n_rules: int, seed: int = 0) -> FuzzyModel:
    """Cluster granule features into ``n_rules`` premises; consequents start at zero.

    Seeding is farthest-point from a seed-chosen first granule, followed by
    Lloyd rounds. Each premise width is the cluster's per-input standard
    deviation, floored at 5% of that input's range over the granules.
    """
    X, _ = _xy(granules)
    n, d = X.shape
    if n_rules < 1:
        raise ValueError("n_rules must be >= 1")
    if n < n_rules:
        raise ValueError(f"{n} granules cannot support {n_rules} rules")
    rng = np.random.default_rng(seed)
    centers, labels = _lloyd(X, _farthest_point_seeds(X, n_rules, rng), LLOYD_ROUNDS)
    span = X.max(axis=0) - X.min(axis=0)
    floor = SIGMA_FLOOR_FRACTION * np.where(span > 0, span, 1.0)
    sigmas = np.empty_like(centers)
    for i in range(n_rules):
        members = X[labels == i]
        sd = members.std(axis=0) if len(members) else np.zeros(d)
        sigmas[i] = np.maximum(sd, floor)
    return FuzzyModel(centers, sigmas, np.zeros((n_rules, d + 1)), floor)


def _normalized_weights(model: FuzzyModel, X: np.ndarray) -> np.ndarray:
    # log-domain so that far-away inputs do not underflow every rule to zero
    z = (X[:, None, :] - model.centers[None]) / model.sigmas[None]
    logw = -0.5 * (z ** 2).sum(axis=-1)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def _consequents(model: FuzzyModel, X: np.ndarray) -> np.ndarray:
    return X @ model.coefs[:, :-1].T + model.coefs[:, -1]


def predict(model: FuzzyModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise ValueError(f"inputs have {X.shape[1]} features, model expects {model.dim}")
    return (_normalized_weights(model, X) * _consequents(model, X)).sum(axis=1)


def infer(model: FuzzyModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ValueError(f"input has shape {x.shape}, model expects ({model.dim},)")
    return float(predict(model, x[None, :])[0])


def _design(model: FuzzyModel, X: np.ndarray) -> np.ndarray:
    w = _normalized_weights(model, X)
    Xb = np.column_stack([X, np.ones(X.shape[0])])
    return (w[:, :, None] * Xb[:, None, :]).reshape(X.shape[0], -1)


def fit_consequents_lse(model: FuzzyModel, train, y=None) -> FuzzyModel:
    """Least-squares consequents with premises held fixed (minimum-norm if rank deficient)."""
    X, t = _xy(train, y)
    if X.shape[0] == 0:
        raise ValueError("cannot fit consequents on empty data")
    Phi = _design(model, X)
    theta, *_ = np.linalg.lstsq(Phi, t, rcond=LSTSQ_RCOND)
    return model.replace(coefs=theta.reshape(model.n_rules, model.dim + 1))


def sse(model: FuzzyModel, train, y=None) -> float:
    X, t = _xy(train, y)
    r = predict(model, X) - t
    return float(r @ r)


def sse_gradient(model: FuzzyModel, train, y=None) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the training SSE w.r.t. centers and sigmas."""
    X, t = _xy(train, y)
    w = _normalized_weights(model, X)  # (n, r)
    g = _consequents(model, X)  # (n, r)
    f = (w * g).sum(axis=1)
    # df/dlogw_i = w_i (g_i - f); dlogw_i/dc_ij = (x_j - c_ij)/s_ij^2, dlogw_i/ds_ij = (x_j - c_ij)^2/s_ij^3
    coef = 2.0 * (f - t)[:, None] * w * (g - f[:, None])  # (n, r)
    diff = X[:, None, :] - model.centers[None]  # (n, r, d)
    s = model.sigmas[None]
    d_centers = (coef[:, :, None] * diff / s ** 2).sum(axis=0)
    d_sigmas = (coef[:, :, None] * diff ** 2 / s ** 3).sum(axis=0)
    return d_centers, d_sigmas


def rmse_values(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape:
        raise ValueError("prediction and target lengths differ")
    if p.size == 0:
        raise ValueError("RMSE of an empty test set is undefined")
    return float(np.sqrt(((p - a) ** 2).sum() / p.size))


def rmse(model: FuzzyModel, test, y=None) -> float:
    X, t = _xy(test, y)
    if X.shape[0] == 0:
        raise ValueError("RMSE of an empty test set is undefined")
    return rmse_values(predict(model, X), t)


class HybridHistory(NamedTuple):
    rmse: list[float]  # every evaluated iterate, starting with the initial model
    best_rmse: list[float]  # running minimum of the above
    aborted: str | None


def train_hybrid(
    model: FuzzyModel,
    train,
    iterations: int = 10,
    step: float = 0.01,
    y=None,
    return_history: bool = False,
):
    """Alternate LSE consequents and one premise gradient step, keep the best iterate.

    Iterates evaluated, in order: the initial model, then per iteration the
    model after the consequent fit and the model after the premise step.
    A non-finite loss stops training and the best model so far is returned.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if step <= 0:
        raise ValueError("step must be > 0")
    X, t = _xy(train, y)
    best, best_err = model, rmse(model, X, t)
    seen, running = [best_err], [best_err]
    aborted = None

    def consider(candidate: FuzzyModel) -> bool:
        nonlocal best, best_err
        err = rmse(candidate, X, t)
        seen.append(err)
        if not np.isfinite(err):
            return False
        if err < best_err:
            best, best_err = candidate, err
        running.append(best_err)
        return True

    current = model
    # overflow is detected explicitly below, so numpy need not warn about it
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(iterations):
            current = fit_consequents_lse(current, X, t)
            if not consider(current):
                aborted = f"non-finite loss after consequent fit at iteration {it + 1}"
                break
            dc, ds = sse_gradient(current, X, t)
            if not (np.all(np.isfinite(dc)) and np.all(np.isfinite(ds))):
                aborted = f"non-finite gradient at iteration {it + 1}"
                break
            centers = current.centers - step * dc
            sigmas = np.maximum(current.sigmas - step * ds, current.sigma_floor)
            if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(sigmas))):
                aborted = f"non-finite premise update at iteration {it + 1}"
                break
            current = current.replace(centers=centers, sigmas=sigmas)
            if not consider(current):
                aborted = f"non-finite loss after premise step at iteration {it + 1}"
                break
    if aborted:
        log.warning("hybrid training stopped early: %s", aborted)
    if return_history:
        return best, HybridHistory(seen, running, aborted)
    return best


def format_rules(model: FuzzyModel, feature_names=None) -> list[str]:
    names = list(feature_names or [f"x{j}" for j in range(model.dim)])
    lines = []
    for rule in model.rules:
        premise = " AND ".join(
            f"{n} is N({c:.6g},{s:.6g})" for n, c, s in zip(names, rule.centers, rule.sigmas)
        )
        slopes = " + ".join(f"{a:.6g}*{n}" for a, n in zip(rule.consequent[:-1], names))
        lines.append(f"IF {premise} THEN y = {slopes} + {rule.consequent[-1]:.6g}")
    return lines


def save_rules_csv(model: FuzzyModel, path) -> Path:
    path = Path(path)
    d = model.dim
    header = (
        ["rule"]
        + [f"c_{j}" for j in range(d)]
        + [f"sigma_{j}" for j in range(d)]
        + [f"a_{j}" for j in range(d)]
        + ["b"]
    )
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, rule in enumerate(model.rules):
            w.writerow([i, *map(repr, rule.centers), *map(repr, rule.sigmas), *map(repr, rule.consequent)])
    return path
