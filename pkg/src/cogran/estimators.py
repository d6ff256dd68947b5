"""scikit-learn style wrappers around the functional cores.

These follow the usual conventions: hyper-parameters are stored verbatim in
``__init__``, everything learned ends in an underscore, and inputs go
through :func:`sklearn.utils.validation.check_array`. They can therefore be
cloned, grid-searched and placed in pipelines.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import nfis, rst
from .dataset import Dataset, normalize, split
from .engine import CouplingParams, NfisRegulator, RstRegulator, run_coupled
from .som import SomGrid, TrainSchedule, bmu_many, discretize_1d, granules, init_grid, quantization_error, train_batch

__all__ = ["BatchSOM", "SOMDiscretizer", "TSKRegressor", "RoughSetClassifier", "SONFIS", "SORSTAS"]


def _check_features(est, X):
    X = check_array(X, dtype=float)
    if X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, {type(est).__name__} was fitted with {est.n_features_in_}")
    return X


class BatchSOM(TransformerMixin, BaseEstimator):
    """Rectangular batch SOM.

    When ``fit`` receives ``y`` the map is trained in the joint
    feature+target space and :attr:`granules_` holds one labelled record per
    unit. ``predict`` and ``transform`` always use the feature columns only.

    Parameters
    ----------
    n_rows, n_cols : int
        Lattice shape.
    epochs : int
        Batch epochs.
    radius_start : float or None
        Initial neighbourhood radius; ``None`` uses ``max(n_rows, n_cols) / 2``.
    radius_end : float
        Final radius; 0.5 or less ends on plain BMU means.
    random_state : int
        Seed for the prototype initialisation.
    """

    def __init__(self, n_rows=5, n_cols=5, epochs=20, radius_start=None, radius_end=0.5, random_state=0):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.epochs = epochs
        self.radius_start = radius_start
        self.radius_end = radius_end
        self.random_state = random_state

    def fit(self, X, y=None):
        if y is None:
            X = check_array(X, dtype=float)
            M = X
        else:
            X, y = check_X_y(X, y, dtype=float, y_numeric=True)
            M = np.column_stack([X, y])
        self.n_features_in_ = X.shape[1]
        start = max(self.n_rows, self.n_cols) / 2.0 if self.radius_start is None else self.radius_start
        schedule = TrainSchedule(self.epochs, max(start, self.radius_end), self.radius_end)
        grid = init_grid(self.n_rows, self.n_cols, M.shape[1], M, seed=self.random_state)
        self.grid_ = train_batch(grid, M, schedule)
        self.joint_ = y is not None
        self.quantization_error_ = quantization_error(self.grid_, M)
        return self

    @property
    def granules_(self) -> Dataset:
        check_is_fitted(self, "grid_")
        if not self.joint_:
            raise AttributeError("granules_ needs a map fitted with y")
        return granules(self.grid_)

    @property
    def cluster_centers_(self) -> np.ndarray:
        check_is_fitted(self, "grid_")
        return np.asarray(self.grid_.prototypes[:, : self.n_features_in_])

    def predict(self, X):
        """Best-matching unit per row."""
        check_is_fitted(self, "grid_")
        X = _check_features(self, X)
        feature_grid = SomGrid(self.grid_.n1, self.grid_.n2, self.cluster_centers_)
        return bmu_many(feature_grid, X)

    def transform(self, X):
        """Euclidean distance from each row to every unit (feature space)."""
        check_is_fitted(self, "grid_")
        X = _check_features(self, X)
        C = self.cluster_centers_
        return np.sqrt(((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1))


class SOMDiscretizer(TransformerMixin, BaseEstimator):
    """Per-column ordered classes from a 1-D SOM, in the manner of ``KBinsDiscretizer``."""

    def __init__(self, n_classes=3, random_state=0):
        self.n_classes = n_classes
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self.discretizations_ = [
            discretize_1d(X[:, j], self.n_classes, seed=self.random_state + j) for j in range(X.shape[1])
        ]
        self.n_classes_ = np.array([d.k for d in self.discretizations_])
        return self

    def transform(self, X):
        check_is_fitted(self, "discretizations_")
        X = _check_features(self, X)
        return np.column_stack([d.classify(X[:, j]) for j, d in enumerate(self.discretizations_)]).astype(int)

    def inverse_transform(self, Xt):
        check_is_fitted(self, "discretizations_")
        Xt = check_array(Xt, dtype=int)
        return np.column_stack(
            [np.asarray(d.codebook)[Xt[:, j]] for j, d in enumerate(self.discretizations_)]
        )


class TSKRegressor(RegressorMixin, BaseEstimator):
    """First-order Takagi-Sugeno regressor with clustered premises and hybrid training."""

    def __init__(self, n_rules=2, iterations=10, step=0.01, random_state=0):
        self.n_rules = n_rules
        self.iterations = iterations
        self.step = step
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        data = Dataset(X, y)
        model = nfis.init_from_granules(data, self.n_rules, seed=self.random_state)
        self.model_, self.history_ = nfis.train_hybrid(
            model, data, self.iterations, self.step, return_history=True
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return nfis.predict(self.model_, _check_features(self, X))

    def rules(self, feature_names=None) -> list[str]:
        check_is_fitted(self, "model_")
        return nfis.format_rules(self.model_, feature_names)


class RoughSetClassifier(BaseEstimator):
    """Rough-set rules over SOM-discretized attributes and a discretized real target.

    ``predict`` returns decision class indices; :meth:`transform_target`
    maps real targets to the same classes. ``score`` is the negative mean
    squared class error, so larger is better.
    """

    def __init__(self, n_classes=3, decision_classes=3, min_support=1, random_state=0):
        self.n_classes = n_classes
        self.decision_classes = decision_classes
        self.min_support = min_support
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self.table_ = rst.build_table(Dataset(X, y), self.n_classes, self.decision_classes, seed=self.random_state)
        self.rules_ = rst.extract_rules(self.table_, self.min_support)
        if not self.rules_:
            raise ValueError(f"min_support={self.min_support} leaves no rules")
        return self

    def _encode(self, X):
        X = _check_features(self, X)
        cond, _ = rst.encode(self.table_.attribute_scales, None, Dataset(X, np.zeros(X.shape[0])))
        return cond

    def predict(self, X):
        check_is_fitted(self, "rules_")
        return rst.classify_many(self.rules_, self._encode(X))

    def transform_target(self, y):
        check_is_fitted(self, "rules_")
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1), dtype=float).ravel()
        return np.asarray(self.table_.decision_scale.classify(y), dtype=int)

    def score(self, X, y):
        return -rst.mse(self.transform_target(y), self.predict(X))


class _CoupledBase(BaseEstimator):
    def _coupling(self) -> CouplingParams:
        return CouplingParams(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            law=self.law,
            n0=self.n0,
            n_min=self.n_min,
            n_max=self.n_max,
            iterations=self.iterations,
        )

    def fit(self, X, y, X_test=None, y_test=None):
        """Run the coupled loop; the error is measured on ``(X_test, y_test)``.

        Without explicit test data ``test_size`` records are held out from
        ``X, y``. Min-max bounds come from the training part only.
        """
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X_test is None:
            data = Dataset(X, y)
            n_test = max(1, int(round(self.test_size * len(data))))
            train, test = split(data, len(data) - n_test, n_test, seed=self.random_state)
        else:
            X_test, y_test = check_X_y(X_test, y_test, dtype=float, y_numeric=True)
            train, test = Dataset(X, y), Dataset(X_test, y_test)
        self.n_features_in_ = X.shape[1]
        train_n, self.normalization_ = normalize(train)
        test_n = self.normalization_.apply(test)
        self.trace_ = run_coupled(
            train_n, test_n, self._coupling(), self._regulator(), self.random_state, self.som_epochs
        )
        if self.trace_.final_regulator is None:
            raise RuntimeError(f"coupled run failed before fitting a regulator: {self.trace_.diagnostic}")
        return self

    @property
    def neuron_growth_(self) -> np.ndarray:
        check_is_fitted(self, "trace_")
        return self.trace_.n_actual

    @property
    def errors_(self) -> np.ndarray:
        check_is_fitted(self, "trace_")
        return self.trace_.errors


class SONFIS(RegressorMixin, _CoupledBase):
    """SOM granulation regulated by a Takagi-Sugeno model.

    After ``fit``, ``trace_`` holds the per-step neuron growth and test RMSE
    and ``predict`` uses the regulator of the last step.
    """

    def __init__(
        self,
        alpha=0.9,
        beta=0.001,
        gamma=0.5,
        law="linear",
        n0=100.0,
        n_min=4,
        n_max=400,
        iterations=30,
        n_rules=2,
        max_rules=3,
        train_iterations=10,
        step=0.01,
        som_epochs=20,
        test_size=93 / 693,
        random_state=0,
    ):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.law = law
        self.n0 = n0
        self.n_min = n_min
        self.n_max = n_max
        self.iterations = iterations
        self.n_rules = n_rules
        self.max_rules = max_rules
        self.train_iterations = train_iterations
        self.step = step
        self.som_epochs = som_epochs
        self.test_size = test_size
        self.random_state = random_state

    def _regulator(self):
        return NfisRegulator(self.n_rules, self.max_rules, self.train_iterations, self.step)

    def predict(self, X):
        check_is_fitted(self, "trace_")
        X = _check_features(self, X)
        out = nfis.predict(self.trace_.final_regulator, self.normalization_.transform_X(X))
        return self.normalization_.inverse_y(out)


class SORSTAS(_CoupledBase):
    """SOM granulation regulated by rough-set rules with adaptive scaling.

    ``predict`` returns decision class indices under the last step's scales.
    """

    def __init__(
        self,
        alpha=0.9,
        beta=0.7,
        gamma=1.0,
        law="linear",
        n0=100.0,
        n_min=4,
        n_max=400,
        iterations=7,
        scales=(2, 3, 4, 5, 6, 7, 8),
        decision_scale=3,
        min_support=1,
        som_epochs=20,
        test_size=93 / 693,
        random_state=0,
    ):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.law = law
        self.n0 = n0
        self.n_min = n_min
        self.n_max = n_max
        self.iterations = iterations
        self.scales = scales
        self.decision_scale = decision_scale
        self.min_support = min_support
        self.som_epochs = som_epochs
        self.test_size = test_size
        self.random_state = random_state

    def _regulator(self):
        return RstRegulator(tuple(self.scales), self.decision_scale, self.min_support)

    def predict(self, X):
        check_is_fitted(self, "trace_")
        X = _check_features(self, X)
        table, rules = self.trace_.final_regulator
        Xn = self.normalization_.transform_X(X)
        cond, _ = rst.encode(table.attribute_scales, None, Dataset(Xn, np.zeros(len(Xn))))
        return rst.classify_many(rules, cond)
