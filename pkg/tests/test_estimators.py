import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import GridSearchCV
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import MinMaxScaler

from cogran.dataset import gen_synthetic
from cogran.estimators import SONFIS, SORSTAS, BatchSOM, RoughSetClassifier, SOMDiscretizer, TSKRegressor

DATA = gen_synthetic(200, 2, 0.05, seed=11)
X, y = np.asarray(DATA.X), np.asarray(DATA.y)


@pytest.mark.parametrize("cls", [BatchSOM, SOMDiscretizer, TSKRegressor, RoughSetClassifier, SONFIS, SORSTAS])
def test_clone_and_params(cls):
    est = cls()
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    key = next(iter(params))
    assert est.set_params(**{key: params[key]}) is est


@pytest.mark.parametrize("cls", [BatchSOM, SOMDiscretizer, TSKRegressor, RoughSetClassifier])
def test_not_fitted(cls):
    with pytest.raises(NotFittedError):
        cls().predict(X) if hasattr(cls, "predict") else cls().transform(X)


def test_batch_som():
    som = BatchSOM(3, 4, epochs=10).fit(X, y)
    assert som.cluster_centers_.shape == (12, 2)
    assert len(som.granules_) == 12
    bmu = som.predict(X)
    d = som.transform(X)
    assert d.shape == (200, 12)
    np.testing.assert_array_equal(bmu, d.argmin(axis=1))
    with pytest.raises(AttributeError):
        BatchSOM(2, 2).fit(X).granules_
    with pytest.raises(ValueError):
        som.predict(X[:, :1])


def test_discretizer_round_trip():
    disc = SOMDiscretizer(n_classes=3).fit(X)
    codes = disc.transform(X)
    assert codes.shape == X.shape and codes.min() >= 0 and codes.max() <= 2
    back = disc.inverse_transform(codes)
    np.testing.assert_array_equal(disc.transform(back), codes)


def test_tsk_regressor_in_pipeline_and_search():
    pipe = make_pipeline(MinMaxScaler(), TSKRegressor(n_rules=2, iterations=5))
    pipe.fit(X, y)
    assert pipe.score(X, y) > 0
    search = GridSearchCV(TSKRegressor(iterations=3), {"n_rules": [1, 2]}, cv=2).fit(X, y)
    assert search.best_params_["n_rules"] in (1, 2)
    assert len(search.best_estimator_.rules()) == search.best_params_["n_rules"]


def test_rough_set_classifier():
    clf = RoughSetClassifier(n_classes=3, decision_classes=3).fit(X, y)
    pred = clf.predict(X)
    assert set(np.unique(pred)) <= {0, 1, 2}
    assert clf.score(X, y) <= 0
    assert clf.score(X, y) == -np.mean((clf.transform_target(y) - pred) ** 2)
    with pytest.raises(ValueError):
        RoughSetClassifier(min_support=10_000).fit(X, y)


def test_sonfis_fit_predict():
    model = SONFIS(iterations=4, som_epochs=5, train_iterations=3, random_state=2).fit(X, y)
    assert len(model.neuron_growth_) == 4 and np.all(np.isfinite(model.errors_))
    pred = model.predict(X)
    assert pred.shape == (200,)
    # predictions come back in target units
    assert abs(pred.mean() - y.mean()) < 2 * y.std()
    again = SONFIS(iterations=4, som_epochs=5, train_iterations=3, random_state=2).fit(X, y)
    assert again.trace_ == model.trace_


def test_sorstas_fit_predict():
    Xtr, ytr, Xte, yte = X[:150], y[:150], X[150:], y[150:]
    model = SORSTAS(som_epochs=5).fit(Xtr, ytr, Xte, yte)
    assert [s.scale for s in model.trace_.steps] == [2, 3, 4, 5, 6, 7, 8]
    assert set(np.unique(model.predict(Xte))) <= set(range(3))
