import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dualproj.estimator import ConditionalGAN
from dualproj.mog import make_spec, sample


@pytest.fixture(scope="module")
def data():
    batch = sample(make_spec(2), 600, np.random.default_rng(0))
    return batch.xs, np.array(["a", "b", "c"])[batch.ys]


@pytest.fixture(scope="module")
def fitted(data):
    X, y = data
    return ConditionalGAN(iterations=300, random_state=1).fit(X[:, None], y)


def test_params_and_clone():
    est = ConditionalGAN(variant="p2gan-ap", lr=1e-3)
    assert est.get_params()["variant"] == "p2gan-ap"
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(hidden=8)
    assert est.hidden == 8


def test_unfitted():
    with pytest.raises(NotFittedError):
        ConditionalGAN().sample([0])


def test_fit_attributes(fitted):
    assert list(fitted.classes_) == ["a", "b", "c"]
    assert fitted.n_iter_ == 300


def test_sample_and_predict(fitted, data):
    X, y = data
    s = fitted.sample(["a", "c", "c"], random_state=0)
    assert s.shape == (3,)
    np.testing.assert_array_equal(s, fitted.sample(["a", "c", "c"], random_state=0))
    proba = fitted.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert set(fitted.predict(X)) <= {"a", "b", "c"}
    assert fitted.score(X, y) <= 0
    with pytest.raises(ValueError, match="labels"):
        fitted.sample(["z"])


def test_deterministic_fit(data):
    X, y = data
    a = ConditionalGAN(iterations=30, random_state=5).fit(X, y).sample(y[:20], random_state=0)
    b = ConditionalGAN(iterations=30, random_state=5).fit(X, y).sample(y[:20], random_state=0)
    np.testing.assert_array_equal(a, b)


def test_input_validation(data):
    X, y = data
    with pytest.raises(ValueError):
        ConditionalGAN(iterations=1).fit(np.ones((5, 2)), y[:5])
    with pytest.raises(ValueError):
        ConditionalGAN(iterations=1).fit(X, np.zeros(len(X)))
