import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tacnet import TemporalAlignmentConnector, TemporalDirectionClassifier
from tacnet.config import TacConfig
from tacnet.errors import DimensionError
from tacnet.harness import SyntheticPairSpec, gen_pairs
from tacnet.harness.synthetic import LABELS
from tacnet.tac import tac_forward, tac_init

DIMS = dict(layers=4, grid=2, enc_dim=8, llm_dim=12, heads=2, depth=1)


def data(n_train=90, n_test=30, **kw):
    train, test = gen_pairs(SyntheticPairSpec(config=TacConfig(**DIMS), n_train=n_train, n_test=n_test, **kw))
    pack = lambda p: np.stack([p.curr, p.prior], axis=1)
    return pack(train), train.labels, pack(test), test.labels


def test_params_and_clone():
    est = TemporalAlignmentConnector(**DIMS, random_state=3)
    assert est.get_params()["enc_dim"] == 8
    c = clone(est)
    assert c.get_params() == est.get_params()
    clf = TemporalDirectionClassifier(epochs=3).set_params(batch_size=10)
    assert clone(clf).get_params()["batch_size"] == 10


def test_connector_transform_matches_function():
    X, _, _, _ = data()
    est = TemporalAlignmentConnector(**DIMS, random_state=2).fit(X)
    z = est.transform(X[:3])
    cfg = TacConfig(**DIMS, seed=2)
    assert z.shape == (3, 4, 12)
    np.testing.assert_array_equal(z, tac_forward(X[:3, 0], X[:3, 1], tac_init(cfg), cfg))
    assert est.transform(X[:2, 0]).shape == (2, 4, 12)


def test_connector_not_fitted_and_shape_errors():
    X, _, _, _ = data()
    with pytest.raises(NotFittedError):
        TemporalAlignmentConnector(**DIMS).transform(X)
    est = TemporalAlignmentConnector(**DIMS).fit(X)
    with pytest.raises(DimensionError, match="features"):
        est.transform(X[..., :5])
    with pytest.raises(DimensionError, match="pair axis"):
        est.transform(np.concatenate([X, X[:, :1]], axis=1))


def test_classifier_learns_and_names_classes():
    X, y, Xt, yt = data(n_train=600, n_test=30)
    names = np.array(LABELS)[y]
    clf = TemporalDirectionClassifier(**DIMS, epochs=20, batch_size=30, learning_rate=3e-3).fit(X, names)
    assert list(clf.classes_) == list(LABELS)
    pred = clf.predict(Xt)
    assert pred.dtype.kind == "U"
    assert clf.score(Xt, np.array(LABELS)[yt]) > 0.75
    proba = clf.predict_proba(Xt)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, rtol=1e-12)
    assert np.array_equal(clf.classes_[proba.argmax(axis=1)], pred)
    rep = clf.swap_report(Xt, yt)
    assert rep.n_nonstable == 20
    assert clf.loss_curve_[-1] < clf.loss_curve_[0]


def test_classifier_integer_labels_and_bad_labels():
    X, y, _, _ = data()
    clf = TemporalDirectionClassifier(**DIMS, epochs=1, batch_size=30).fit(X, y)
    assert clf.predict(X).dtype.kind == "i"
    with pytest.raises(ValueError):
        TemporalDirectionClassifier(**DIMS, epochs=1).fit(X, np.where(y == 0, 5, y))
    with pytest.raises(ValueError):
        TemporalDirectionClassifier(**DIMS, epochs=1).fit(X, np.array(["better"] * len(y)))
