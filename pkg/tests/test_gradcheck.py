import numpy as np
import pytest

from tacnet.errors import ConfigurationError, NumericError
from tacnet.nn import ParamStore, grad_check, relative_error


def quadratic_store(rng):
    store = ParamStore({"a": rng.standard_normal((3, 2)), "b": rng.standard_normal(4)})
    for name in store:
        store.accumulate(name, 2 * store[name])
    return store


def quad_loss(store):
    return float(sum((store[n] ** 2).sum() for n in store))


def test_quadratic_passes(rng):
    report = grad_check(quad_loss, quadratic_store(rng), h=1e-5, tol=1e-9)
    assert report.passed
    assert report.max_error < 1e-9
    assert set(report.per_param) == {"a", "b"}


def test_corrupted_gradient_fails(rng):
    store = quadratic_store(rng)
    store.grad("b")[...] *= 2
    report = grad_check(quad_loss, store, h=1e-5, tol=1e-4)
    assert not report.passed
    assert report.worst == "b"


def test_nonfinite_loss_reports_parameter(rng):
    store = ParamStore({"w": np.ones(2)})

    def loss(s):
        with np.errstate(invalid="ignore"):
            return float(np.log(s["w"] - 1.0 + 1e-6).sum())

    with pytest.raises(NumericError, match="w"):
        grad_check(loss, store, h=1e-5)


def test_values_restored_after_check(rng):
    store = quadratic_store(rng)
    before = store.to_dict()
    grad_check(quad_loss, store)
    for n in store:
        assert store[n].tobytes() == before[n].tobytes()


def test_relative_error_floor():
    err = relative_error(np.array([0.0]), np.array([1e-10]))
    assert err[0] == pytest.approx(1e-10 / 1e-8)


def test_pass_flag_matches_tolerance(rng):
    store = quadratic_store(rng)
    store.grad("a")[0, 0] *= 1.0 + 1e-3
    rep = grad_check(quad_loss, store, tol=1e-2)
    assert rep.passed == (rep.max_error < 1e-2)
    rep = grad_check(quad_loss, store, tol=1e-5)
    assert rep.passed == (rep.max_error < 1e-5) and not rep.passed


def test_store_rejects_duplicate_names():
    store = ParamStore({"x": np.zeros(1)})
    with pytest.raises(ConfigurationError):
        store.add("x", np.zeros(1))


def test_store_insertion_order():
    names = ["z", "a", "m"]
    store = ParamStore({n: np.zeros(1) for n in names})
    assert store.names() == names
    assert all(p.grad.shape == p.value.shape for p in store.params())
