import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from melpath.estimator import DiscretePathPlanner, MemoryPathPlanner
from melpath.exceptions import InputError

LINE = dict(x0=[0.0], xf=[2.0], length_scale=0.5, steps=1000)


@pytest.fixture(scope="module")
def fitted():
    return MemoryPathPlanner(**LINE).fit([[1.0]])


def test_params_round_trip():
    est = MemoryPathPlanner(**LINE, method="fixed_point")
    assert est.get_params()["method"] == "fixed_point"
    assert clone(est).get_params() == est.get_params()
    est.set_params(steps=200)
    assert est.steps == 200


def test_fit_attributes(fitted):
    assert fitted.K_.shape == (1,)
    assert 0 <= fitted.K_[0] <= 1
    assert abs(fitted.residual_[0]) <= 1e-4
    assert fitted.endpoint_error_ <= 1e-10
    assert fitted.n_features_in_ == 1


def test_predict_interpolates(fitted):
    t = fitted.trajectory_.times[::100]
    np.testing.assert_allclose(fitted.predict(t), fitted.trajectory_.positions[::100], atol=1e-12)
    mid = fitted.predict([0.50005])
    assert mid.shape == (1, 1)
    with pytest.raises(InputError):
        fitted.predict([1.5])


def test_methods_agree():
    fp = MemoryPathPlanner(**LINE, method="fixed_point").fit([[1.0]])
    opt = MemoryPathPlanner(**LINE).fit([[1.0]])
    assert abs(fp.K_[0] - opt.K_[0]) <= 1e-4


def test_score_is_objective(fitted):
    assert fitted.score([[1.0]]) == pytest.approx(fitted.objective_, rel=1e-14)
    assert fitted.score([[1.0]], sample_weight=[2.0]) > fitted.score([[1.0]])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        MemoryPathPlanner().predict([0.5])


def test_input_validation():
    with pytest.raises(InputError):
        MemoryPathPlanner(**LINE).fit([[1.0, 2.0]])
    with pytest.raises(InputError):
        MemoryPathPlanner(**LINE).fit([[1.0]], sample_weight=[1.0, 1.0])
    with pytest.raises(InputError):
        MemoryPathPlanner(**LINE, method="magic").fit([[1.0]])
    with pytest.raises(ValueError):
        MemoryPathPlanner(**LINE).fit([[np.nan]])


def test_discrete_planner_close_to_mel(fitted):
    disc = DiscretePathPlanner(x0=[0.0], xf=[2.0], length_scale=0.5).fit([[1.0]])
    t = np.linspace(0, 1, 101)
    assert np.max(np.abs(disc.predict(t) - fitted.predict(t))) <= 0.02
    assert abs(disc.objective_ - fitted.objective_) <= 1e-3
